import numpy as np

from base.voa_base import BaseSimilarity


class MarginSimilarity(BaseSimilarity):
    """
    Deterministic equivalence: 1 when every cell agrees within the margin, else 0.
    """

    name = "margin"
    supported_kinds = ("lidar", "depth")
    defaults = {"margin": 0.008}

    def validate(self) -> None:
        self.margin = self.param("margin")
        if not self.margin > 0:
            raise self.invalid("margin", "must be positive")

    def score(self, a, b) -> float:
        return 1.0 if bool(np.all(np.abs(a.data - b.data) <= self.margin)) else 0.0
