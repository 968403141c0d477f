import math

import numpy as np

from base.voa_base import BaseSimilarity


class GaussianSimilarity(BaseSimilarity):
    """
    Unnormalized isotropic Gaussian density of one observation around the other.
    The missing normalizing constant cancels in the belief update.
    """

    name = "gaussian"
    supported_kinds = ("lidar", "depth")
    defaults = {"sigma": 1.0}

    def validate(self) -> None:
        self.sigma = self.param("sigma")
        if not self.sigma > 0:
            raise self.invalid("sigma", "must be positive")

    def score(self, a, b) -> float:
        diff = np.asarray(a.data, dtype=float) - np.asarray(b.data, dtype=float)
        return math.exp(-float(np.sum(diff * diff)) / (2.0 * self.sigma * self.sigma))
