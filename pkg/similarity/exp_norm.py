import math

import numpy as np

from base.voa_base import BaseSimilarity


class ExpNormSimilarity(BaseSimilarity):
    """exp(-||a - b||_2)"""

    name = "exp_norm"
    supported_kinds = ("lidar", "depth")

    def score(self, a, b) -> float:
        diff = np.asarray(a.data, dtype=float) - np.asarray(b.data, dtype=float)
        return math.exp(-math.sqrt(float(np.sum(diff * diff))))
