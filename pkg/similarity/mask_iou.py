import numpy as np

from base.voa_base import BaseSimilarity
from base.voa_observation import as_mask


class MaskIouSimilarity(BaseSimilarity):
    """Intersection over union of the object masks; two empty masks score 1."""

    name = "mask_iou"
    supported_kinds = ("depth", "mask")

    def score(self, a, b) -> float:
        mask_a = as_mask(a).pixels
        mask_b = as_mask(b).pixels
        union = int(np.count_nonzero(mask_a | mask_b))
        if union == 0:
            return 1.0
        return int(np.count_nonzero(mask_a & mask_b)) / union
