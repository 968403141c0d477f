import math

import numpy as np
from skimage.measure import moments_central, moments_hu, moments_normalized

from base.voa_base import BaseSimilarity
from base.voa_observation import as_mask

HU_EPS = 1e-12


def hu_signature(pixels: np.ndarray) -> np.ndarray:
    """
    Log-scaled Hu invariants of a binary mask, sign(h) * log10|h|; NaN marks
    invariants too small to compare.
    """
    image = pixels.astype(float)
    nu = moments_normalized(moments_central(image, order=3), order=3)
    hu = np.nan_to_num(moments_hu(np.nan_to_num(nu)))
    signature = np.full(hu.shape, np.nan)
    usable = np.abs(hu) > HU_EPS
    signature[usable] = np.sign(hu[usable]) * np.log10(np.abs(hu[usable]))
    return signature


class MomentShapeSimilarity(BaseSimilarity):
    """
    Shape match of the two masks by their Hu moment signatures, exp(-d) with
    d the summed absolute signature difference. Translation and scale
    invariant, and blind to depth.
    """

    name = "moment_shape"
    supported_kinds = ("depth", "mask")

    def score(self, a, b) -> float:
        mask_a = as_mask(a).pixels
        mask_b = as_mask(b).pixels
        empty_a, empty_b = not mask_a.any(), not mask_b.any()
        if empty_a or empty_b:
            return 1.0 if empty_a and empty_b else 0.0
        sig_a = hu_signature(mask_a)
        sig_b = hu_signature(mask_b)
        both = ~np.isnan(sig_a) & ~np.isnan(sig_b)
        distance = float(np.sum(np.abs(sig_a[both] - sig_b[both])))
        return math.exp(-distance)
