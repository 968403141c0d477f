import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from base.voa_base import BaseSimilarity


class SsimStructureSimilarity(BaseSimilarity):
    """
    Structure term of SSIM, (s_xy + c2/2) / (s_x s_y + c2/2), averaged over
    windows and mapped from [-1, 1] to [0, 1]. Depth is normalized by the
    sensor max range (or `scale`) before comparison.
    """

    name = "ssim_structure"
    supported_kinds = ("depth",)
    defaults = {"window": 8, "stride": 8, "c2": 1e-4, "scale": None}

    def validate(self) -> None:
        self.window = self.param("window", int)
        self.stride = self.param("stride", int)
        self.c2 = self.param("c2")
        self.scale = None if self.params["scale"] is None else self.param("scale")
        if self.window < 2:
            raise self.invalid("window", "must be at least 2")
        if self.stride < 1:
            raise self.invalid("stride", "must be at least 1")
        if not self.c2 > 0:
            raise self.invalid("c2", "must be positive")
        if self.scale is not None and not self.scale > 0:
            raise self.invalid("scale", "must be positive")

    def _windows(self, image: np.ndarray) -> np.ndarray:
        shape = (min(self.window, image.shape[0]), min(self.window, image.shape[1]))
        views = sliding_window_view(image, shape)[:: self.stride, :: self.stride]
        return views.reshape(-1, shape[0] * shape[1])

    def score(self, a, b) -> float:
        scale = self.scale if self.scale is not None else float(max(a.max_range, b.max_range))
        x = self._windows(np.asarray(a.data, dtype=float) / scale)
        y = self._windows(np.asarray(b.data, dtype=float) / scale)
        dx = x - x.mean(axis=1, keepdims=True)
        dy = y - y.mean(axis=1, keepdims=True)
        var_x = np.mean(dx * dx, axis=1)
        var_y = np.mean(dy * dy, axis=1)
        cov = np.mean(dx * dy, axis=1)
        half_c2 = self.c2 / 2.0
        # sqrt(v*v) == v exactly, so identical windows give a structure term of exactly 1
        structure = (cov + half_c2) / (np.sqrt(var_x * var_y) + half_c2)
        # a flat window carries no structure: it only matches an identical window
        flat = (np.ptp(x, axis=1) == 0.0) | (np.ptp(y, axis=1) == 0.0)
        same = np.all(x == y, axis=1)
        structure = np.where(flat & ~same, 0.0, structure)
        return float(np.mean((np.clip(structure, -1.0, 1.0) + 1.0) / 2.0))
