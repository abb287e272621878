"""Image-quality metrics: composite magnitude images and volumetric SSIM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class SsimParams:
    dynamic_range: float | None = None   # None: max of the reference volume
    k1: float = 0.01
    k2: float = 0.03
    window: int | None = None          # None: 7, clamped to the grid

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("k1 and k2 must be positive")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")


def composite_image(X) -> np.ndarray:
    """Root-sum-square magnitude across groups, scaled to unit maximum."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    img = np.sqrt(np.sum(np.abs(X) ** 2, axis=1))
    peak = img.max() if img.size else 0.0
    return img / peak if peak > 0 else np.zeros_like(img)


def ssim(vol_a, vol_b, grid, params: SsimParams = SsimParams()) -> float:
    """Mean SSIM over all cubic windows lying fully inside the grid.

    ``vol_b`` is treated as the reference when ``params.dynamic_range`` is
    unset. The window edge is clamped to the smallest grid dimension.

    >>> from gr_imaging.scene import ImagingGrid
    >>> g = ImagingGrid((0, 0, 0), (1, 1, 1), (4, 4, 4))
    >>> round(ssim(np.full(64, 0.5), np.ones(64), g), 5)   # (1 + C1) / (1.25 + C1)
    0.80002
    """
    shape = grid.shape if hasattr(grid, "shape") else tuple(grid)
    a = np.asarray(vol_a, dtype=float)
    b = np.asarray(vol_b, dtype=float)
    if a.shape != b.shape or a.size != int(np.prod(shape)):
        raise ValueError(f"volume sizes {a.shape} / {b.shape} do not match grid {shape}")
    if params.window is None:
        w = min(7, min(shape))
    elif params.window > min(shape):
        raise ValueError(f"window {params.window} larger than grid {shape}")
    else:
        w = params.window
    L = params.dynamic_range
    if L is None:
        L = float(np.max(b)) if b.size and np.max(b) > 0 else 1.0
    c1 = (params.k1 * L) ** 2
    c2 = (params.k2 * L) ** 2

    A = a.reshape(shape, order="F")
    B = b.reshape(shape, order="F")
    wa = sliding_window_view(A, (w, w, w))
    wb = sliding_window_view(B, (w, w, w))
    axes = (-3, -2, -1)
    mu_a = wa.mean(axis=axes)
    mu_b = wb.mean(axis=axes)
    var_a = (wa**2).mean(axis=axes) - mu_a**2
    var_b = (wb**2).mean(axis=axes) - mu_b**2
    cov = (wa * wb).mean(axis=axes) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def residual_norm(data, X) -> float:
    """sqrt(sum_k ||y_k - A_k x_k||^2)."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    tot = 0.0
    for k, (A, y) in enumerate(zip(data.A, data.y)):
        r = np.asarray(A) @ X[:, k] - y
        tot += float(np.vdot(r, r).real)
    return float(np.sqrt(tot))
