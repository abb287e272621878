"""Overlapping 1-D tilings shared by patch partitions and sub-band grouping."""

from __future__ import annotations

import math


def tile_stride(size: int, overlap: float) -> int:
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must lie in [0, 1), got {overlap}")
    return max(1, math.ceil(size * (1.0 - overlap) - 1e-12))


def tile_starts(n: int, size: int, overlap: float) -> list[int]:
    """Start offsets of windows of ``size`` covering ``range(n)``.

    Windows advance by ``ceil(size * (1 - overlap))``; the last one is clamped
    so that it ends exactly at ``n``.

    >>> tile_starts(8, 4, 0.5)
    [0, 2, 4]
    """
    if not 1 <= size <= n:
        raise ValueError(f"window size {size} must lie in [1, {n}]")
    stride = tile_stride(size, overlap)
    starts = []
    s = 0
    while s + size <= n:
        starts.append(s)
        s += stride
    if starts[-1] + size < n:
        starts.append(n - size)
    return starts


def size_for_count(n: int, count: int, overlap: float) -> int:
    """Smallest window size whose tiling of ``range(n)`` has ``count`` windows."""
    if count < 1:
        raise ValueError("window count must be >= 1")
    for size in range(1, n + 1):
        if len(tile_starts(n, size, overlap)) == count:
            return size
    raise ValueError(f"no window size tiles {n} cells into exactly {count} windows "
                     f"at overlap {overlap}")
