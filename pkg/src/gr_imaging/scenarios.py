"""Ready-made configuration documents.

``example1`` reproduces the published triple-bar geometry at full size;
``desk_bars`` shrinks it to a grid small enough for dense solves on a laptop.
"""

from __future__ import annotations

import numpy as np

EXAMPLE1_TRANSMITTERS = [[-0.61, 0.0, 0.0], [0.61, 0.0, 0.0], [-0.61, 0.0, 0.7], [0.61, 0.0, 0.7]]


def bar_points(corner, directions, length: float, spacing: float) -> np.ndarray:
    """Points along bars leaving ``corner`` in each of ``directions`` (corner counted once)."""
    corner = np.asarray(corner, dtype=float)
    n = int(round(length / spacing))
    pts = [corner]
    for d in directions:
        d = np.asarray(d, dtype=float)
        d = d / np.linalg.norm(d)
        pts.extend(corner + spacing * i * d for i in range(1, n + 1))
    return np.array(pts)


def example1(frequencies=(0.5e9, 3.5e9, 26e6), amplitude: float = 0.03) -> dict:
    """Full-size triple-crossed-bar configuration (40 x 16 x 20 grid, 9 x 8 receivers)."""
    f_min, f_max, step = frequencies
    pts = bar_points([0.047, -0.6, 0.25], [[1, 0, 0], [0, -1, 0], [0, 0, 1]], 0.4, 0.05)
    return {
        "grid": {"center": [0.0, -0.6, 0.5], "extents": [2.0, 0.8, 1.0], "divisions": [40, 16, 20]},
        "array": {
            "transmitters": [{"position": p, "polarization": "z"} for p in EXAMPLE1_TRANSMITTERS],
            "receivers": {"uniform": {"center": [0.0, 0.0, 0.35], "counts": [9, 1, 8],
                                      "spacing": [0.15, 0.0, 0.1]}},
            "rx_component": "z",
        },
        "frequencies": {"f_min": f_min, "f_max": f_max, "step": step},
        "grouping": {"mode": "per-transmitter", "params": {}},
        "scene": {"scatterers": [{"position": p.tolist(), "amplitude": amplitude} for p in pts],
                  "reference": "occupancy"},
        "noise": {"snr_db": 30.0, "seed": 0},
    }


def desk_bars(seed: int = 0, snr_db: float | None = 30.0, amplitude: float = 0.03,
              n_freq: int = 8, f_min: float = 0.5e9, f_max: float = 3.5e9) -> dict:
    """Desk-scale corner reflector: 20 x 8 x 10 grid, 4 transmitters, 6 x 4 receivers."""
    pts = bar_points([0.047, -0.55, 0.25], [[1, 0, 0], [0, -1, 0], [0, 0, 1]], 0.4, 0.05)
    step = (f_max - f_min) / (n_freq - 1) if n_freq > 1 else 1.0
    return {
        "grid": {"center": [0.0, -0.6, 0.5], "extents": [2.0, 0.8, 1.0], "divisions": [20, 8, 10]},
        "array": {
            "transmitters": [{"position": p, "polarization": "z"} for p in EXAMPLE1_TRANSMITTERS],
            "receivers": {"uniform": {"center": [0.0, 0.0, 0.35], "counts": [6, 1, 4],
                                      "spacing": [0.24, 0.0, 0.7 / 3]}},
            "rx_component": "z",
        },
        "frequencies": {"f_min": f_min, "f_max": f_max, "step": step},
        "grouping": {"mode": "per-transmitter", "params": {}},
        "scene": {"scatterers": [{"position": p.tolist(), "amplitude": amplitude} for p in pts],
                  "reference": "occupancy"},
        "noise": {"snr_db": snr_db, "seed": seed},
    }
