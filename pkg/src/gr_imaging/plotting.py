"""Static figures written next to the CSV reports (Agg backend, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_VIEWS = (("x-y (max over z)", 2, (0, 1)), ("x-z (max over y)", 1, (0, 2)), ("y-z (max over x)", 0, (1, 2)))
_LABELS = "xyz"


def max_projections(image, grid) -> list[np.ndarray]:
    """Maximum-intensity projections of an N-vector along z, y and x."""
    vol = grid.to_volume(np.abs(np.asarray(image)))
    return [vol.max(axis=ax) for _, ax, _ in _VIEWS]


def projection_figure(images: dict, grid, path, title: str | None = None) -> None:
    """One row of three projections per labelled image.

    Parameters
    ----------
    images : dict of str -> (N,) array
        Real images on ``grid``, e.g. the reference and one or more composites.
    grid : ImagingGrid
    path : str or Path
        Output file; the format follows the suffix.
    """
    lo = np.asarray(grid.center) - np.asarray(grid.extents) / 2.0
    hi = lo + np.asarray(grid.extents)
    rows = len(images)
    fig, axes = plt.subplots(rows, 3, figsize=(11, 2.6 * rows + 0.4), squeeze=False)
    for r, (label, img) in enumerate(images.items()):
        projs = max_projections(img, grid)
        vmax = max(float(np.max(p)) for p in projs) or 1.0
        for c, ((name, _, (i, j)), proj) in enumerate(zip(_VIEWS, projs)):
            ax = axes[r, c]
            ax.imshow(proj.T, origin="lower", cmap="viridis", vmin=0.0, vmax=vmax, aspect="auto",
                      extent=(lo[i], hi[i], lo[j], hi[j]))
            ax.set_xlabel(f"{_LABELS[i]} [m]")
            ax.set_ylabel(f"{_LABELS[j]} [m]")
            ax.set_title(f"{label}: {name}" if c == 0 else name, fontsize=9)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def convergence_figure(histories: dict, path) -> None:
    """Composite objective against iteration, one curve per label."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, hist in histories.items():
        obj = hist.objectives
        if obj.size:
            ax.semilogy(np.arange(1, obj.size + 1), obj, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.grid(True, which="both", alpha=0.3)
    if histories:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def ssim_bar_figure(scores: dict, path) -> None:
    fig, ax = plt.subplots(figsize=(max(3.0, 1.2 * len(scores) + 1), 3.5))
    labels = list(scores)
    ax.bar(labels, [scores[k] for k in labels], color="tab:blue")
    ax.set_ylabel("SSIM")
    ax.set_ylim(min(0.0, min(scores.values(), default=0.0)), 1.0)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
