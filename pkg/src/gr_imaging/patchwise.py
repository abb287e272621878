"""Fast patch-parallel reconstruction in the back-projected image domain.

The data equations are mapped to image space with the adjoint
(``z_k = A_k^H y_k``, ``P_k = A_k^H A_k``), the grid is cut into overlapping
boxes, each box is solved independently against its own block of ``P_k``
and the patch images are spliced with a partition of unity.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .scene import GroupedMeasurements, ImagingGrid
from .solver import ConvergenceHistory, IterationRecord, SolverConfig, default_gamma, solve_first_order
from .tiling import size_for_count, tile_starts


class PatchSolveError(RuntimeError):
    def __init__(self, patch: int, cause: Exception):
        self.patch = patch
        super().__init__(f"patch {patch}: {cause}")


class PhaseError(RuntimeError):
    def __init__(self, phase: str, cause: Exception):
        self.phase = phase
        super().__init__(f"{phase}: {cause}")


def back_project(data: GroupedMeasurements) -> np.ndarray:
    """(N, K) stack with column k equal to ``A_k^H y_k``."""
    cols = []
    for k, (A, y) in enumerate(zip(data.A, data.y)):
        if A.shape[0] != y.shape[0]:
            raise ValueError(f"group {k}: dimension mismatch")
        cols.append(np.conj(np.conj(y) @ A))
    return np.stack(cols, axis=1)


@dataclass
class PatchPartition:
    shape: tuple[int, int, int]
    patch_dims: tuple[int, int, int]
    starts: tuple[list[int], list[int], list[int]]
    patches: list[np.ndarray] = field(default_factory=list)
    weights: list[np.ndarray] = field(default_factory=list)

    @property
    def B(self) -> int:
        return len(self.patches)

    @property
    def flop_proxy(self) -> int:
        """Per-iteration cost proxy: sum of squared patch sizes."""
        return int(sum(len(p) ** 2 for p in self.patches))


def _axis_taper(n: int, starts: list[int], size: int) -> list[np.ndarray]:
    """Per-window linear ramps over the margins shared with neighbouring windows."""
    ramps = []
    for j, s in enumerate(starts):
        i = np.arange(s, s + size, dtype=float)
        w = np.ones(size)
        if j > 0:
            left = starts[j - 1] + size - s
            if left > 0:
                w = np.minimum(w, (i - s + 0.5) / left)
        if j < len(starts) - 1:
            right = s + size - starts[j + 1]
            if right > 0:
                w = np.minimum(w, (s + size - i - 0.5) / right)
        ramps.append(w)
    return ramps


def partition_grid(grid: ImagingGrid, patch_dims, overlap: float = 0.5) -> PatchPartition:
    """Axis-aligned overlapping boxes with tapered, normalised splice weights."""
    shape = grid.shape
    dims = tuple(int(d) for d in patch_dims)
    for ax, (d, n) in enumerate(zip(dims, shape)):
        if not 1 <= d <= n:
            raise ValueError(f"patch size {d} along axis {ax} must lie in [1, {n}]")
    starts = tuple(tile_starts(n, d, overlap) for n, d in zip(shape, dims))
    ramps = [_axis_taper(n, st, d) for n, st, d in zip(shape, starts, dims)]
    nx, ny, _ = shape

    patches, raw = [], []
    for jz, jy, jx in product(*(range(len(s)) for s in reversed(starts))):
        sx, sy, sz = starts[0][jx], starts[1][jy], starts[2][jz]
        iz, iy, ix = np.meshgrid(np.arange(sz, sz + dims[2]), np.arange(sy, sy + dims[1]),
                                 np.arange(sx, sx + dims[0]), indexing="ij")
        patches.append((ix + nx * (iy + ny * iz)).ravel())
        w = (ramps[2][jz][:, None, None] * ramps[1][jy][None, :, None] * ramps[0][jx][None, None, :])
        raw.append(w.ravel())

    total = np.zeros(grid.n_voxels)
    for idx, w in zip(patches, raw):
        np.add.at(total, idx, w)
    weights = [w / total[idx] for idx, w in zip(patches, raw)]
    return PatchPartition(shape, dims, starts, patches, weights)


def partition_by_counts(grid: ImagingGrid, counts, overlap: float = 0.5) -> PatchPartition:
    """Partition with ``counts[i]`` patches along axis i (smallest boxes that achieve it)."""
    dims = [size_for_count(n, int(c), overlap) for n, c in zip(grid.shape, counts)]
    return partition_grid(grid, dims, overlap)


def psf_block(A_k, patch) -> np.ndarray:
    """``R_b A_k^H A_k R_b^T`` built from the patch columns of ``A_k`` only."""
    A_k = np.asarray(A_k)
    idx = np.asarray(patch)
    if idx.size and (idx.min() < 0 or idx.max() >= A_k.shape[1]):
        raise IndexError("patch indices out of range")
    Ab = A_k[:, idx]
    return Ab.conj().T @ Ab


def _solve_one(b, Z, idx, blocks, cfg):
    t0 = time.perf_counter()
    sub = GroupedMeasurements([Z[idx, k] for k in range(Z.shape[1])], list(blocks))
    try:
        X, hist = solve_first_order(sub, cfg)
    except Exception as exc:  # tag with the patch index
        raise PatchSolveError(b, exc) from exc
    return X, hist, time.perf_counter() - t0


def solve_patches(Z, partition: PatchPartition, psf_blocks, cfg: SolverConfig, workers: int = 1):
    """Solve every patch sub-problem; ``psf_blocks[b][k]`` is the block of group k.

    Returns a list of ``(X_b, history_b, seconds_b)`` in patch order.
    """
    Z = np.asarray(Z)
    if len(psf_blocks) != partition.B:
        raise ValueError(f"expected PSF blocks for {partition.B} patches, got {len(psf_blocks)}")
    jobs = [(b, Z, partition.patches[b], psf_blocks[b], cfg) for b in range(partition.B)]
    if workers <= 1:
        return [_solve_one(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_solve_one, *j) for j in jobs]
        return [f.result() for f in futures]


def splice(patch_solutions, partition: PatchPartition, n_voxels: int | None = None) -> np.ndarray:
    """Weighted overlap-add of patch stacks in fixed patch order."""
    if len(patch_solutions) != partition.B:
        raise ValueError(f"expected {partition.B} patch solutions, got {len(patch_solutions)}")
    N = n_voxels if n_voxels is not None else int(np.prod(partition.shape))
    first = np.asarray(patch_solutions[0])
    K = 1 if first.ndim == 1 else first.shape[1]
    out = np.zeros((N, K), dtype=np.result_type(first.dtype, float))
    for b, (idx, w) in enumerate(zip(partition.patches, partition.weights)):
        if patch_solutions[b] is None:
            raise ValueError(f"patch {b}: missing solution")
        Xb = np.asarray(patch_solutions[b])
        if Xb.shape[0] != len(idx):
            raise ValueError(f"patch {b}: solution has wrong size")
        out[idx] += w[:, None] * Xb.reshape(len(idx), K)
    return out[:, 0] if first.ndim == 1 else out


def combined_history(histories: list[ConvergenceHistory]) -> ConvergenceHistory:
    """Sum of the patch objectives per iteration.

    Patches that stopped early contribute their final values to later rows.
    """
    n = max((len(h) for h in histories), default=0)
    out = ConvergenceHistory(gamma=histories[0].gamma if histories else 0.0,
                             initial_objective=float(sum(h.initial_objective for h in histories)),
                             stopped=",".join(sorted({h.stopped for h in histories})))
    for i in range(n):
        recs = [h.records[min(i, len(h) - 1)] for h in histories if len(h)]
        steps = np.array([np.max(np.abs(r.steps)) for r in recs])
        out.records.append(IterationRecord(
            i + 1, sum(r.phi for r in recs), sum(r.omega for r in recs), sum(r.objective for r in recs),
            steps, np.concatenate([r.residuals for r in recs]), max(r.halvings for r in recs)))
    return out


@dataclass
class TimingReport:
    rows: list[tuple[str, int, float, int]] = field(default_factory=list)

    def add(self, phase: str, patch: int, seconds: float, iterations: int = 0):
        self.rows.append((phase, patch, seconds, iterations))

    def total(self, phase: str) -> float:
        return sum(r[2] for r in self.rows if r[0] == phase and r[1] == -1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phase", "patch", "seconds", "iterations"])
        for phase, b, s, it in self.rows:
            w.writerow([phase, b, f"{s:.6f}", it])
        return buf.getvalue()


@dataclass
class FastResult:
    X: np.ndarray
    timing: TimingReport
    partition: PatchPartition
    histories: list[ConvergenceHistory]
    gamma: float

    def __iter__(self):
        return iter((self.X, self.timing))


def fast_reconstruct(data: GroupedMeasurements, grid: ImagingGrid, patch_dims=None, overlap: float = 0.5,
                     cfg: SolverConfig = SolverConfig(), workers: int = 1, partition: PatchPartition | None = None
                     ) -> FastResult:
    """Back-project, partition, build PSF blocks, solve patches, splice.

    A default regularisation weight is resolved once for the whole image
    (from the largest row of the patch back-projections ``P_(k,b) R_b z_k``)
    so every patch solves the same objective.
    """
    timing = TimingReport()

    def phase(name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except PatchSolveError:
            raise
        except Exception as exc:
            raise PhaseError(name, exc) from exc
        timing.add(name, -1, time.perf_counter() - t0)
        return out

    Z = phase("back_project", lambda: back_project(data))
    if partition is None:
        dims = grid.shape if patch_dims is None else patch_dims
        partition = phase("partition", lambda: partition_grid(grid, dims, overlap))
    blocks = phase("psf", lambda: [[psf_block(A, idx) for A in data.A] for idx in partition.patches])

    gamma = cfg.gamma
    if gamma is None:
        rows = np.concatenate([
            np.stack([blocks[b][k] @ Z[idx, k] for k in range(Z.shape[1])], axis=1)
            for b, idx in enumerate(partition.patches)])
        gamma = default_gamma(rows, cfg.gamma_scale)
    pcfg = replace(cfg, gamma=gamma)

    t0 = time.perf_counter()
    results = solve_patches(Z, partition, blocks, pcfg, workers=workers)
    for b, (_, hist, secs) in enumerate(results):
        timing.add("patch_solve", b, secs, len(hist))
    timing.add("solve", -1, time.perf_counter() - t0, max((len(h) for _, h, _ in results), default=0))

    X = phase("splice", lambda: splice([x for x, _, _ in results], partition, grid.n_voxels))
    return FastResult(X, timing, partition, [h for _, h, _ in results], gamma)
