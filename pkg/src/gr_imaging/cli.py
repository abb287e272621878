"""Command-line pipeline: simulate data, reconstruct volumes, evaluate them.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure,
4 measurement data that do not belong to the given configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io as grio
from .em_core import SensorPlacementError, SingularityError
from .metrics import composite_image, residual_norm, ssim
from .patchwise import (PatchSolveError, PhaseError, TimingReport, back_project, combined_history,
                        fast_reconstruct, partition_by_counts)
from .scene import (Acquisition, ConfigError, GroupedMeasurements, SingularCouplingError, add_noise,
                    born_forward, config_to_dict, foldy_lax_forward, load_scene_file)
from .solver import (ConvergenceHistory, DivergenceError, IterationRecord, NullSpaceError, SolverConfig,
                     mixed_norm, parse_p, solve_first_order)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIGEST = 0, 2, 3, 4
METHODS = ("backprojection", "born", "gr", "gr-fast")
REPORT_COLUMNS = ("method", "ssim", "residual", "iterations", "seconds")

_NUMERIC_ERRORS = (DivergenceError, NullSpaceError, SingularCouplingError, SingularityError,
                   PatchSolveError, PhaseError, np.linalg.LinAlgError, FloatingPointError)


class DigestMismatch(RuntimeError):
    pass


class InputError(ValueError):
    pass


def geometry_digest(cfg) -> str:
    """Digest of everything that defines the measurement operator and scene (noise excluded)."""
    return grio.config_digest(config_to_dict(cfg, include_noise=False))


def parse_patches(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    try:
        counts = tuple(int(p) for p in parts)
    except ValueError:
        counts = ()
    if len(counts) != 3 or min(counts) < 1:
        raise argparse.ArgumentTypeError(f"--patches expects AxBxC with positive integers, got {text!r}")
    return counts


def _snr(text: str) -> float | None:
    if text.lower() in ("inf", "+inf", "none"):
        return None
    return float(text)


def _write_config(out: Path, cfg) -> Path:
    path = out / "config.json"
    path.write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    cfg = load_scene_file(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snr = cfg.noise.snr_db if args.snr is None else _snr(args.snr)
    seed = cfg.noise.seed if args.seed is None else int(args.seed)

    acq = Acquisition.from_config(cfg)
    t0 = time.perf_counter()
    forward = born_forward if args.forward == "born" else foldy_lax_forward
    clean = forward(cfg.scene, acq, matrices=False)
    data = add_noise(clean, snr, seed)
    secs = time.perf_counter() - t0

    digest = geometry_digest(cfg)
    grio.write_measurements(out / "measurements.grmeas", data.y, digest)
    grio.write_volume(out / "reference.grvol", cfg.scene.reference_volume, cfg.grid.shape)
    cfg_path = _write_config(out, cfg)
    grio.write_manifest(
        out / "manifest.json", subcommand="simulate", config_digest=digest, seed=seed,
        snr_db=snr, forward=args.forward, seconds=secs, config=str(cfg_path),
        artifacts={"measurements": "measurements.grmeas", "reference": "reference.grvol",
                   "config": "config.json"},
        argv=["simulate", "--config", str(cfg_path), "--out", str(out), "--forward", args.forward,
              "--seed", str(seed), "--snr", "inf" if snr is None else repr(snr)])
    print(f"simulate: K={data.K} rows={[len(y) for y in data.y]} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reconstruct

def _solver_config(args) -> SolverConfig:
    kw = {"p": parse_p(args.p)}
    if args.gamma is not None:
        kw["gamma"] = float(args.gamma)
    if args.max_iters is not None:
        kw["max_iters"] = int(args.max_iters)
    if args.tol is not None:
        kw["tol"] = float(args.tol)
    return SolverConfig(**kw)


def _backprojection(data: GroupedMeasurements):
    merged = data.merged()
    Z = back_project(merged)
    # adjoint images carry no amplitude scale; fit the single best scalar so the residual means something
    AZ = merged.A[0] @ Z[:, 0]
    nrm = float(np.vdot(AZ, AZ).real)
    if nrm > 0:
        Z = Z * (np.vdot(AZ, merged.y[0]) / nrm)
    r = merged.A[0] @ Z[:, 0] - merged.y[0]
    phi = 0.5 * float(np.vdot(r, r).real)
    hist = ConvergenceHistory(gamma=0.0, initial_objective=phi, stopped="single-pass")
    hist.records.append(IterationRecord(1, phi, mixed_norm(Z, 2), phi, np.zeros(1),
                                        np.array([math.sqrt(2 * phi)])))
    return Z, hist


def reconstruct(data: GroupedMeasurements, grid, method: str, scfg: SolverConfig,
                patches=None, overlap: float = 0.5, workers: int = 1):
    """Run one reconstruction method; returns (X, history, timing)."""
    timing = TimingReport()
    t0 = time.perf_counter()
    if method == "backprojection":
        X, hist = _backprojection(data)
        timing.add("back_project", -1, time.perf_counter() - t0, 1)
        return X, hist, timing
    if method == "born":
        data = data.merged()
    if method == "gr-fast" or (method in ("gr", "born") and patches is not None):
        part = partition_by_counts(grid, patches or (1, 1, 1), overlap)
        res = fast_reconstruct(data, grid, cfg=scfg, workers=workers, partition=part)
        return res.X, combined_history(res.histories), res.timing
    X, hist = solve_first_order(data, scfg)
    timing.add("solve", -1, time.perf_counter() - t0, len(hist))
    return X, hist, timing


def _load_data(args, cfg) -> tuple[list[np.ndarray], str]:
    ys, digest = grio.read_measurements(args.data)
    expected = geometry_digest(cfg)
    if digest != expected:
        raise DigestMismatch(f"measurement digest {digest or '<none>'} does not match config digest {expected}")
    rows = [sum(cfg.array.n_rx for _ in g) for g in cfg.grouping.groups]
    if [len(y) for y in ys] != rows:
        raise InputError(f"measurement rows {[len(y) for y in ys]} do not match grouping {rows}")
    return ys, digest


def _data_seed(data_path) -> int | None:
    man = Path(data_path).parent / "manifest.json"
    if man.exists():
        return grio.read_manifest(man).get("seed")
    return None


def cmd_reconstruct(args) -> int:
    cfg = load_scene_file(args.config)
    ys, digest = _load_data(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scfg = _solver_config(args)

    t0 = time.perf_counter()
    acq = Acquisition.from_config(cfg)
    data = GroupedMeasurements(ys, acq.group_matrices(), list(cfg.grouping.groups))
    t_assemble = time.perf_counter() - t0

    t1 = time.perf_counter()
    X, hist, timing = reconstruct(data, cfg.grid, args.method, scfg, args.patches, args.overlap, args.threads)
    secs = time.perf_counter() - t1
    timing.rows.insert(0, ("assemble", -1, t_assemble, 0))
    timing.add("total", -1, secs, len(hist))

    resid = residual_norm(data.merged() if X.shape[1] == 1 and data.K > 1 else data, X)
    grio.write_volume(out / "volume.grvol", X, cfg.grid.shape)
    grio.write_volume(out / "composite.grvol", composite_image(X), cfg.grid.shape)
    (out / "history.csv").write_text(hist.to_csv())
    (out / "timing.csv").write_text(timing.to_csv())
    cfg_path = _write_config(out, cfg)

    argv = ["reconstruct", "--config", str(cfg_path), "--data", str(args.data), "--out", str(out),
            "--method", args.method, "--p", str(args.p), "--overlap", repr(args.overlap),
            "--threads", str(args.threads), "--max-iters", str(scfg.max_iters), "--tol", repr(scfg.tol)]
    if args.gamma is not None:
        argv += ["--gamma", repr(float(args.gamma))]
    if args.patches is not None:
        argv += ["--patches", "x".join(map(str, args.patches))]
    grio.write_manifest(
        out / "manifest.json", subcommand="reconstruct", config_digest=digest, seed=_data_seed(args.data),
        method=args.method, p=args.p, gamma=hist.gamma, K=int(X.shape[1]), iterations=len(hist),
        stopped=hist.stopped, seconds=secs, residual=resid, config=str(cfg_path), data=str(args.data),
        artifacts={"volume": "volume.grvol", "composite": "composite.grvol", "history": "history.csv",
                   "timing": "timing.csv", "config": "config.json"},
        argv=argv)
    print(f"reconstruct[{args.method}]: K={X.shape[1]} iterations={len(hist)} ({hist.stopped}) "
          f"residual={resid:.4g} {secs:.2f}s -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate

def _run_info(volume_path) -> dict:
    man = Path(volume_path).parent / "manifest.json"
    if man.exists():
        m = grio.read_manifest(man)
        if m.get("subcommand") == "reconstruct":
            return m
    return {}


def _label(volume_path, info: dict, used: set) -> str:
    label = info.get("method") or Path(volume_path).parent.name or Path(volume_path).stem
    base, i = label, 2
    while label in used:
        label, i = f"{base}-{i}", i + 1
    used.add(label)
    return label


def parse_slice(text: str) -> tuple[int, int]:
    try:
        axis, index = text.split(":")
        ax = "xyz".index(axis.lower())
        return ax, int(index)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--slice expects AXIS:INDEX such as z:4, got {text!r}") from None


def export_slice(path, image, reference, grid, axis: int, index: int) -> int:
    """Write one grid plane as CSV rows (i, j, u, v, value, reference); returns the row count."""
    shape = grid.shape
    if not 0 <= index < shape[axis]:
        raise InputError(f"slice index {index} outside 0..{shape[axis] - 1} along {'xyz'[axis]}")
    a, b = [i for i in range(3) if i != axis]
    vol = np.take(grid.to_volume(image), index, axis=axis)
    ref = np.take(grid.to_volume(reference), index, axis=axis)
    ax = grid.axes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "xyz"[a], "xyz"[b], "value", "reference"])
        for j in range(shape[b]):
            for i in range(shape[a]):
                w.writerow([i, j, repr(float(ax[a][i])), repr(float(ax[b][j])),
                            repr(float(vol[i, j])), repr(float(ref[i, j]))])
    return shape[a] * shape[b]


def cmd_evaluate(args) -> int:
    from . import plotting

    ref, ref_shape = grio.read_volume(args.reference)
    reference = np.abs(ref[:, 0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = load_scene_file(args.config).grid if args.config else _GridView(ref_shape)
    if tuple(grid.shape) != tuple(ref_shape):
        raise InputError(f"config grid {grid.shape} differs from reference grid {ref_shape}")

    rows, images, used = [], {"reference": reference}, set()
    for vpath in args.volume:
        X, shape = grio.read_volume(vpath)
        if shape != ref_shape:
            raise InputError(f"{vpath}: grid {shape} differs from reference grid {ref_shape}")
        info = _run_info(vpath)
        label = args.method if (args.method and len(args.volume) == 1) else _label(vpath, info, used)
        img = composite_image(X)
        score = ssim(img, reference, ref_shape)
        rows.append((label, score, info.get("residual", float("nan")), info.get("iterations", 0),
                     info.get("seconds", float("nan"))))
        images[label] = img
        if args.slice is not None:
            ax, idx = args.slice
            export_slice(out / f"slice_{label}_{'xyz'[ax]}{idx}.csv", img, reference, grid, ax, idx)

    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for label, s, r, it, secs in rows:
            w.writerow([label, f"{s:.6f}", f"{r:.6g}", it, f"{secs:.3f}"])

    if not args.no_figures:
        plotting.projection_figure(images, grid, out / "projections.png")
        plotting.ssim_bar_figure({r[0]: r[1] for r in rows}, out / "ssim.png")
        hists = {}
        for vpath, (label, *_rest) in zip(args.volume, rows):
            hpath = Path(vpath).parent / "history.csv"
            if hpath.exists():
                hists[label] = _read_history(hpath)
        if hists:
            plotting.convergence_figure(hists, out / "convergence.png")

    for label, s, r, it, secs in rows:
        print(f"{label:>16s}  ssim={s:.4f}  residual={r:.4g}  iterations={it}")
    return EXIT_OK


class _GridView:
    """Index-space stand-in for an ImagingGrid when only the shape is known."""

    def __init__(self, shape):
        self.shape = self.divisions = tuple(shape)
        self.center = tuple(n / 2.0 for n in shape)
        self.extents = tuple(float(n) for n in shape)
        self.axes = tuple(np.arange(n) + 0.5 for n in shape)

    def to_volume(self, v):
        return np.asarray(v).reshape(self.shape, order="F")


def _read_history(path) -> ConvergenceHistory:
    hist = ConvergenceHistory()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            hist.records.append(IterationRecord(int(row["iteration"]), float(row["phi"]), float(row["omega"]),
                                                float(row["objective"]), np.array([float(row["max_step"])]),
                                                np.zeros(0)))
    return hist


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gr-imaging", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate grouped measurements from a scene config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--forward", choices=("foldy-lax", "born"), default="foldy-lax")
    s.add_argument("--snr", default=None, help="SNR in dB, or 'inf' for clean data (overrides config)")
    s.add_argument("--seed", type=int, default=None, help="noise seed (overrides config)")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", help="reconstruct a reflectivity stack from measurements")
    r.add_argument("--config", required=True)
    r.add_argument("--data", required=True, help="measurements.grmeas written by simulate")
    r.add_argument("--out", required=True)
    r.add_argument("--method", choices=METHODS, default="gr")
    r.add_argument("--p", default="2", choices=("1", "2", "inf"))
    r.add_argument("--gamma", type=float, default=None)
    r.add_argument("--patches", type=parse_patches, default=None, help="patch counts per axis, e.g. 2x2x2")
    r.add_argument("--overlap", type=float, default=0.5)
    r.add_argument("--max-iters", type=int, default=None)
    r.add_argument("--tol", type=float, default=None)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--seed", type=int, default=None, help="accepted for symmetry; reconstruction is deterministic")
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("evaluate", help="score volumes against a reference and render figures")
    e.add_argument("--volume", required=True, action="append", help="volume.grvol (repeatable)")
    e.add_argument("--reference", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--method", default=None, help="label for a single volume")
    e.add_argument("--config", default=None, help="scene config, for metric axes in the figures")
    e.add_argument("--slice", type=parse_slice, default=None, help="export a plane as CSV, e.g. z:4")
    e.add_argument("--no-figures", action="store_true")
    e.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DigestMismatch as exc:
        print(f"refusing to run: {exc}", file=sys.stderr)
        return EXIT_DIGEST
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, grio.FormatError, SensorPlacementError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
