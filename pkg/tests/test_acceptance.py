"""End-to-end acceptance checks, one test per criterion (``test_cNN_*``).

Run alone with ``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``;
a PASS/FAIL line per criterion is printed in the terminal summary.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from test_solver import cvx_prox, fd_gradient, prox_objective, random_problem
from gr_imaging import io as grio
from gr_imaging.cli import main
from gr_imaging.em_core import MU0, adjoint_mismatch, dyadic_green, incident_field
from gr_imaging.metrics import composite_image, ssim
from gr_imaging.patchwise import back_project, fast_reconstruct, partition_by_counts, partition_grid, splice
from gr_imaging.scenarios import desk_bars
from gr_imaging.scene import (Acquisition, GroupedMeasurements, ImagingGrid, add_noise, born_forward,
                              config_from_dict, foldy_lax_forward)
from gr_imaging.solver import (SolverConfig, data_fidelity, data_fidelity_grad, exact_line_search_step,
                               prox_mixed_norm, solve_first_order)

P_VALUES = [1.0, 2.0, math.inf]
# converged settings for the image-quality comparisons
CONVERGED = dict(p=2.0, max_iters=1000, tol=1e-9)


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@pytest.fixture(scope="module")
def desk():
    cfg = config_from_dict(desk_bars())
    acq = Acquisition.from_config(cfg)
    return cfg, acq, foldy_lax_forward(cfg.scene, acq)


def test_c01_prox_oracle(record_property):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for p in P_VALUES:
        for _ in range(200):
            d = int(rng.integers(1, 7))
            v = crandn(rng, d) * rng.uniform(0.1, 3.0)
            tau = float(rng.uniform(0.01, 2.0) * np.linalg.norm(v))
            ours = prox_objective(prox_mixed_norm(v[None], tau, p)[0], v, tau, p)
            ref = prox_objective(cvx_prox(v, tau, p), v, tau, p)
            worst = max(worst, abs(ours - ref) / max(abs(ref), 1e-300))
    secs = time.perf_counter() - t0
    record_property("detail", f"worst rel gap {worst:.2e}, {secs:.1f}s")
    assert worst < 1e-6
    assert secs < 60


def test_c02_adjoint(desk, record_property):
    cfg, acq, _ = desk
    rng = np.random.default_rng(102)
    worst, count = 0.0, 0
    for f, t in acq.channels():
        A = acq.channel_matrix(f, t)
        for _ in range(20):
            worst = max(worst, adjoint_mismatch(A, crandn(rng, A.shape[1]), crandn(rng, A.shape[0])))
        count += 1
    record_property("detail", f"{count} matrices, worst {worst:.2e}")
    assert worst < 1e-10


def test_c03_gradient(record_property):
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(10):
        A, x, y = crandn(rng, 10, 15), crandn(rng, 15), crandn(rng, 10)
        g = data_fidelity_grad(A, x, y)
        worst = max(worst, np.linalg.norm(fd_gradient(A, x, y, h=1e-6) - g) / np.linalg.norm(g))
    record_property("detail", f"worst rel error {worst:.2e}")
    assert worst < 1e-5


def test_c04_line_search(record_property):
    rng = np.random.default_rng(104)
    for _ in range(50):
        S, N = (int(v) for v in rng.integers(3, 15, 2))
        A, x, y = crandn(rng, S, N), crandn(rng, N), crandn(rng, S)
        d = data_fidelity_grad(A, x, y)
        a = exact_line_search_step(d, A)
        best = data_fidelity(A, x + a * d, y)
        scale = 1e-12 * max(1.0, best)
        for beta in np.linspace(3 * a, -2 * a, 50):
            assert best <= data_fidelity(A, x + beta * d, y) + scale
        assert best <= data_fidelity(A, x, y)
    # inside the solver: the gradient stage never raises any group's fidelity
    for _ in range(5):
        data = random_problem(rng)
        X = crandn(rng, 12, 2)
        for k in range(data.K):
            A, y = data.A[k], data.y[k]
            d = data_fidelity_grad(A, X[:, k], y)
            assert data_fidelity(A, X[:, k] + exact_line_search_step(d, A) * d, y) <= data_fidelity(A, X[:, k], y)
    record_property("detail", "50 scans of 50 steps")


def test_c05_monotone(record_property):
    rng = np.random.default_rng(105)
    halvings, worst = 0, -np.inf
    for i in range(20):
        data = random_problem(rng, K=int(rng.integers(1, 5)))
        cfg = SolverConfig(gamma=float(rng.uniform(0.05, 2.0)), p=P_VALUES[i % 3], max_iters=300, tol=1e-12)
        _, hist = solve_first_order(data, cfg)
        obj = np.array([hist.initial_objective] + [r.objective for r in hist.records])
        worst = max(worst, float(np.max(np.diff(obj))))
        halvings += sum(r.halvings for r in hist.records)
    record_property("detail", f"max increase {worst:.2e}, {halvings} halvings")
    assert halvings > 0
    assert worst <= 1e-10


def _two_scatterer_oracle(cfg, acq):
    """Closed-form 2 x 2 multiple-scattering solve, per channel."""
    (r1, r2), (a1, a2) = cfg.scene.points, cfg.scene.strengths
    dV = cfg.grid.voxel_volume
    out = {}
    for f in range(cfg.plan.count):
        wk = acq.wavenumber(f)
        c = 1j * wk.omega * MU0 * dV * np.exp(1j * wk.k0 * np.linalg.norm(r1 - r2)) / (4 * np.pi * np.linalg.norm(r1 - r2))
        for t in range(cfg.array.n_tx):
            tx = cfg.array.transmitter(t)
            e1 = incident_field(r1[None], tx.position, tx.polarization, wk)[0]
            e2 = incident_field(r2[None], tx.position, tx.polarization, wk)[0]
            det = 1 - c * c * a1 * a2
            E1, E2 = (e1 + c * a2 * e2) / det, (e2 + c * a1 * e1) / det
            y = np.zeros(cfg.array.n_rx, dtype=complex)
            for s, (rx, e) in enumerate(zip(cfg.array.rx, cfg.array.rx_e)):
                for r, a, E in ((r1, a1, E1), (r2, a2, E2)):
                    y[s] += 1j * wk.omega * MU0 * dV * a * (e @ dyadic_green(rx, r, wk.k0) @ E)
            out[(f, t)] = y
    return out


def test_c06_forward_oracles(record_property):
    from conftest import tiny_config
    one = config_from_dict(tiny_config(scatterers=[{"position": [0.05, -0.55, 0.45], "amplitude": 0.5}],
                                       n_freq=4))
    acq = Acquisition.from_config(one)
    fl, bo = foldy_lax_forward(one.scene, acq, matrices=False), born_forward(one.scene, acq, matrices=False)
    single = max(np.linalg.norm(a - b) / np.linalg.norm(b) for a, b in zip(fl.y, bo.y))

    two = config_from_dict(tiny_config(scatterers=[{"position": [0.05, -0.55, 0.45], "amplitude": [0.3, 0.1]},
                                                   {"position": [-0.12, -0.7, 0.55], "amplitude": 0.4}],
                                       n_freq=4, grouping="per-channel"))
    acq2 = Acquisition.from_config(two)
    fl2 = foldy_lax_forward(two.scene, acq2, matrices=False)
    ref = acq2.group(_two_scatterer_oracle(two, acq2), matrices=False)
    pair = max(np.linalg.norm(a - b) / np.linalg.norm(b) for a, b in zip(fl2.y, ref.y))
    coupled = max(np.linalg.norm(a - b) / np.linalg.norm(b)
                  for a, b in zip(fl2.y, born_forward(two.scene, acq2, matrices=False).y))
    record_property("detail", f"single {single:.1e}, pair {pair:.1e} (multiple scattering effect {coupled:.1e})")
    assert single < 1e-12
    assert pair < 1e-10
    assert coupled > 1e-6


def test_c07_ranking(desk, record_property):
    cfg, acq, clean = desk
    ref = cfg.scene.reference_volume
    scfg = SolverConfig(**CONVERGED)
    t0 = time.perf_counter()
    rows, wins = [], 0
    for seed in range(5):
        data = add_noise(clean, 30.0, seed)
        merged = data.merged()
        s_bp = ssim(composite_image(back_project(merged)), ref, cfg.grid)
        s_born = ssim(composite_image(solve_first_order(merged, scfg)[0]), ref, cfg.grid)
        s_gr = ssim(composite_image(solve_first_order(data, scfg)[0]), ref, cfg.grid)
        wins += (s_gr - s_born >= 0.02) and (s_born - s_bp >= 0.02)
        rows.append(f"{s_gr:.3f}/{s_born:.3f}/{s_bp:.3f}")
    secs = time.perf_counter() - t0
    record_property("detail", f"GR/Born/BP per seed {' '.join(rows)}; {wins}/5 seeds, {secs:.0f}s")
    assert wins >= 4
    assert secs < 600


def test_c08_single_patch_equivalence(desk, record_property):
    cfg, acq, clean = desk
    data = add_noise(clean, 30.0, 0)
    scfg = SolverConfig(p=2.0, max_iters=1000, tol=1e-12)
    fast = fast_reconstruct(data, cfg.grid, cfg=scfg, partition=partition_by_counts(cfg.grid, (1, 1, 1)))
    Z = back_project(data)
    P = [A.conj().T @ A for A in data.A]
    X, hist = solve_first_order(GroupedMeasurements([Z[:, k] for k in range(data.K)], P), scfg)
    rel = np.linalg.norm(fast.X - X) / np.linalg.norm(X)
    record_property("detail", f"rel diff {rel:.2e} after {len(hist)} iterations")
    assert hist.gamma == pytest.approx(fast.histories[0].gamma, rel=1e-12)
    assert rel < 1e-6


def test_c09_patch_trend(desk, record_property):
    cfg, acq, clean = desk
    data = add_noise(clean, 30.0, 0)
    ref = cfg.scene.reference_volume
    scfg = SolverConfig(p=2.0, max_iters=1500, tol=1e-9)
    t0 = time.perf_counter()
    flops, scores, Bs = [], [], []
    for counts in [(1, 1, 1), (2, 1, 2), (2, 2, 2), (4, 2, 2)]:
        part = partition_by_counts(cfg.grid, counts)
        res = fast_reconstruct(data, cfg.grid, cfg=scfg, partition=part)
        Bs.append(part.B)
        flops.append(part.flop_proxy)
        scores.append(ssim(composite_image(res.X), ref, cfg.grid))
    secs = time.perf_counter() - t0
    record_property("detail", "B=" + ",".join(map(str, Bs)) + " ssim=" + ",".join(f"{s:.3f}" for s in scores)
                    + f" flops=" + ",".join(f"{f:.2e}" for f in flops) + f"; {secs:.0f}s")
    assert Bs == [1, 4, 8, 16]
    assert all(a > b for a, b in zip(flops, flops[1:]))
    assert all(b <= a + 0.03 for a, b in zip(scores, scores[1:]))
    assert secs < 900


def test_c10_ssim_units(record_property):
    rng = np.random.default_rng(110)
    g = ImagingGrid((0, 0, 0), (1, 1, 1), (9, 8, 7))
    worst = max(abs(ssim(v, v, g) - 1.0) for v in (rng.random(g.n_voxels) for _ in range(10)))
    c1 = 0.01 ** 2
    closed = (2 * 0.5 + c1) / (1 + 0.25 + c1)
    const = ssim(np.full(g.n_voxels, 0.5), np.ones(g.n_voxels), g)
    record_property("detail", f"identity {worst:.1e}, constant {const:.9f} vs {closed:.9f}")
    assert worst < 1e-12
    assert abs(const - closed) < 1e-9


def test_c11_partition_of_unity(record_property):
    rng = np.random.default_rng(111)
    worst = 0.0
    for _ in range(10):
        shape = tuple(int(v) for v in rng.integers(2, 12, 3))
        g = ImagingGrid((0, 0, 0), (1, 1, 1), shape)
        part = partition_grid(g, tuple(int(rng.integers(1, n + 1)) for n in shape), float(rng.uniform(0, 0.9)))
        out = splice([np.ones(len(p)) for p in part.patches], part)
        worst = max(worst, float(np.max(np.abs(out - 1))))
    record_property("detail", f"worst deviation {worst:.1e}")
    assert worst < 1e-12


def test_c12_determinism(tmp_path, write_config, record_property):
    cfg = write_config(desk_bars(seed=3))
    sims = []
    for name in ("s1", "s2"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        sims.append((tmp_path / name / "measurements.grmeas").read_bytes())
    assert sims[0] == sims[1]
    vols = {}
    for run, threads in (("a", 1), ("b", 1), ("c", 4)):
        for method, extra in (("gr", []), ("gr-fast", ["--patches", "2x1x2"])):
            out = tmp_path / f"{method}-{run}"
            assert main(["reconstruct", "--config", str(cfg), "--data", str(tmp_path / "s1" / "measurements.grmeas"),
                         "--out", str(out), "--method", method, "--max-iters", "40", "--threads", str(threads),
                         *extra]) == 0
            vols[(method, run)] = (out / "volume.grvol").read_bytes()
    for method in ("gr", "gr-fast"):
        assert vols[(method, "a")] == vols[(method, "b")] == vols[(method, "c")]
    record_property("detail", "simulate x2, gr and gr-fast at --threads 1, 1, 4: identical bytes")


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-v"]))
