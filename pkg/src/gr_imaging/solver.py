"""Joint-sparsity regularised reconstruction with a first-order proximal scheme.

The objective is ``0.5 * sum_k ||y_k - A_k x_k||^2 + gamma * Omega(X)`` with
``Omega(X) = sum_n ||X[n, :]||_p``: an outer l1 sum over voxels of an inner
p-norm across the K groups.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np


class DivergenceError(RuntimeError):
    pass


class NullSpaceError(ValueError):
    """The search direction lies in the null space of the measurement matrix."""


def _check_p(p) -> float:
    p = float(p)
    if p not in (1.0, 2.0, math.inf):
        raise ValueError(f"inner norm must be 1, 2 or inf, got {p}")
    return p


def parse_p(text) -> float:
    if isinstance(text, str) and text.lower() in ("inf", "infinity", "max"):
        return math.inf
    return _check_p(text)


def row_norms(X, p) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X))
    p = _check_p(p)
    A = np.abs(X)
    if p == 1.0:
        return A.sum(axis=1)
    if p == 2.0:
        return np.sqrt(np.sum(A * A, axis=1))
    return A.max(axis=1)


def mixed_norm(X, p=2) -> float:
    """Sum over rows of the inner p-norm across columns."""
    return float(np.sum(row_norms(X, p)))


def _shrink_p2(mag2, weights):
    """Scale factors s_k for the weighted group shrinkage of one block of rows.

    Solves ``min sum_k w_k/2 |x_k - v_k|^2 + ||x||_2`` (thresh folded into w).
    With t = ||x||, x_k = v_k * w_k t / (w_k t + 1); t > 0 is the root of
    ``sum_k |v_k|^2 w_k^2 / (w_k t + 1)^2 = 1``, found by Newton from t = 0
    (the function is convex decreasing, so the iterates increase monotonically).
    """
    t = np.zeros(mag2.shape[0])
    for _ in range(100):
        den = weights * t[:, None] + 1.0
        F = np.sum(mag2 * weights**2 / den**2, axis=1) - 1.0
        dF = -2.0 * np.sum(mag2 * weights**3 / den**3, axis=1)
        step = F / dF
        t = t - step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(t, 1e-300)):
            break
    return weights * t[:, None] / (weights * t[:, None] + 1.0)


def _linf_level(mag, weights):
    """Clip level c with sum_k w_k (m_k - c)_+ = 1, per row (rows need sum w m > 1)."""
    order = np.argsort(-mag, axis=1)
    m = np.take_along_axis(mag, order, axis=1)
    w = np.take_along_axis(weights, order, axis=1)
    cw = np.cumsum(w, axis=1)
    cwm = np.cumsum(w * m, axis=1)
    # candidate levels assuming the top j entries are clipped
    levels = (cwm - 1.0) / cw
    nxt = np.concatenate([m[:, 1:], np.full((m.shape[0], 1), -np.inf)], axis=1)
    valid = levels >= nxt
    j = np.argmax(valid, axis=1)
    return levels[np.arange(m.shape[0]), j]


def prox_mixed_norm(V, tau, p=2) -> np.ndarray:
    """Proximal map of ``Omega`` with threshold ``tau``, row by row.

    ``tau`` is a scalar, giving ``argmin 0.5 ||X - V||_F^2 + tau Omega(X)``,
    or a length-K vector of per-column thresholds, giving the map in the
    metric ``sum_k ||x_k - v_k||^2 / (2 tau_k) + Omega(X)``. Complex entries
    keep their phase; only magnitudes are shrunk.
    """
    V = np.asarray(V)
    squeeze = V.ndim == 1
    V2 = np.atleast_2d(V)
    if squeeze:
        V2 = V2.reshape(1, -1)
    p = _check_p(p)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("threshold must be nonnegative")
    K = V2.shape[1]
    tau_k = np.broadcast_to(tau, (K,)).astype(float)
    if np.all(tau_k == 0):
        out = V2.copy()
        return out.ravel() if squeeze else out

    mag = np.abs(V2)
    phase = np.where(mag > 0, V2 / np.where(mag > 0, mag, 1.0), 0.0)
    if np.any(tau_k == 0):
        raise ValueError("per-column thresholds must be all zero or all positive")
    w = np.broadcast_to(1.0 / tau_k, mag.shape)

    if p == 1.0:
        new = np.maximum(mag - tau_k, 0.0)
    elif p == 2.0:
        # zero iff ||(v_k / tau_k)_k||_2 <= 1
        keep = np.sqrt(np.sum((mag * w) ** 2, axis=1)) > 1.0
        new = np.zeros_like(mag)
        if np.any(keep):
            if np.all(tau_k == tau_k[0]):
                nrm = np.sqrt(np.sum(mag[keep] ** 2, axis=1))
                new[keep] = mag[keep] * (1.0 - tau_k[0] / nrm)[:, None]
            else:
                new[keep] = mag[keep] * _shrink_p2(mag[keep] ** 2, w[keep])
    else:
        # Moreau: clip magnitudes at the level where the weighted excess equals 1
        keep = np.sum(mag * w, axis=1) > 1.0
        new = np.zeros_like(mag)
        if np.any(keep):
            c = _linf_level(mag[keep], w[keep])
            new[keep] = np.minimum(mag[keep], c[:, None])
    out = new * phase
    return out.ravel() if squeeze else out


def data_fidelity(A_k, x_k, y_k) -> float:
    r = A_k @ x_k - y_k
    return 0.5 * float(np.vdot(r, r).real)


def data_fidelity_grad(A_k, x_k, y_k) -> np.ndarray:
    """``A^H (A x - y)``: gradient of 0.5 ||y - A x||^2 w.r.t. conj(x), times 2."""
    A_k = np.asarray(A_k)
    x_k = np.asarray(x_k)
    y_k = np.asarray(y_k)
    if A_k.shape[1] != x_k.shape[0] or A_k.shape[0] != y_k.shape[0]:
        raise ValueError(f"dimension mismatch: A {A_k.shape}, x {x_k.shape}, y {y_k.shape}")
    return np.conj(np.conj(A_k @ x_k - y_k) @ A_k)


def exact_line_search_step(d, A_k) -> float:
    """Step ``-||d||^2 / ||A d||^2``; exact minimiser of the fidelity along ``x + alpha d``."""
    d = np.asarray(d)
    dd = float(np.vdot(d, d).real)
    if dd == 0:
        raise ValueError("zero search direction")
    Ad = np.asarray(A_k) @ d
    AdAd = float(np.vdot(Ad, Ad).real)
    if AdAd == 0:
        raise NullSpaceError("search direction lies in the null space of A")
    return -dd / AdAd


@dataclass(frozen=True)
class SolverConfig:
    gamma: float | None = None
    p: float = 2.0
    max_iters: int = 200
    tol: float = 1e-4
    lipschitz_override: float | None = None
    gamma_scale: float = 0.02
    max_halvings: int = 20

    def __post_init__(self):
        _check_p(self.p)
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class IterationRecord:
    iteration: int
    phi: float
    omega: float
    objective: float
    steps: np.ndarray
    residuals: np.ndarray
    halvings: int = 0


@dataclass
class ConvergenceHistory:
    records: list[IterationRecord] = field(default_factory=list)
    gamma: float = 0.0
    initial_objective: float = float("nan")
    stopped: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "phi", "omega", "objective", "max_step"])
        for r in self.records:
            w.writerow([r.iteration, repr(r.phi), repr(r.omega), repr(r.objective),
                        repr(float(np.max(np.abs(r.steps))) if len(r.steps) else 0.0)])
        return buf.getvalue()


def back_projection_stack(A_list, y_list) -> np.ndarray:
    return np.stack([np.conj(np.conj(y) @ np.asarray(A)) for A, y in zip(A_list, y_list)], axis=1)


def default_gamma(Z, scale: float = 0.02) -> float:
    return scale * float(np.max(row_norms(Z, 2))) if Z.size else 0.0


def resolve_gamma(data, cfg: SolverConfig) -> float:
    if cfg.gamma is not None:
        return float(cfg.gamma)
    return default_gamma(back_projection_stack(data.A, data.y), cfg.gamma_scale)


def _omega_change(X, Xn, delta, p) -> float:
    """``Omega(Xn) - Omega(X)`` from the increment ``delta = Xn - X``, free of cancellation for p = 1, 2."""
    if p == math.inf:
        return float(np.sum(row_norms(Xn, p) - row_norms(X, p)))
    # |a|^2 - |b|^2 = 2 Re(conj(b) d) + |d|^2, divided by |a| + |b|
    sq = 2.0 * np.real(np.conj(X) * delta) + np.abs(delta) ** 2
    if p == 2.0:
        num, den = np.sum(sq, axis=1), row_norms(Xn, 2) + row_norms(X, 2)
    else:
        num, den = sq, np.abs(Xn) + np.abs(X)
    return float(np.sum(np.divide(num, den, out=np.zeros_like(den), where=den > 0)))


def _lipschitz(A) -> float:
    return float(np.linalg.norm(A, 2) ** 2)


_RESIDUAL_REFRESH = 100   # recompute A x - y directly this often to stop drift


def solve_first_order(data, cfg: SolverConfig = SolverConfig(), x0=None
                      ) -> tuple[np.ndarray, ConvergenceHistory]:
    """Per-group gradient steps with exact line search, then joint proximal fusion.

    Each iteration takes, for every group k, the gradient ``d_k`` and the exact
    step ``alpha_k`` (or ``-1/L`` when ``cfg.lipschitz_override`` is set),
    forms ``v_k = x_k + alpha_k d_k`` and fuses the columns through the
    proximal map of ``gamma * Omega`` in the metric weighted by ``|alpha_k|``.
    If the composite objective would increase, all steps are halved (up to
    ``cfg.max_halvings`` times) and then, as a last resort, replaced by the
    safe ``1/||A_k||^2``; an iteration that still cannot descend ends the run.

    Parameters
    ----------
    data : GroupedMeasurements
        Anything with parallel lists ``A`` and ``y``.
    cfg : SolverConfig

    Returns
    -------
    X : (N, K) complex array
    history : ConvergenceHistory
    """
    A_list = [np.asarray(A) for A in data.A]
    y_list = [np.asarray(y) for y in data.y]
    K = len(A_list)
    N = A_list[0].shape[1]
    gamma = resolve_gamma(data, cfg)
    p = cfg.p

    X = np.zeros((N, K), dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    r = [A_list[k] @ X[:, k] - y_list[k] for k in range(K)]   # tmp_y - y

    def fidelities(res):
        return np.array([0.5 * float(np.vdot(rk, rk).real) for rk in res])

    phi_k = fidelities(r)
    obj = float(phi_k.sum() + gamma * mixed_norm(X, p))
    hist = ConvergenceHistory(gamma=gamma, initial_objective=obj)
    safe = None

    for it in range(1, cfg.max_iters + 1):
        D = np.empty_like(X)
        alpha = np.zeros(K)
        AD = []
        for k in range(K):
            d = np.conj(np.conj(r[k]) @ A_list[k])
            D[:, k] = d
            Ad = A_list[k] @ d
            AD.append(Ad)
            dd = float(np.vdot(d, d).real)
            if dd == 0:
                continue
            if cfg.lipschitz_override is not None:
                alpha[k] = -1.0 / cfg.lipschitz_override
            else:
                AdAd = float(np.vdot(Ad, Ad).real)
                if AdAd == 0:
                    raise NullSpaceError(f"group {k}: gradient lies in the null space of A")
                alpha[k] = -dd / AdAd
        if not np.all(alpha):
            if not np.any(alpha) and (gamma == 0 or not np.any(X)):
                hist.stopped = "stationary"
                break
            # a group already at its least-squares point still needs a metric weight
            if safe is None:
                safe = np.array([-1.0 / _lipschitz(A) if np.any(A) else -1.0 for A in A_list])
            alpha = np.where(alpha != 0, alpha, safe)

        accepted = None
        attempts = [2.0**-h * alpha for h in range(cfg.max_halvings + 1)]
        for h, steps in enumerate(attempts + [None]):
            if steps is None:
                if safe is None:
                    safe = np.array([-1.0 / _lipschitz(A) if np.any(A) else -1.0 for A in A_list])
                steps = np.maximum(safe, alpha)
            V = X + D * steps
            tau = gamma * np.abs(steps)
            Xn = prox_mixed_norm(V, tau, p) if gamma > 0 else V
            delta = Xn - X
            # objective change evaluated from the increment so it stays exact below rounding level
            A_delta = [A_list[k] @ delta[:, k] for k in range(K)]
            dobj = sum(float(np.vdot(r[k], A_delta[k]).real) + 0.5 * float(np.vdot(A_delta[k], A_delta[k]).real)
                       for k in range(K))
            if gamma > 0:
                dobj += gamma * _omega_change(X, Xn, delta, p)
            rn = [r[k] + A_delta[k] for k in range(K)]
            phin = fidelities(rn)
            om = mixed_norm(Xn, p)
            objn = float(phin.sum() + gamma * om)
            if not (math.isfinite(objn) and math.isfinite(dobj)):
                raise DivergenceError(f"non-finite objective at iteration {it}")
            if dobj <= 0:
                accepted = (Xn, rn, phin, om, objn, steps, h, dobj)
                break
        if accepted is None:
            hist.stopped = "no-descent"
            break

        Xn, rn, phin, om, objn, steps, h, dobj = accepted
        if it % _RESIDUAL_REFRESH == 0:
            rn = [A_list[k] @ Xn[:, k] - y_list[k] for k in range(K)]
            phin = fidelities(rn)
            objn = float(phin.sum() + gamma * om)
        hist.records.append(IterationRecord(it, float(phin.sum()), om, objn, steps.copy(),
                                            np.sqrt(2.0 * phin), h))
        change = abs(dobj) / max(abs(obj), 1e-300)
        X, r, phi_k, obj = Xn, rn, phin, objn
        if change < cfg.tol:
            hist.stopped = "tol"
            break
    else:
        hist.stopped = "max_iters"
    return X, hist
