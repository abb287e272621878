"""Free-space Green's functions, dipole illumination and measurement matrices.

All quantities are SI. Points are arrays whose last axis has length 3 and
the functions broadcast over any leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

C0 = 299792458.0
MU0 = 4e-7 * np.pi

_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


class SingularityError(ValueError):
    """Raised when a Green's function is evaluated at coincident points."""


class SensorPlacementError(ValueError):
    """Raised when a transmitter or receiver sits too close to the voxel grid."""


@dataclass(frozen=True)
class Wavenumber:
    k0: float
    omega: float

    @classmethod
    def from_frequency(cls, frequency: float) -> "Wavenumber":
        omega = 2.0 * np.pi * float(frequency)
        return cls(k0=omega / C0, omega=omega)

    @classmethod
    def from_k0(cls, k0: float) -> "Wavenumber":
        return cls(k0=float(k0), omega=float(k0) * C0)


def _k0(k) -> float:
    return k.k0 if isinstance(k, Wavenumber) else float(k)


def axis_vector(component) -> np.ndarray:
    """Unit vector for an axis name ('x', 'y', 'z') or an explicit 3-vector."""
    if isinstance(component, str):
        try:
            return np.array(_AXES[component.lower()])
        except KeyError:
            raise ValueError(f"unknown axis {component!r}") from None
    v = np.asarray(component, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("zero-length polarization/component vector")
    return v / n


def _separation(r, r_src):
    d = np.asarray(r, dtype=float) - np.asarray(r_src, dtype=float)
    R = np.linalg.norm(d, axis=-1)
    if np.any(R == 0):
        raise SingularityError("Green's function evaluated at coincident points")
    return d, R


def scalar_green(r, r_src, k0) -> complex | np.ndarray:
    """exp(i k0 R) / (4 pi R) with R = |r - r_src|."""
    _, R = _separation(r, r_src)
    return np.exp(1j * _k0(k0) * R) / (4.0 * np.pi * R)


def dyadic_green(r, r_src, k0) -> np.ndarray:
    """Free-space electric dyadic Green's function, shape (..., 3, 3).

    Uses the closed form ``g [(3 RR - I)(1/(kR)^2 - i/(kR)) + (I - RR)]``
    where ``RR`` is the outer product of the unit separation vector.
    """
    k = _k0(k0)
    if k <= 0:
        raise ValueError("dyadic Green's function requires k0 > 0")
    d, R = _separation(r, r_src)
    u = d / R[..., None]
    uu = u[..., :, None] * u[..., None, :]
    eye = np.eye(3)
    kr = k * R
    near = (1.0 / kr**2 - 1j / kr)[..., None, None]
    g = (np.exp(1j * kr) / (4.0 * np.pi * R))[..., None, None]
    return g * ((3.0 * uu - eye) * near + (eye - uu))


def projected_green(e_rx, r_rx, r_src, k0, mode: str = "dyadic") -> np.ndarray:
    """Row vectors ``e_s . G(r_s, r_n)`` for all receiver/source pairs.

    Returns shape (S, N, 3). Avoids materialising the full (S, N, 3, 3) dyad.
    """
    e = np.broadcast_to(np.asarray(e_rx, dtype=float), np.shape(r_rx))
    d, R = _separation(np.asarray(r_rx)[:, None, :], np.asarray(r_src)[None, :, :])
    k = _k0(k0)
    g = np.exp(1j * k * R) / (4.0 * np.pi * R)
    e = e[:, None, :]
    if mode == "scalar":
        return g[..., None] * e
    if mode != "dyadic":
        raise ValueError(f"unknown Green's mode {mode!r}")
    if k <= 0:
        raise ValueError("dyadic Green's function requires k0 > 0")
    u = d / R[..., None]
    eu = np.sum(e * u, axis=-1, keepdims=True)
    kr = (k * R)[..., None]
    near = 1.0 / kr**2 - 1j / kr
    return g[..., None] * ((3.0 * eu * u - e) * near + (e - eu * u))


def incident_field(r, tx_position, tx_polarization, k0, mode: str = "dyadic") -> np.ndarray:
    """Field of a unit-moment electric dipole: ``i omega mu0 G(r, r_t) . p``."""
    wk = k0 if isinstance(k0, Wavenumber) else Wavenumber.from_k0(k0)
    p = axis_vector(tx_polarization)
    r = np.asarray(r, dtype=float)
    if mode == "scalar":
        g = scalar_green(r, tx_position, wk)
        return 1j * wk.omega * MU0 * np.asarray(g)[..., None] * p
    G = dyadic_green(r, tx_position, wk)
    return 1j * wk.omega * MU0 * (G @ p)


@dataclass(frozen=True)
class Transmitter:
    position: np.ndarray
    polarization: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))


@dataclass
class MeasurementMatrix:
    """S x N matrix for one (frequency, transmitter) channel."""

    values: np.ndarray
    frequency_index: int = -1
    transmitter_index: int = -1

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _as_matrix(A) -> np.ndarray:
    return A.values if isinstance(A, MeasurementMatrix) else np.asarray(A)


def check_sensor_clearance(points, centers, spacing) -> None:
    """Every sensor must be at least one voxel diagonal from every voxel centre."""
    diag = float(np.linalg.norm(spacing))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    centers = np.asarray(centers, dtype=float)
    for i, p in enumerate(points):
        dmin = np.min(np.linalg.norm(centers - p, axis=-1))
        if dmin < diag * (1.0 - 1e-12):
            raise SensorPlacementError(
                f"sensor {i} at {p.tolist()} is {dmin:.4g} m from the grid "
                f"(minimum clearance is one voxel diagonal, {diag:.4g} m)"
            )


def point_responses(rx_positions, rx_components, tx: Transmitter, k0, points,
                    volume: float, mode: str = "dyadic") -> np.ndarray:
    """Received field per unit reflectivity for scatterers at ``points``.

    Entry (s, n) is ``i omega mu0 dV [e_s . G(r_s, r_n) . E_in(r_n)]``.
    """
    wk = k0 if isinstance(k0, Wavenumber) else Wavenumber.from_k0(k0)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=float))
    e_rx = axis_vector(rx_components)
    e_in = incident_field(points, tx.position, tx.polarization, wk, mode=mode)
    pg = projected_green(e_rx, rx, points, wk, mode=mode)
    return (1j * wk.omega * MU0 * volume) * np.einsum("snc,nc->sn", pg, e_in)


def assemble_measurement_matrix(grid, rx_positions, tx: Transmitter, k0, rx_component="z",
                                mode: str = "dyadic", frequency_index: int = -1,
                                transmitter_index: int = -1) -> MeasurementMatrix:
    """Measurement matrix of one channel over the voxels of ``grid``.

    Parameters
    ----------
    grid : ImagingGrid
        Voxel discretisation; midpoint quadrature with volume ``grid.voxel_volume``.
    rx_positions : (S, 3) array
        Receiver locations.
    tx : Transmitter
        Elementary dipole source.
    k0 : float or Wavenumber
        Operating wavenumber.
    rx_component : str or (3,) or (S, 3) array
        Field component recorded by each receiver.
    mode : {'dyadic', 'scalar'}
        'scalar' replaces the dyad by ``g I`` for speed.
    """
    centers = grid.centers
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=float))
    check_sensor_clearance(rx, centers, grid.spacing)
    check_sensor_clearance(tx.position, centers, grid.spacing)
    values = point_responses(rx, rx_component, tx, k0, centers, grid.voxel_volume, mode=mode)
    return MeasurementMatrix(values, frequency_index, transmitter_index)


def apply_forward(A, x) -> np.ndarray:
    M = _as_matrix(A)
    x = np.asarray(x)
    if x.shape[0] != M.shape[1]:
        raise ValueError(f"forward: x has {x.shape[0]} entries, matrix has {M.shape[1]} columns")
    return M @ x


def apply_adjoint(A, y) -> np.ndarray:
    M = _as_matrix(A)
    y = np.asarray(y)
    if y.shape[0] != M.shape[0]:
        raise ValueError(f"adjoint: y has {y.shape[0]} entries, matrix has {M.shape[0]} rows")
    return np.conj(np.conj(y) @ M)


def adjoint_mismatch(A, x, y) -> float:
    """Relative dot-product-test error |<Ax, y> - <x, A*y>| / (|Ax| |y|)."""
    Ax = apply_forward(A, x)
    lhs = np.vdot(y, Ax)
    rhs = np.vdot(apply_adjoint(A, y), x)
    return float(abs(lhs - rhs) / (np.linalg.norm(Ax) * np.linalg.norm(y)))
