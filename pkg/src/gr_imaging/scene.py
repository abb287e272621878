"""Scene configuration, channel grouping and synthetic measurement generation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import jsonschema
import numpy as np

from .em_core import (MU0, SensorPlacementError, Transmitter, Wavenumber, assemble_measurement_matrix,
                      axis_vector, check_sensor_clearance, point_responses, projected_green,
                      incident_field)
from .tiling import size_for_count, tile_starts


class ConfigError(ValueError):
    """Configuration problem; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class SingularCouplingError(np.linalg.LinAlgError):
    def __init__(self, frequency: float, condition: float):
        self.frequency = frequency
        self.condition = condition
        super().__init__(f"Foldy-Lax system singular at {frequency:.6g} Hz "
                         f"(condition estimate {condition:.3e})")


def _vec3(v) -> tuple[float, float, float]:
    return tuple(float(c) for c in v)


@dataclass(frozen=True)
class ImagingGrid:
    center: tuple[float, float, float]
    extents: tuple[float, float, float]
    divisions: tuple[int, int, int]

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.divisions)

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.divisions
        return nx * ny * nz

    @property
    def spacing(self) -> np.ndarray:
        return np.asarray(self.extents, dtype=float) / np.asarray(self.divisions)

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo = np.asarray(self.center) - np.asarray(self.extents) / 2.0
        h = self.spacing
        return tuple(lo[i] + h[i] * (np.arange(self.divisions[i]) + 0.5) for i in range(3))

    @cached_property
    def centers(self) -> np.ndarray:
        """(N, 3) voxel centres, x index fastest."""
        ax, ay, az = self.axes
        Z, Y, X = np.meshgrid(az, ay, ax, indexing="ij")
        c = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
        c.setflags(write=False)
        return c

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.center) - np.asarray(self.extents) / 2.0
        hi = lo + np.asarray(self.extents)
        return np.all((p >= lo - 1e-12) & (p <= hi + 1e-12), axis=-1)

    def nearest_voxel(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.center) - np.asarray(self.extents) / 2.0
        idx = np.floor((p - lo) / self.spacing).astype(int)
        idx = np.clip(idx, 0, np.asarray(self.divisions) - 1)
        nx, ny, _ = self.divisions
        return idx[:, 0] + nx * (idx[:, 1] + ny * idx[:, 2])

    def to_volume(self, v) -> np.ndarray:
        """Reshape an N-vector into an (nx, ny, nz) array."""
        return np.asarray(v).reshape(self.divisions, order="F")

    def from_volume(self, vol) -> np.ndarray:
        return np.asarray(vol).reshape(-1, order="F")


@dataclass(frozen=True)
class SensorArray:
    tx_positions: tuple[tuple[float, float, float], ...]
    tx_polarizations: tuple[tuple[float, float, float], ...]
    rx_positions: tuple[tuple[float, float, float], ...]
    rx_components: tuple[tuple[float, float, float], ...]

    @property
    def n_tx(self) -> int:
        return len(self.tx_positions)

    @property
    def n_rx(self) -> int:
        return len(self.rx_positions)

    def transmitter(self, t: int) -> Transmitter:
        return Transmitter(np.asarray(self.tx_positions[t]), np.asarray(self.tx_polarizations[t]))

    @property
    def rx(self) -> np.ndarray:
        return np.asarray(self.rx_positions, dtype=float)

    @property
    def rx_e(self) -> np.ndarray:
        return np.asarray(self.rx_components, dtype=float)


@dataclass(frozen=True)
class FrequencyPlan:
    f_min: float
    f_max: float
    step: float

    @property
    def count(self) -> int:
        return int(math.floor((self.f_max - self.f_min) / self.step + 1e-9)) + 1

    @property
    def frequencies(self) -> np.ndarray:
        return self.f_min + self.step * np.arange(self.count)


Channel = tuple[int, int]


@dataclass(frozen=True)
class GroupingScheme:
    groups: tuple[tuple[Channel, ...], ...]
    mode: str
    params: dict = field(default_factory=dict, compare=True, hash=False)

    @property
    def K(self) -> int:
        return len(self.groups)


@dataclass(frozen=True)
class SceneSpec:
    positions: tuple[tuple[float, float, float], ...]
    amplitudes: tuple[complex, ...]
    reference: tuple[float, ...]
    reference_mode: str = "occupancy"

    @property
    def M(self) -> int:
        return len(self.positions)

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float).reshape(-1, 3)

    @property
    def strengths(self) -> np.ndarray:
        return np.asarray(self.amplitudes, dtype=complex)

    @property
    def reference_volume(self) -> np.ndarray:
        return np.asarray(self.reference, dtype=float)

    def with_amplitudes(self, amplitudes) -> "SceneSpec":
        return replace(self, amplitudes=tuple(complex(a) for a in amplitudes))


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class SceneConfig:
    grid: ImagingGrid
    array: SensorArray
    plan: FrequencyPlan
    grouping: GroupingScheme
    scene: SceneSpec
    noise: NoiseSpec = NoiseSpec()

    def __iter__(self):
        # unpacks as (grid, array, plan, grouping, scene)
        return iter((self.grid, self.array, self.plan, self.grouping, self.scene))


# ---------------------------------------------------------------------------
# grouping

GROUPING_MODES = ("per-transmitter", "single-group", "per-channel", "sub-band", "custom")


def build_groups(plan: FrequencyPlan, array: SensorArray, mode: str = "per-transmitter",
                 params: dict | None = None) -> GroupingScheme:
    """Partition the (frequency, transmitter) channels into K groups.

    ``sub-band`` splits the band into ``params['subbands']`` windows with
    fractional ``params['overlap']`` (default 0.5) and crosses them with the
    sub-apertures in ``params['subapertures']`` (lists of transmitter indices,
    default one per transmitter). Overlapping windows duplicate channels.
    ``custom`` takes explicit ``params['groups']`` lists of [f, t] pairs.
    """
    params = dict(params or {})
    F, T = plan.count, array.n_tx
    if mode == "per-transmitter":
        groups = [tuple((f, t) for f in range(F)) for t in range(T)]
    elif mode == "single-group":
        groups = [tuple((f, t) for t in range(T) for f in range(F))]
    elif mode == "per-channel":
        groups = [((f, t),) for t in range(T) for f in range(F)]
    elif mode == "sub-band":
        nb = int(params.get("subbands", 1))
        overlap = float(params.get("overlap", 0.5))
        apertures = params.get("subapertures") or [[t] for t in range(T)]
        width = size_for_count(F, nb, overlap)
        bands = [range(s, s + width) for s in tile_starts(F, width, overlap)]
        groups = [tuple((f, int(t)) for t in ap for f in band) for ap in apertures for band in bands]
    elif mode == "custom":
        groups = [tuple((int(f), int(t)) for f, t in g) for g in params.get("groups", [])]
    else:
        raise ConfigError("grouping.mode", f"unknown grouping mode {mode!r}")

    if not groups:
        raise ConfigError("grouping", "no groups defined")
    for k, g in enumerate(groups):
        if not g:
            raise ConfigError(f"grouping.groups[{k}]", "empty group")
        for f, t in g:
            if not (0 <= f < F and 0 <= t < T):
                raise ConfigError(f"grouping.groups[{k}]", f"channel ({f}, {t}) out of range")
    covered = {c for g in groups for c in g}
    missing = [(f, t) for t in range(T) for f in range(F) if (f, t) not in covered]
    if missing:
        raise ConfigError("grouping", f"{len(missing)} channels not assigned to any group, "
                                      f"e.g. {missing[0]}")
    return GroupingScheme(tuple(groups), mode, params)


# ---------------------------------------------------------------------------
# grouped systems


@dataclass
class GroupedMeasurements:
    """Per-group stacked data ``y[k]`` and matrices ``A[k]``."""

    y: list[np.ndarray]
    A: list[np.ndarray]
    channels: list[tuple[Channel, ...]] = field(default_factory=list)

    def __post_init__(self):
        # an empty A list marks a data-only set (e.g. freshly simulated data)
        if self.A and len(self.y) != len(self.A):
            raise ValueError("y and A must list the same number of groups")
        for k, (yk, Ak) in enumerate(zip(self.y, self.A)):
            if yk.shape[0] != Ak.shape[0]:
                raise ValueError(f"group {k}: {yk.shape[0]} data rows vs {Ak.shape[0]} matrix rows")

    @property
    def K(self) -> int:
        return len(self.y)

    @property
    def n_unknowns(self) -> int:
        return self.A[0].shape[1]

    def with_data(self, y: list[np.ndarray]) -> "GroupedMeasurements":
        return GroupedMeasurements(list(y), self.A, self.channels)

    def merged(self) -> "GroupedMeasurements":
        """Stack every group into one (the K = 1 Born-style system)."""
        return GroupedMeasurements([np.concatenate(self.y)], [np.vstack(self.A)],
                                   [tuple(c for g in self.channels for c in g)])


class Acquisition:
    """Grid + array + frequency plan + grouping, with cached channel matrices."""

    def __init__(self, grid: ImagingGrid, array: SensorArray, plan: FrequencyPlan,
                 grouping: GroupingScheme, mode: str = "dyadic"):
        self.grid = grid
        self.array = array
        self.plan = plan
        self.grouping = grouping
        self.mode = mode
        self._cache: dict[Channel, np.ndarray] = {}

    @classmethod
    def from_config(cls, cfg: SceneConfig, mode: str = "dyadic") -> "Acquisition":
        return cls(cfg.grid, cfg.array, cfg.plan, cfg.grouping, mode)

    def wavenumber(self, f: int) -> Wavenumber:
        return Wavenumber.from_frequency(self.plan.frequencies[f])

    def channel_matrix(self, f: int, t: int) -> np.ndarray:
        key = (f, t)
        if key not in self._cache:
            A = assemble_measurement_matrix(self.grid, self.array.rx, self.array.transmitter(t),
                                            self.wavenumber(f), self.array.rx_e, mode=self.mode,
                                            frequency_index=f, transmitter_index=t)
            self._cache[key] = A.values
        return self._cache[key]

    def group_matrices(self) -> list[np.ndarray]:
        return [np.vstack([self.channel_matrix(f, t) for f, t in g]) for g in self.grouping.groups]

    def group(self, y_by_channel: dict[Channel, np.ndarray], matrices: bool = True) -> GroupedMeasurements:
        ys = [np.concatenate([y_by_channel[c] for c in g]) for g in self.grouping.groups]
        return GroupedMeasurements(ys, self.group_matrices() if matrices else [], list(self.grouping.groups))

    def channels(self) -> list[Channel]:
        return [(f, t) for t in range(self.array.n_tx) for f in range(self.plan.count)]


def _check_scene(scene: SceneSpec, grid: ImagingGrid) -> None:
    if scene.M and not np.all(grid.contains(scene.points)):
        bad = int(np.argmin(grid.contains(scene.points)))
        raise ConfigError(f"scene.scatterers[{bad}]", "scatterer lies outside the grid box")


def born_forward(scene: SceneSpec, acq: Acquisition, matrices: bool = True) -> GroupedMeasurements:
    """Single-scattering data ``y = A x_true`` evaluated at the scatterer positions.

    With ``matrices=False`` only the data are returned (``A`` left empty).
    """
    _check_scene(scene, acq.grid)
    S = acq.array.n_rx
    a = scene.strengths
    out = {}
    for f, t in acq.channels():
        if scene.M == 0:
            out[(f, t)] = np.zeros(S, dtype=complex)
            continue
        cols = point_responses(acq.array.rx, acq.array.rx_e, acq.array.transmitter(t),
                               acq.wavenumber(f), scene.points, acq.grid.voxel_volume, mode=acq.mode)
        out[(f, t)] = cols @ a
    return acq.group(out, matrices)


def foldy_lax_forward(scene: SceneSpec, acq: Acquisition, max_condition: float = 1e10,
                      matrices: bool = True) -> GroupedMeasurements:
    """Exact multiple scattering among point scatterers.

    For each frequency the exciting fields solve
    ``E_m = E_in(r_m) + sum_{m' != m} i w mu0 dV a_m' g(r_m, r_m') E_m'``
    (scalar coupling, all three field components and all transmitters at
    once); receivers then pick up the dyadic radiation of the currents
    ``a_m E_m``.
    """
    _check_scene(scene, acq.grid)
    S, T = acq.array.n_rx, acq.array.n_tx
    M = scene.M
    a = scene.strengths
    dV = acq.grid.voxel_volume
    pts = scene.points
    out = {}
    for f, freq in enumerate(acq.plan.frequencies):
        wk = acq.wavenumber(f)
        if M == 0:
            for t in range(T):
                out[(f, t)] = np.zeros(S, dtype=complex)
            continue
        coupling = np.zeros((M, M), dtype=complex)
        if M > 1:
            off = ~np.eye(M, dtype=bool)
            diff = pts[:, None, :] - pts[None, :, :]
            R = np.linalg.norm(diff, axis=-1)
            if np.any(R[off] == 0):
                raise ConfigError("scene.scatterers", "coincident scatterers")
            g = np.where(off, np.exp(1j * wk.k0 * R) / (4.0 * np.pi * np.where(off, R, 1.0)), 0.0)
            coupling = (1j * wk.omega * MU0 * dV) * g * a[None, :]
        system = np.eye(M) - coupling
        cond = np.linalg.cond(system)
        if not np.isfinite(cond) or cond > max_condition:
            raise SingularCouplingError(freq, cond)
        e_in = np.stack([incident_field(pts, acq.array.tx_positions[t], acq.array.tx_polarizations[t],
                                        wk, mode=acq.mode) for t in range(T)], axis=0)   # T, M, 3
        rhs = e_in.transpose(1, 0, 2).reshape(M, 3 * T)
        exc = np.linalg.solve(system, rhs).reshape(M, T, 3).transpose(1, 0, 2)
        pg = projected_green(acq.array.rx_e, acq.array.rx, pts, wk, mode=acq.mode)  # S, M, 3
        for t in range(T):
            resp = (1j * wk.omega * MU0 * dV) * np.einsum("smc,mc->sm", pg, exc[t])
            out[(f, t)] = resp @ a
    return acq.group(out, matrices)


def add_noise(data: GroupedMeasurements, snr_db: float | None, seed: int) -> GroupedMeasurements:
    """Circular white Gaussian noise, rescaled per group to hit ``snr_db`` exactly."""
    if snr_db is None or (isinstance(snr_db, float) and math.isinf(snr_db) and snr_db > 0):
        return data.with_data([y.copy() for y in data.y])
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    rng = np.random.default_rng(seed)
    noisy = []
    for k, y in enumerate(data.y):
        py = np.linalg.norm(y)
        if py == 0:
            raise ValueError(f"group {k} has all-zero data; SNR is undefined")
        n = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        n *= py * 10.0 ** (-snr_db / 20.0) / np.linalg.norm(n)
        noisy.append(y + n)
    return data.with_data(noisy)


def rasterize(scene_points, grid: ImagingGrid) -> np.ndarray:
    ref = np.zeros(grid.n_voxels)
    if len(scene_points):
        ref[grid.nearest_voxel(scene_points)] = 1.0
    return ref


# ---------------------------------------------------------------------------
# config text

_NUM3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_COMPLEX = {"oneOf": [{"type": "number"},
                      {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_AXIS = {"oneOf": [{"enum": ["x", "y", "z"]}, _NUM3]}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["grid", "array", "frequencies"],
    "additionalProperties": False,
    "properties": {
        "grid": {
            "type": "object", "required": ["center", "extents", "divisions"], "additionalProperties": False,
            "properties": {"center": _NUM3,
                           "extents": {**_NUM3, "items": {"type": "number", "exclusiveMinimum": 0}},
                           "divisions": {**_NUM3, "items": {"type": "integer", "minimum": 1}}},
        },
        "array": {
            "type": "object", "required": ["transmitters", "receivers"], "additionalProperties": False,
            "properties": {
                "transmitters": {"type": "array", "minItems": 1, "items": {
                    "oneOf": [_NUM3, {"type": "object", "required": ["position"], "additionalProperties": False,
                                      "properties": {"position": _NUM3, "polarization": _AXIS}}]}},
                "receivers": {"oneOf": [
                    {"type": "array", "minItems": 1, "items": {
                        "oneOf": [_NUM3, {"type": "object", "required": ["position"], "additionalProperties": False,
                                          "properties": {"position": _NUM3, "component": _AXIS}}]}},
                    {"type": "object", "required": ["uniform"], "additionalProperties": False,
                     "properties": {"uniform": {
                         "type": "object", "required": ["center", "counts", "spacing"], "additionalProperties": False,
                         "properties": {"center": _NUM3,
                                        "counts": {**_NUM3, "items": {"type": "integer", "minimum": 1}},
                                        "spacing": _NUM3}}}}]},
                "rx_component": _AXIS,
            },
        },
        "frequencies": {
            "type": "object", "required": ["f_min", "f_max", "step"], "additionalProperties": False,
            "properties": {"f_min": {"type": "number", "exclusiveMinimum": 0},
                           "f_max": {"type": "number", "exclusiveMinimum": 0},
                           "step": {"type": "number", "exclusiveMinimum": 0}},
        },
        "grouping": {
            "type": "object", "additionalProperties": False,
            "properties": {"mode": {"enum": list(GROUPING_MODES)}, "params": {"type": "object"}},
        },
        "scene": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "scatterers": {"type": "array", "items": {
                    "type": "object", "required": ["position", "amplitude"], "additionalProperties": False,
                    "properties": {"position": _NUM3, "amplitude": _COMPLEX}}},
                "reference": {"oneOf": [{"enum": ["occupancy"]},
                                        {"type": "array", "items": {"type": "number", "minimum": 0}}]},
            },
        },
        "noise": {
            "type": "object", "additionalProperties": False,
            "properties": {"snr_db": {"oneOf": [{"type": "number"}, {"type": "null"}, {"enum": ["inf"]}]},
                           "seed": {"type": "integer"}},
        },
    },
}


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _uniform_receivers(spec) -> list[tuple[float, float, float]]:
    c = np.asarray(spec["center"], dtype=float)
    h = np.asarray(spec["spacing"], dtype=float)
    n = spec["counts"]
    offs = [h[i] * (np.arange(n[i]) - (n[i] - 1) / 2.0) for i in range(3)]
    pts = []
    for dz in offs[2]:
        for dy in offs[1]:
            for dx in offs[0]:
                pts.append(_vec3(c + np.array([dx, dy, dz])))
    return pts


def _complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)


def config_from_dict(doc: dict) -> SceneConfig:
    """Validate a parsed config document and build the configuration objects."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(_path(e.absolute_path) or "<root>", e.message)

    g = doc["grid"]
    grid = ImagingGrid(_vec3(g["center"]), _vec3(g["extents"]), tuple(int(d) for d in g["divisions"]))

    arr = doc["array"]
    default_pol = (0.0, 0.0, 1.0)
    txp, txe = [], []
    for item in arr["transmitters"]:
        if isinstance(item, dict):
            txp.append(_vec3(item["position"]))
            txe.append(_vec3(axis_vector(item.get("polarization", "z"))))
        else:
            txp.append(_vec3(item))
            txe.append(default_pol)
    default_comp = _vec3(axis_vector(arr.get("rx_component", "z")))
    rxp, rxe = [], []
    if isinstance(arr["receivers"], dict):
        rxp = _uniform_receivers(arr["receivers"]["uniform"])
        rxe = [default_comp] * len(rxp)
    else:
        for item in arr["receivers"]:
            if isinstance(item, dict):
                rxp.append(_vec3(item["position"]))
                rxe.append(_vec3(axis_vector(item["component"])) if "component" in item else default_comp)
            else:
                rxp.append(_vec3(item))
                rxe.append(default_comp)
    array = SensorArray(tuple(txp), tuple(txe), tuple(rxp), tuple(rxe))

    fr = doc["frequencies"]
    if fr["f_max"] < fr["f_min"]:
        raise ConfigError("frequencies.f_max", "f_max must be >= f_min")
    plan = FrequencyPlan(float(fr["f_min"]), float(fr["f_max"]), float(fr["step"]))
    if plan.count < 1:
        raise ConfigError("frequencies", "empty frequency list")

    for name, pts in (("array.transmitters", txp), ("array.receivers", rxp)):
        for i, p in enumerate(pts):
            try:
                check_sensor_clearance(p, grid.centers, grid.spacing)
            except SensorPlacementError as exc:
                raise ConfigError(f"{name}[{i}]", str(exc)) from None

    gr = doc.get("grouping", {})
    grouping = build_groups(plan, array, gr.get("mode", "per-transmitter"), gr.get("params", {}))

    sc = doc.get("scene", {})
    items = sc.get("scatterers", [])
    pos = tuple(_vec3(s["position"]) for s in items)
    amps = tuple(_complex(s["amplitude"]) for s in items)
    for i, p in enumerate(pos):
        if not grid.contains(p)[0]:
            raise ConfigError(f"scene.scatterers[{i}].position", "scatterer lies outside the grid box")
    ref_spec = sc.get("reference", "occupancy")
    if ref_spec == "occupancy":
        ref = tuple(float(v) for v in rasterize(np.asarray(pos).reshape(-1, 3), grid))
        mode = "occupancy"
    else:
        if len(ref_spec) != grid.n_voxels:
            raise ConfigError("scene.reference", f"expected {grid.n_voxels} values, got {len(ref_spec)}")
        ref = tuple(float(v) for v in ref_spec)
        mode = "explicit"
    scene = SceneSpec(pos, amps, ref, mode)

    nz = doc.get("noise", {})
    snr = nz.get("snr_db")
    snr = None if snr in (None, "inf") else float(snr)
    noise = NoiseSpec(snr, int(nz.get("seed", 0)))
    return SceneConfig(grid, array, plan, grouping, scene, noise)


def load_scene(config_text: str) -> SceneConfig:
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return config_from_dict(doc)


def load_scene_file(path) -> SceneConfig:
    with open(path, encoding="utf-8") as fh:
        return load_scene(fh.read())


def config_to_dict(cfg: SceneConfig, include_noise: bool = True) -> dict:
    a = cfg.array
    doc = {
        "grid": {"center": list(cfg.grid.center), "extents": list(cfg.grid.extents),
                 "divisions": list(cfg.grid.divisions)},
        "array": {
            "transmitters": [{"position": list(p), "polarization": list(e)}
                             for p, e in zip(a.tx_positions, a.tx_polarizations)],
            "receivers": [{"position": list(p), "component": list(e)}
                          for p, e in zip(a.rx_positions, a.rx_components)],
        },
        "frequencies": {"f_min": cfg.plan.f_min, "f_max": cfg.plan.f_max, "step": cfg.plan.step},
        "grouping": {"mode": cfg.grouping.mode, "params": cfg.grouping.params},
        "scene": {
            "scatterers": [{"position": list(p), "amplitude": [c.real, c.imag]}
                           for p, c in zip(cfg.scene.positions, cfg.scene.amplitudes)],
            "reference": "occupancy" if cfg.scene.reference_mode == "occupancy" else list(cfg.scene.reference),
        },
    }
    if include_noise:
        doc["noise"] = {"snr_db": cfg.noise.snr_db, "seed": cfg.noise.seed}
    return doc


def dump_scene(cfg: SceneConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)
