"""Bit-exact volume and measurement files plus run manifests.

Volume files: a 64-byte ASCII header ``GRVOL1 <nx> <ny> <nz> <K> c64``
(space padded, newline terminated), then little-endian complex64 values,
x index fastest within a voxel volume and one full volume per group.

Measurement files: one ASCII header line
``GRMEAS1 K=<K> rows=<r1,...,rK> digest=<sha256> order=group,channel,receiver``
followed by the little-endian complex64 stacks y_1, ..., y_K.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__

VOLUME_MAGIC = "GRVOL1"
MEAS_MAGIC = "GRMEAS1"
HEADER_BYTES = 64
_C64 = np.dtype("<c8")


class FormatError(ValueError):
    pass


def encode_volume(X, shape) -> bytes:
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    nx, ny, nz = (int(s) for s in shape)
    if X.shape[0] != nx * ny * nz:
        raise ValueError(f"volume has {X.shape[0]} voxels, grid has {nx * ny * nz}")
    header = f"{VOLUME_MAGIC} {nx} {ny} {nz} {X.shape[1]} c64"
    header = header.ljust(HEADER_BYTES - 1) + "\n"
    return header.encode("ascii") + np.ascontiguousarray(X.T).astype(_C64).tobytes()


def decode_volume(blob: bytes) -> tuple[np.ndarray, tuple[int, int, int]]:
    head = blob[:HEADER_BYTES].decode("ascii", errors="replace").split()
    if len(head) != 6 or head[0] != VOLUME_MAGIC or head[5] != "c64":
        raise FormatError("not a GRVOL1 volume file")
    try:
        nx, ny, nz, K = (int(v) for v in head[1:5])
    except ValueError:
        raise FormatError("malformed GRVOL1 header") from None
    payload = blob[HEADER_BYTES:]
    if len(payload) % _C64.itemsize:
        raise FormatError("payload is not a whole number of complex64 values")
    data = np.frombuffer(payload, dtype=_C64)
    if data.size != nx * ny * nz * K:
        raise FormatError(f"payload has {data.size} values, header promises {nx * ny * nz * K}")
    return data.reshape(K, nx * ny * nz).T.astype(complex), (nx, ny, nz)


def write_volume(path, X, shape) -> None:
    Path(path).write_bytes(encode_volume(X, shape))


def read_volume(path) -> tuple[np.ndarray, tuple[int, int, int]]:
    return decode_volume(Path(path).read_bytes())


def encode_measurements(ys, digest: str = "") -> bytes:
    rows = ",".join(str(len(y)) for y in ys)
    header = f"{MEAS_MAGIC} K={len(ys)} rows={rows} digest={digest or '-'} order=group,channel,receiver\n"
    payload = b"".join(np.asarray(y).astype(_C64).tobytes() for y in ys)
    return header.encode("ascii") + payload


def decode_measurements(blob: bytes) -> tuple[list[np.ndarray], str]:
    nl = blob.find(b"\n")
    if nl < 0:
        raise FormatError("missing measurement header")
    fields = blob[:nl].decode("ascii").split()
    if not fields or fields[0] != MEAS_MAGIC:
        raise FormatError("not a GRMEAS1 measurement file")
    try:
        kv = dict(f.split("=", 1) for f in fields[1:])
        rows = [int(r) for r in kv["rows"].split(",")] if kv.get("rows") else []
        K = int(kv["K"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed measurement header: {exc}") from None
    if len(rows) != K:
        raise FormatError("row count list does not match K")
    payload = blob[nl + 1:]
    if len(payload) % _C64.itemsize:
        raise FormatError("payload is not a whole number of complex64 values")
    data = np.frombuffer(payload, dtype=_C64)
    if data.size != sum(rows):
        raise FormatError(f"payload has {data.size} values, header promises {sum(rows)}")
    ys, off = [], 0
    for r in rows:
        ys.append(data[off:off + r].astype(complex))
        off += r
    digest = kv.get("digest", "-")
    return ys, "" if digest == "-" else digest


def write_measurements(path, ys, digest: str = "") -> None:
    Path(path).write_bytes(encode_measurements(ys, digest))


def read_measurements(path) -> tuple[list[np.ndarray], str]:
    return decode_measurements(Path(path).read_bytes())


def config_digest(doc: dict) -> str:
    """SHA-256 of the canonical JSON form of a config document."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(path, **fields) -> dict:
    manifest = {"tool_version": __version__, **fields}
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
