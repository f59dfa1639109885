"""
On-disk formats.

KOLM snapshot (all little-endian):

    offset  size  field
    0       4     magic b"KOLM"
    4       4     version, uint32 (= 1)
    8       1     kind, uint8 (0 torus, 1 channel)
    9       8     delta, float64
    17      4     nx, uint32
    21      4     ny, uint32
    25      16·nx·ny  coefficients, complex128, row-major (x index slowest),
                  numpy FFT order in x (and in y on the torus), sine index
                  l-1 in y on the channel.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .spectral import DomainSpec, SpectralField, hermitian_defect

MAGIC = b"KOLM"
VERSION = 1
_HEADER = struct.Struct("<4sIBdII")
_KINDS = {"torus": 0, "channel": 1}


class SnapshotError(ValueError):
    pass


def encode_snapshot(f: SpectralField) -> bytes:
    d = f.domain
    head = _HEADER.pack(MAGIC, VERSION, _KINDS[d.kind], float(d.delta), d.nx, d.ny)
    return head + np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes()


def decode_snapshot(data: bytes) -> SpectralField:
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated header")
    magic, version, kind, delta, nx, ny = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported version {version}")
    names = {v: k for k, v in _KINDS.items()}
    if kind not in names:
        raise SnapshotError(f"unknown domain kind byte {kind}")
    expected = _HEADER.size + 16 * nx * ny
    if len(data) != expected:
        raise SnapshotError(f"payload is {len(data)} bytes, expected {expected}")
    d = DomainSpec(names[kind], delta, nx, ny)
    c = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(nx, ny).astype(complex)
    f = SpectralField(d, c, False)
    return SpectralField(d, c, _looks_real(f))


def _looks_real(f: SpectralField) -> bool:
    c = f.coeffs
    scale = max(np.abs(c).max(), 1e-300)
    if f.domain.kind == "torus":
        return hermitian_defect(f) <= 1e-13 * scale
    # channel: real iff conjugate-symmetric in x only
    refl = np.roll(np.flip(c, axis=0), 1, axis=0)
    return float(np.abs(c - np.conj(refl)).max()) <= 1e-13 * scale


def write_snapshot(path, f: SpectralField) -> Path:
    path = Path(path)
    path.write_bytes(encode_snapshot(f))
    return path


def read_snapshot(path) -> SpectralField:
    return decode_snapshot(Path(path).read_bytes())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps_json(obj) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        r = list(csv.reader(fh))
    return r[0], r[1:]
