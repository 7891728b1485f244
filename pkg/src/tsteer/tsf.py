"""Reader and writer for the TSF1 binary field dump.

Layout: magic ``b"TSF1"``, uint32 grid size, uint32 component count (1 or 2),
float64 time stamp, then each component's ``n*n`` samples as row-major
little-endian float64.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import GridSpec, ScalarField, VectorField2

MAGIC = b"TSF1"
_HEADER = struct.Struct("<4sIId")


def write_tsf(path, field: ScalarField | VectorField2, time: float = 0.0) -> Path:
    if isinstance(field, VectorField2):
        comps = [field.u1.values, field.u2.values]
    else:
        comps = [field.values]
    n = comps[0].shape[0]
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, len(comps), float(time)))
        for comp in comps:
            fh.write(np.ascontiguousarray(comp, dtype="<f8").tobytes())
    return path


def read_tsf(path) -> tuple[ScalarField | VectorField2, float]:
    """Return the stored field and its time stamp."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("file too short for a TSF1 header")
    magic, n, ncomp, time = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if ncomp not in (1, 2):
        raise ValueError(f"component count must be 1 or 2, got {ncomp}")
    expected = _HEADER.size + ncomp * n * n * 8
    if len(raw) != expected:
        raise ValueError(f"expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(ncomp, n, n)
    grid = GridSpec(n)
    fields = [ScalarField(grid, data[c].astype(float)) for c in range(ncomp)]
    if ncomp == 1:
        return fields[0], time
    return VectorField2(fields[0], fields[1]), time
