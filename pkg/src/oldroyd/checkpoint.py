"""Binary checkpoints.

Layout (all little-endian)::

    offset  type         field
    0       4 bytes      magic b"OLDB"
    4       uint32       format version (1)
    8       uint32       dim
    12      uint32       n
    16      float64      t
    24      6 x float64  k, b, nu, eta, mu, alpha
    72      float64      accumulated dissipation
    80      complex128   u_hat, shape (dim, n, ..., n), C order
    ...     complex128   tau_hat, shape (dim(dim+1)/2, n, ..., n), C order

The file size is fully determined by the header, so truncation is detected
before any array is read.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .fourier_field import Grid, SpectralField, VECTOR, SYM_TENSOR
from .integrator import SimState
from .oldroyd_rhs import ModelParams

MAGIC = b"OLDB"
VERSION = 1
HEADER = struct.Struct("<4sIIId6dd")
_DTYPE = np.dtype("<c16")


class CheckpointError(ValueError):
    pass


def write_checkpoint(state: SimState, params: ModelParams, path) -> None:
    g = state.grid
    header = HEADER.pack(MAGIC, VERSION, g.dim, g.n, float(state.t), *params.as_tuple(),
                         float(state.dissipated))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.u_hat.coeffs, dtype=_DTYPE).tobytes())
        fh.write(np.ascontiguousarray(state.tau_hat.coeffs, dtype=_DTYPE).tobytes())
    os.replace(tmp, path)


def read_checkpoint(path, expect_grid: Optional[Grid] = None):
    """Return ``(state, params)``; refuses bad magic, versions, sizes or a grid mismatch."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise CheckpointError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, dim, n, t, *rest = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    try:
        grid = Grid(dim, n)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    if expect_grid is not None and grid != expect_grid:
        raise CheckpointError(f"{path}: grid {grid} does not match the run grid {expect_grid}")
    params = ModelParams(*rest[:6])
    dissipated = rest[6]
    nu_ = grid.ncomp(VECTOR) * grid.modes
    nt = grid.ncomp(SYM_TENSOR) * grid.modes
    expected = HEADER.size + (nu_ + nt) * _DTYPE.itemsize
    if len(raw) != expected:
        raise CheckpointError(f"{path}: size {len(raw)} bytes, header implies {expected}")
    body = np.frombuffer(raw, dtype=_DTYPE, offset=HEADER.size)
    u = body[:nu_].reshape((grid.ncomp(VECTOR),) + grid.shape).astype(complex)
    tau = body[nu_:].reshape((grid.ncomp(SYM_TENSOR),) + grid.shape).astype(complex)
    state = SimState(t, SpectralField(grid, VECTOR, u), SpectralField(grid, SYM_TENSOR, tau),
                     dissipated)
    return state, params
