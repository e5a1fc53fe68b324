"""Discrete Littlewood-Paley blocks and Besov-type norms on the periodic grid.

The radial profiles are the usual pair: ``chi`` equals 1 on ``|xi| <= 3/4``
and vanishes for ``|xi| >= 4/3``; ``phi(xi) = chi(xi/2) - chi(xi)`` is then
supported in the annulus ``3/4 <= |xi| <= 8/3``. The transition uses the
``exp(-1/x)`` glue, so both are C-infinity.

The grid only resolves blocks up to ``j_max = floor(log2(n/3))``. Block
``j_max`` is taken as the remainder ``1 - chi(2^-j_max xi)`` so that the
blocks sum to one at every grid frequency, including the corner modes that
lie outside the last full annulus.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .fourier_field import (Grid, SpectralField, SCALAR, gradient, ifft, inner_coeffs,
                            lp_norm_physical)

CHI_INNER = 3.0 / 4.0
CHI_OUTER = 4.0 / 3.0


def _glue(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = _glue(t)
    b = _glue(1.0 - t)
    return a / (a + b)


def chi_profile(r):
    r = np.asarray(r, dtype=float)
    return 1.0 - smooth_step((r - CHI_INNER) / (CHI_OUTER - CHI_INNER))


def phi_profile(r):
    r = np.asarray(r, dtype=float)
    return chi_profile(r / 2.0) - chi_profile(r)


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = 2.0
    r: float = 1.0

    def __post_init__(self):
        if self.p < 1 or self.r < 1:
            raise ValueError(f"Besov exponents need p, r >= 1 (got p={self.p}, r={self.r})")


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Block multipliers sampled on one grid.

    ``blocks[j + 1]`` is the multiplier of block ``j`` for ``j = -1..j_max``;
    ``chi`` and ``phi`` alias the first block and the proper annular ones.
    """

    grid: Grid
    j_max: int
    blocks: tuple

    @property
    def chi(self) -> np.ndarray:
        return self.blocks[0]

    @property
    def phi(self) -> tuple:
        return self.blocks[1:]

    def multiplier(self, j: int):
        if j < -1 or j > self.j_max:
            return None
        return self.blocks[j + 1]

    def support(self, j: int) -> np.ndarray:
        """Boolean mask of the (closed) frequency support of block j."""
        r = np.sqrt(self.grid.k2)
        if j == -1:
            return r <= CHI_OUTER
        lo = CHI_INNER * 2.0 ** j
        if j == self.j_max:
            return r >= lo
        return (r >= lo) & (r <= 2 * CHI_OUTER * 2.0 ** j)


@functools.lru_cache(maxsize=8)
def build_partition(grid: Grid) -> DyadicPartition:
    j_max = int(np.floor(np.log2(grid.n / 3)))
    if j_max < 1:
        raise ValueError(f"n={grid.n} cannot host two dyadic shells")
    r = np.sqrt(grid.k2)
    blocks = [chi_profile(r)]
    for j in range(j_max):
        blocks.append(phi_profile(r / 2.0 ** j))
    blocks.append(1.0 - chi_profile(r / 2.0 ** j_max))
    total = np.sum(blocks, axis=0)
    blocks = [b / total for b in blocks]
    for b in blocks:
        b.setflags(write=False)
    return DyadicPartition(grid, j_max, tuple(blocks))


def block_project(f: SpectralField, j: int) -> SpectralField:
    """Delta_j f; blocks outside ``-1..j_max`` are identically zero."""
    m = build_partition(f.grid).multiplier(j)
    if m is None:
        return f._like(np.zeros_like(f.coeffs))
    return f._like(f.coeffs * m)


def low_pass(f: SpectralField, j: int) -> SpectralField:
    """S_j f = sum of the blocks below j."""
    part = build_partition(f.grid)
    m = sum((part.multiplier(i) for i in range(-1, min(j, part.j_max + 1))),
            np.zeros(f.grid.shape))
    return f._like(f.coeffs * m)


def block_lp_norm(coeffs: np.ndarray, grid: Grid, rank: str, p: float) -> float:
    if p == 2:
        return float(np.sqrt(max(inner_coeffs(coeffs, coeffs, grid, rank), 0.0)))
    return lp_norm_physical(ifft(coeffs, grid), grid, rank, p)


def block_norms(f: SpectralField, p: float = 2.0, homogeneous: bool = False):
    """``[(j, ||Delta_j f||_Lp)]`` over all representable blocks."""
    part = build_partition(f.grid)
    first = 0 if homogeneous else -1
    return [(j, block_lp_norm(f.coeffs * part.multiplier(j), f.grid, f.rank, p))
            for j in range(first, part.j_max + 1)]


def besov_norm(f: SpectralField, bp: BesovParams, homogeneous: bool = False) -> float:
    """Grid truncation of ``|| (2^{js} ||Delta_j f||_Lp)_j ||_{l^r}``.

    ``homogeneous=True`` drops the ``j = -1`` block; that is the only
    homogeneous surrogate available on the torus. L^inf is taken on the
    collocation points, so it is a lower bound of the true sup.
    """
    terms = np.array([2.0 ** (j * bp.s) * v for j, v in block_norms(f, bp.p, homogeneous)])
    if np.isinf(bp.r):
        return float(terms.max())
    return float(np.sum(terms ** bp.r) ** (1.0 / bp.r))


def besov_terms(f: SpectralField, bp: BesovParams, homogeneous: bool = False):
    return [(j, 2.0 ** (j * bp.s) * v) for j, v in block_norms(f, bp.p, homogeneous)]


def bernstein_band(j: int, dim: int) -> tuple:
    return CHI_INNER * 2.0 ** j, 2 * CHI_OUTER * np.sqrt(dim) * 2.0 ** j


def bernstein_ratio(f: SpectralField, j: int, p: float = 2.0, tol: float = 1e-12) -> float:
    """``||grad f||_Lp / ||f||_Lp`` for a scalar field localized in block j."""
    if f.rank != SCALAR:
        raise ValueError("bernstein_ratio expects a scalar field")
    part = build_partition(f.grid)
    if not -1 <= j <= part.j_max:
        raise ValueError(f"block {j} not representable (j_max={part.j_max})")
    outside = np.abs(f.coeffs[0][~part.support(j)])
    scale = np.abs(f.coeffs).max()
    if scale == 0 or (outside.size and outside.max() > tol * scale):
        raise ValueError(f"field is not localized in block {j}")
    g = gradient(f)
    return block_lp_norm(g.coeffs, f.grid, g.rank, p) / block_lp_norm(f.coeffs, f.grid, f.rank, p)
