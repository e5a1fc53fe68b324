"""Periodic grids, spectral fields and the Fourier multipliers built on them.

Conventions used everywhere in the package:

* The box is ``[0, 2*pi)^dim`` so wavenumbers are integers in ``[-n/2, n/2)``.
* Forward transform is the unnormalized DFT, backward carries the ``1/n^dim``
  factor (``scipy.fft`` defaults).
* Vector gradients follow ``(grad u)_ij = d_j u_i``.
* Symmetric tensors are stored as their upper triangle ``(i, j), i <= j`` in
  row-major order: 2D ``(11, 12, 22)``, 3D ``(11, 12, 13, 22, 23, 33)``.
* Odd-order derivatives zero the Nyquist mode.
* Inverse-Laplacian type multipliers map the zero mode to zero.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

SCALAR = "scalar"
VECTOR = "vector"
SYM_TENSOR = "sym_tensor"
TENSOR = "tensor"
RANKS = (SCALAR, VECTOR, SYM_TENSOR, TENSOR)


def fft_workers() -> int:
    """Thread count for transforms, overridable with ``OLDROYD_THREADS``."""
    value = os.environ.get("OLDROYD_THREADS")
    if value:
        return max(1, int(value))
    return 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the ``2*pi`` box."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def length(self) -> float:
        return 2 * np.pi

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def axes(self) -> tuple:
        """Spatial axes of a component-stacked array (trailing ``dim`` axes)."""
        return tuple(range(-self.dim, 0))

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def modes(self) -> int:
        return self.n ** self.dim

    @property
    def cutoff(self) -> float:
        """Largest retained per-axis wavenumber under the 2/3 rule."""
        return self.n / 3

    def ncomp(self, rank: str) -> int:
        return {SCALAR: 1, VECTOR: self.dim, SYM_TENSOR: self.dim * (self.dim + 1) // 2,
                TENSOR: self.dim * self.dim}[rank]

    # cached spectral geometry; Grid is hashable so the caches key on it
    @property
    def xi(self) -> np.ndarray:
        return _wavevectors(self)[0]

    @property
    def xi_odd(self) -> np.ndarray:
        return _wavevectors(self)[1]

    @property
    def k2(self) -> np.ndarray:
        return _wavevectors(self)[2]

    @property
    def inv_k2(self) -> np.ndarray:
        return _wavevectors(self)[3]

    @property
    def inv_k2_odd(self) -> np.ndarray:
        return _wavevectors(self)[6]

    @property
    def dealias_mask(self) -> np.ndarray:
        return _wavevectors(self)[4]

    @property
    def kmax_dealiased(self) -> float:
        """Largest |xi| among modes kept by the 2/3 rule."""
        return _wavevectors(self)[5]

    def coords(self) -> np.ndarray:
        x = np.arange(self.n) * self.dx
        return np.array(np.meshgrid(*([x] * self.dim), indexing="ij"))


@functools.lru_cache(maxsize=16)
def _wavevectors(grid: Grid):
    k1 = sfft.fftfreq(grid.n, 1.0 / grid.n)
    k1_odd = k1.copy()
    k1_odd[grid.n // 2] = 0.0
    xi = np.array(np.meshgrid(*([k1] * grid.dim), indexing="ij"))
    xi_odd = np.array(np.meshgrid(*([k1_odd] * grid.dim), indexing="ij"))
    k2 = np.sum(xi ** 2, axis=0)
    inv_k2 = np.zeros_like(k2)
    np.divide(1.0, k2, out=inv_k2, where=k2 > 0)
    k2_odd = np.sum(xi_odd ** 2, axis=0)
    inv_k2_odd = np.zeros_like(k2)
    np.divide(1.0, k2_odd, out=inv_k2_odd, where=k2_odd > 0)
    mask = np.all(np.abs(xi) <= grid.cutoff, axis=0)
    kmax = float(np.sqrt(k2[mask].max()))
    for arr in (xi, xi_odd, k2, inv_k2, mask, inv_k2_odd):
        arr.setflags(write=False)
    return xi, xi_odd, k2, inv_k2, mask, kmax, inv_k2_odd


@functools.lru_cache(maxsize=4)
def sym_pairs(dim: int) -> tuple:
    return tuple((i, j) for i in range(dim) for j in range(i, dim))


@functools.lru_cache(maxsize=4)
def sym_index(dim: int) -> np.ndarray:
    """``idx[i, j]`` is the storage slot of tensor entry (i, j)."""
    idx = np.zeros((dim, dim), dtype=int)
    for c, (i, j) in enumerate(sym_pairs(dim)):
        idx[i, j] = idx[j, i] = c
    return idx


@functools.lru_cache(maxsize=4)
def sym_weights(dim: int) -> np.ndarray:
    """Frobenius weights: off-diagonal entries appear twice in ``tau:tau``."""
    return np.array([1.0 if i == j else 2.0 for i, j in sym_pairs(dim)])


def pack_sym(full: np.ndarray) -> np.ndarray:
    """(dim, dim, ...) symmetric array -> (dim(dim+1)/2, ...) storage."""
    dim = full.shape[0]
    return np.stack([full[i, j] for i, j in sym_pairs(dim)])


def unpack_sym(packed: np.ndarray, dim: int) -> np.ndarray:
    idx = sym_index(dim)
    return np.stack([np.stack([packed[idx[i, j]] for j in range(dim)]) for i in range(dim)])


@dataclass
class PhysicalField:
    grid: Grid
    rank: str
    values: np.ndarray

    def __post_init__(self):
        _check_shape(self.grid, self.rank, self.values)


@dataclass
class SpectralField:
    """Fourier coefficients of a real field, one leading axis per component."""

    grid: Grid
    rank: str
    coeffs: np.ndarray

    def __post_init__(self):
        _check_shape(self.grid, self.rank, self.coeffs)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.rank, self.coeffs.copy())

    def _like(self, coeffs):
        return SpectralField(self.grid, self.rank, coeffs)

    def __add__(self, other):
        _same_kind(self, other)
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_kind(self, other)
        return self._like(self.coeffs - other.coeffs)

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, scalar):
        return self._like(self.coeffs * scalar)

    __rmul__ = __mul__


def _check_shape(grid, rank, arr):
    if rank not in RANKS:
        raise ValueError(f"unknown rank {rank!r}")
    expected = (grid.ncomp(rank),) + grid.shape
    if arr.shape != expected:
        raise ValueError(f"{rank} field on {grid} needs shape {expected}, got {arr.shape}")


def _same_kind(a, b):
    if a.grid != b.grid or a.rank != b.rank:
        raise ValueError("fields live on different grids or ranks")


def zeros(grid: Grid, rank: str) -> SpectralField:
    return SpectralField(grid, rank, np.zeros((grid.ncomp(rank),) + grid.shape, dtype=complex))


# -- transforms -------------------------------------------------------------

def fft(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.fftn(values, axes=grid.axes, workers=fft_workers())


def ifft(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.ifftn(coeffs, axes=grid.axes, workers=fft_workers()).real


def transform_forward(f: PhysicalField) -> SpectralField:
    if not np.all(np.isfinite(f.values)):
        bad = int(np.size(f.values) - np.count_nonzero(np.isfinite(f.values)))
        raise ValueError(f"transform_forward: {bad} non-finite values in {f.rank} field")
    return SpectralField(f.grid, f.rank, fft(f.values, f.grid))


def transform_backward(f: SpectralField) -> PhysicalField:
    return PhysicalField(f.grid, f.rank, ifft(f.coeffs, f.grid))


# -- differential operators -------------------------------------------------

def gradient(f: SpectralField) -> SpectralField:
    """Gradient of a scalar (-> vector) or vector (-> full tensor, ``d_j u_i``)."""
    g = f.grid
    if f.rank == SCALAR:
        return SpectralField(g, VECTOR, 1j * g.xi_odd * f.coeffs[0])
    if f.rank == VECTOR:
        coeffs = 1j * g.xi_odd[None, :] * f.coeffs[:, None]
        return SpectralField(g, TENSOR, coeffs.reshape((g.dim * g.dim,) + g.shape))
    raise ValueError(f"gradient of {f.rank} not supported")


def divergence(v: SpectralField) -> SpectralField:
    if v.rank != VECTOR:
        raise ValueError("divergence expects a vector field")
    return SpectralField(v.grid, SCALAR, np.sum(1j * v.grid.xi_odd * v.coeffs, axis=0)[None])


def divergence_tensor(tau: SpectralField) -> SpectralField:
    """Row divergence ``(div tau)_i = sum_j d_j tau_ij`` of a symmetric tensor."""
    if tau.rank != SYM_TENSOR:
        raise ValueError("divergence_tensor expects a sym_tensor field")
    return SpectralField(tau.grid, VECTOR, _div_sym(tau.coeffs, tau.grid))


def _div_sym(tau: np.ndarray, grid: Grid) -> np.ndarray:
    idx = sym_index(grid.dim)
    ik = 1j * grid.xi_odd
    return np.stack([sum(ik[j] * tau[idx[i, j]] for j in range(grid.dim))
                     for i in range(grid.dim)])


def curl(v: SpectralField) -> SpectralField:
    """Vector curl in 3D, scalar vorticity ``d_1 v_2 - d_2 v_1`` in 2D."""
    if v.rank != VECTOR:
        raise ValueError("curl expects a vector field")
    return SpectralField(v.grid, SCALAR if v.grid.dim == 2 else VECTOR,
                         _curl(v.coeffs, v.grid))


def _curl(v: np.ndarray, grid: Grid) -> np.ndarray:
    ik = 1j * grid.xi_odd
    if grid.dim == 2:
        return (ik[0] * v[1] - ik[1] * v[0])[None]
    return np.stack([ik[1] * v[2] - ik[2] * v[1],
                     ik[2] * v[0] - ik[0] * v[2],
                     ik[0] * v[1] - ik[1] * v[0]])


def laplacian(f: SpectralField) -> SpectralField:
    return f._like(-f.grid.k2 * f.coeffs)


def leray_project(v: SpectralField) -> SpectralField:
    """``(I - xi xi^T / |xi|^2) v`` per mode; the zero mode passes through.

    Uses the same Nyquist-zeroed wavevector as :func:`divergence`, so the
    output is discretely divergence-free at every mode.
    """
    if v.rank != VECTOR:
        raise ValueError("leray_project expects a vector field")
    return v._like(_project(v.coeffs, v.grid))


def _project(v: np.ndarray, grid: Grid) -> np.ndarray:
    xi = grid.xi_odd
    xi_dot_v = np.sum(xi * v, axis=0)
    return v - xi * (xi_dot_v * grid.inv_k2_odd)


def riesz_tilde(tau: SpectralField) -> SpectralField:
    """``-(-Laplacian)^{-1} curl(div tau)``; mean-free output.

    In 3D the curl is the ordinary vector curl of the vector ``div tau``; in
    2D it is the scalar curl.
    """
    g = tau.grid
    cd = _curl(_div_sym(tau.coeffs, g), g)
    return SpectralField(g, SCALAR if g.dim == 2 else VECTOR, -cd * g.inv_k2)


def dealias(f: SpectralField) -> SpectralField:
    """Zero every coefficient with some ``|xi_i| > n/3``."""
    return f._like(f.coeffs * f.grid.dealias_mask)


# -- inner products and norms ----------------------------------------------

def _weights(rank: str, dim: int):
    if rank == SYM_TENSOR:
        return sym_weights(dim).reshape((-1,) + (1,) * dim)
    return 1.0


def inner(a: SpectralField, b: SpectralField) -> float:
    """L^2 inner product over the box computed by Parseval.

    Symmetric tensors use the Frobenius pairing ``sum_ij a_ij b_ij``.
    """
    _same_kind(a, b)
    return inner_coeffs(a.coeffs, b.coeffs, a.grid, a.rank)


def inner_coeffs(a: np.ndarray, b: np.ndarray, grid: Grid, rank: str) -> float:
    w = _weights(rank, grid.dim)
    s = np.sum(w * (a.real * b.real + a.imag * b.imag))
    return float(s) * (grid.length ** grid.dim) / grid.modes ** 2


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


def physical_inner(a: PhysicalField, b: PhysicalField) -> float:
    """Collocation quadrature of the same pairing as :func:`inner`."""
    w = _weights(a.rank, a.grid.dim)
    return float(np.sum(w * a.values * b.values)) * a.grid.cell_volume


def pointwise_magnitude(values: np.ndarray, grid: Grid, rank: str) -> np.ndarray:
    """|f(x)|: Euclidean for vectors, Frobenius for tensors."""
    w = _weights(rank, grid.dim)
    return np.sqrt(np.sum(w * values ** 2, axis=0))


def lp_norm_physical(values: np.ndarray, grid: Grid, rank: str, p: float) -> float:
    mag = pointwise_magnitude(values, grid, rank)
    if np.isinf(p):
        return float(mag.max())
    return float((np.sum(mag ** p) * grid.cell_volume) ** (1.0 / p))
