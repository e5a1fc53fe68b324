"""Initial-data families.

``frequency_bump``
    Stress concentrated in one dyadic shell ``|xi| ~ 2^N``; large in high
    Besov norms but small in ``B^0_{inf,1}``.
``axisymmetric_scaled``
    Wide, swirl-free axisymmetric velocity with zero stress, normalized in L2.
``random_divfree``
    Seeded random fields with a power-law spectrum.
``single_mode``
    One transverse velocity/stress Fourier pair, mostly for oracle checks.

Every generator returns ``(u_hat, tau_hat)`` with ``u`` projected to be
divergence free and both fields truncated to the 2/3 band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fourier_field import (Grid, SpectralField, VECTOR, SYM_TENSOR, fft, inner_coeffs, pack_sym,
                            _curl, _project)
from .littlewood_paley import build_partition, smooth_step

FAMILIES = ("frequency_bump", "axisymmetric_scaled", "random_divfree", "single_mode")

# widest Gaussian core used by the axisymmetric family, as a fraction of the box
AXI_WIDTH_CAP = math.pi / 4
AXI_BASE_WIDTH = math.pi / 8


@dataclass(frozen=True)
class DataSpec:
    family: str = "random_divfree"
    amplitude: float = 1e-2
    seed: int = 0
    N: int = 4
    k: float = 0.1
    mode: tuple = (1, 1)
    spectrum_slope: float = 2.0
    kmax: float = 4.0
    tau_ratio: float = 1.0
    bump_radius: float = 2.0

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise ValueError("; ".join(errors))

    def problems(self) -> list:
        out = []
        if self.family not in FAMILIES:
            out.append(f"family={self.family!r} not one of {FAMILIES}")
        if not self.amplitude > 0:
            out.append(f"amplitude={self.amplitude} must be > 0")
        if self.family == "axisymmetric_scaled" and not 0 < self.k <= 1:
            out.append(f"k={self.k} must lie in (0, 1] for axisymmetric_scaled data")
        if self.N < 1:
            out.append(f"N={self.N} must be >= 1")
        if self.kmax < 1:
            out.append(f"kmax={self.kmax} must be >= 1")
        if self.tau_ratio < 0:
            out.append(f"tau_ratio={self.tau_ratio} must be >= 0")
        return out

    def generate(self, grid: Grid):
        if self.family == "frequency_bump":
            return make_frequency_bump(grid, self.N, self.amplitude, self.bump_radius)
        if self.family == "axisymmetric_scaled":
            return make_axisymmetric_scaled(grid, self.k, self.amplitude)
        if self.family == "random_divfree":
            return make_random_divfree(grid, self.amplitude, self.seed, self.spectrum_slope,
                                       self.kmax, self.tau_ratio)
        mode = tuple(self.mode)[:grid.dim] + (0,) * max(0, grid.dim - len(self.mode))
        return make_single_mode(grid, mode, self.amplitude, self.tau_ratio)


def _finish(grid: Grid, u_hat: np.ndarray, tau_hat: np.ndarray):
    mask = grid.dealias_mask
    u = _project(u_hat * mask, grid)
    return SpectralField(grid, VECTOR, u), SpectralField(grid, SYM_TENSOR, tau_hat * mask)


def _norm(c, grid, rank):
    return math.sqrt(max(inner_coeffs(c, c, grid, rank), 0.0))


# -- frequency bump ------------------------------------------------------------------

def bump_direction(dim: int) -> np.ndarray:
    """``e`` with ``|e| = sqrt(2)``, inside the plateau ``[4/3, 3/2]`` of one block."""
    return np.array([1.0, 1.0] + [0.0] * (dim - 2))


def bump_profile(r, radius: float = 2.0):
    """Radial cutoff: 1 for ``r <= radius/2``, 0 for ``r >= radius``."""
    return 1.0 - smooth_step(2.0 * np.asarray(r, dtype=float) / radius - 1.0)


def frequency_bump_fits(grid: Grid, N: int, radius: float = 2.0) -> bool:
    """Whether the bump centred at ``2^N e`` sits inside the dealiased band."""
    return N >= 1 and 2 ** N + radius <= grid.cutoff


def make_frequency_bump(grid: Grid, N: int, amplitude: float, radius: float = 2.0):
    """Stress ``(amplitude/N) * F^-1[bump(xi - 2^N e) + bump(xi + 2^N e)]`` in every slot.

    The velocity is a Taylor-Green cell scaled by ``amplitude/N``. The bump
    is fully inside block N (``Delta_N tau = tau``) once
    ``radius <= 2^N (sqrt(2) - 4/3)``; below that some mass leaks to the
    neighbouring blocks, see :func:`block_leakage`.
    """
    if not frequency_bump_fits(grid, N, radius):
        raise ValueError(f"N={N} puts the bump (radius {radius}) outside the dealiased band of n={grid.n}")
    centre = (2.0 ** N) * bump_direction(grid.dim)
    xi = grid.xi
    shift = centre.reshape((-1,) + (1,) * grid.dim)
    r_plus = np.sqrt(np.sum((xi - shift) ** 2, axis=0))
    r_minus = np.sqrt(np.sum((xi + shift) ** 2, axis=0))
    # Fourier-series coefficients; the unnormalized DFT carries n^dim
    scalar = (bump_profile(r_plus, radius) + bump_profile(r_minus, radius)) * grid.modes
    m = grid.ncomp(SYM_TENSOR)
    tau_hat = np.broadcast_to(scalar, (m,) + grid.shape).astype(complex) * (amplitude / N)

    x = grid.coords()
    if grid.dim == 2:
        u = np.stack([np.sin(x[0]) * np.cos(x[1]), -np.cos(x[0]) * np.sin(x[1])])
    else:
        u = np.stack([np.sin(x[0]) * np.cos(x[1]) * np.cos(x[2]),
                      -np.cos(x[0]) * np.sin(x[1]) * np.cos(x[2]), np.zeros(grid.shape)])
    return _finish(grid, fft(u, grid) * (amplitude / N), tau_hat)


def block_leakage(tau: SpectralField, j: int) -> float:
    """``||tau - Delta_j tau|| / ||tau||``."""
    part = build_partition(tau.grid)
    m = part.multiplier(j)
    if m is None:
        return 1.0
    rest = tau.coeffs * (1.0 - m)
    return _norm(rest, tau.grid, tau.rank) / _norm(tau.coeffs, tau.grid, tau.rank)


# -- axisymmetric ----------------------------------------------------------------------

def axisymmetric_width(grid: Grid, k: float) -> tuple:
    """``(width, effective_dilation)`` of the Gaussian core for coupling k.

    The ideal width grows like ``k^-4``; on the torus it is capped at
    ``AXI_WIDTH_CAP`` and floored at four grid cells.
    """
    ideal = AXI_BASE_WIDTH / k ** 4
    width = max(min(ideal, AXI_WIDTH_CAP), 4 * grid.dx)
    return width, AXI_BASE_WIDTH / width


def make_axisymmetric_scaled(grid: Grid, k: float, eps0: float):
    """Swirl-free axisymmetric velocity about the vertical axis, ``||u||_L2 = eps0``, zero stress.

    3D: ``u = curl(G(r) (-y, x, 0))`` with a Gaussian ``G`` centred in the box,
    a toroidal vortex-ring type flow. 2D: ``u = grad_perp G``, a radial vortex.
    """
    if not 0 < k <= 1:
        raise ValueError(f"k={k} must lie in (0, 1]")
    width, _ = axisymmetric_width(grid, k)
    x = grid.coords() - math.pi
    r2 = np.sum(x ** 2, axis=0)
    gauss = np.exp(-r2 / (2 * width ** 2))
    if grid.dim == 2:
        psi_hat = fft(gauss, grid)
        u_hat = np.stack([1j * grid.xi_odd[1] * psi_hat, -1j * grid.xi_odd[0] * psi_hat])
    else:
        pot = np.stack([-x[1] * gauss, x[0] * gauss, np.zeros(grid.shape)])
        u_hat = _curl(fft(pot, grid), grid)
    u, tau = _finish(grid, u_hat, np.zeros((grid.ncomp(SYM_TENSOR),) + grid.shape, dtype=complex))
    u.coeffs *= eps0 / _norm(u.coeffs, grid, VECTOR)
    return u, tau


# -- random ----------------------------------------------------------------------------

def make_random_divfree(grid: Grid, amplitude: float, seed: int, spectrum_slope: float = 2.0,
                        kmax: float = 4.0, tau_ratio: float = 1.0):
    """Gaussian fields with ``|xi|^-slope`` spectrum on ``1 <= |xi| <= kmax``.

    Normalized so that ``||u||_L2 = amplitude`` and ``||tau||_L2 = tau_ratio * amplitude``.
    """
    rng = np.random.default_rng(seed)
    m = grid.ncomp(SYM_TENSOR)
    noise = rng.standard_normal((grid.dim + m,) + grid.shape)
    r = np.sqrt(grid.k2)
    shape = np.zeros_like(r)
    band = (r >= 1) & (r <= kmax)
    shape[band] = r[band] ** (-spectrum_slope)
    coeffs = fft(noise, grid) * shape
    u, tau = _finish(grid, coeffs[:grid.dim], coeffs[grid.dim:])
    nu_ = _norm(u.coeffs, grid, VECTOR)
    nt = _norm(tau.coeffs, grid, SYM_TENSOR)
    if nu_ == 0:
        raise ValueError(f"kmax={kmax} leaves no modes for the random field")
    u.coeffs *= amplitude / nu_
    tau.coeffs *= (tau_ratio * amplitude / nt) if nt > 0 else 0.0
    return u, tau


# -- single mode -----------------------------------------------------------------------

def make_single_mode(grid: Grid, mode, amplitude: float, tau_ratio: float = 0.0):
    """``u = amplitude e cos(xi.x)`` with ``e`` a unit vector perpendicular to ``xi``.

    With ``tau_ratio > 0`` the stress carries the matching transverse shear
    ``tau_ratio * amplitude * (xi_hat e^T + e xi_hat^T)/sqrt(2) * sin(xi.x)``.
    """
    xi = np.asarray(mode, dtype=float)
    if xi.size != grid.dim or not np.any(xi):
        raise ValueError(f"mode {mode} must be a nonzero {grid.dim}-vector")
    if np.any(np.abs(xi) > grid.cutoff):
        raise ValueError(f"mode {mode} lies outside the dealiased band")
    xi_hat = xi / np.linalg.norm(xi)
    trial = np.eye(grid.dim)[int(np.argmin(np.abs(xi_hat)))]
    e = trial - (trial @ xi_hat) * xi_hat
    e /= np.linalg.norm(e)
    x = grid.coords()
    phase = np.tensordot(xi, x, axes=1)
    u = amplitude * e.reshape((-1,) + (1,) * grid.dim) * np.cos(phase)
    shear = (np.outer(xi_hat, e) + np.outer(e, xi_hat)) / math.sqrt(2)
    tau = tau_ratio * amplitude * pack_sym(shear).reshape((-1,) + (1,) * grid.dim) * np.sin(phase)
    return _finish(grid, fft(u, grid), fft(tau, grid))
