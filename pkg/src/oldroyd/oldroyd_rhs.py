"""Terms of the Oldroyd-B system with stress diffusion and damping.

    u_t + (u.grad)u - nu Lap u + grad p = k div(tau),     div u = 0
    tau_t + (u.grad)tau - eta Lap tau + mu tau + Q(grad u, tau) = alpha D(u)

    Q = tau Omega - Omega tau + b (D tau + tau D)

All quadratic terms are formed on the collocation grid and truncated with
the 2/3 rule. The pressure never appears: momentum terms are Leray
projected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fourier_field import (Grid, SpectralField, VECTOR, SYM_TENSOR, TENSOR, fft, ifft,
                            sym_index, sym_pairs, _div_sym, _project)
from . import fourier_field as ff

K_MAX = 10.0


@dataclass(frozen=True)
class ModelParams:
    k: float = 0.1
    b: float = 0.0
    nu: float = 0.0
    eta: float = 1.0
    mu: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise ValueError("; ".join(errors))

    def problems(self) -> list:
        out = []
        if not 0.0 <= self.k <= K_MAX:
            out.append(f"k={self.k} outside the admissible coupling range [0, {K_MAX:g}]")
        if not -1.0 <= self.b <= 1.0:
            out.append(f"b={self.b} outside [-1, 1]")
        if self.nu < 0:
            out.append(f"nu={self.nu} must be >= 0")
        if not self.eta > 0:
            out.append(f"eta={self.eta} must be > 0: the stress equation needs diffusion")
        if self.mu < 0:
            out.append(f"mu={self.mu} must be >= 0")
        return out

    def as_tuple(self) -> tuple:
        return (self.k, self.b, self.nu, self.eta, self.mu, self.alpha)


# -- linear pieces -----------------------------------------------------------

def deformation(u: SpectralField) -> SpectralField:
    """D(u) = (grad u + grad u^T) / 2."""
    g = u.grid
    ik = 1j * g.xi_odd
    d = np.stack([0.5 * (ik[j] * u.coeffs[i] + ik[i] * u.coeffs[j]) for i, j in sym_pairs(g.dim)])
    return SpectralField(g, SYM_TENSOR, d)


def rotation(u: SpectralField) -> SpectralField:
    """Skew part Omega(u) = (grad u - grad u^T) / 2 as a full tensor."""
    g = u.grid
    ik = 1j * g.xi_odd
    om = np.stack([0.5 * (ik[j] * u.coeffs[i] - ik[i] * u.coeffs[j])
                   for i in range(g.dim) for j in range(g.dim)])
    return SpectralField(g, TENSOR, om)


# -- pointwise algebra ---------------------------------------------------------

def _velocity_gradient(u_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Physical ``G[i, j] = d_j u_i``."""
    return ifft(1j * grid.xi_odd[None, :] * u_hat[:, None], grid)


def _q_packed(grad_u: np.ndarray, tau: np.ndarray, b: float, dim: int) -> np.ndarray:
    # Q = M + M^T with M = tau (Omega + b D); symmetric by construction
    idx = sym_index(dim)
    a = [[0.5 * (grad_u[i, j] - grad_u[j, i]) + 0.5 * b * (grad_u[i, j] + grad_u[j, i])
          for j in range(dim)] for i in range(dim)]
    m = [[sum(tau[idx[i, l]] * a[l][j] for l in range(dim)) for j in range(dim)]
         for i in range(dim)]
    return np.stack([m[i][j] + m[j][i] for i, j in sym_pairs(dim)])


def _deformation_packed(grad_u: np.ndarray, dim: int) -> np.ndarray:
    return np.stack([0.5 * (grad_u[i, j] + grad_u[j, i]) for i, j in sym_pairs(dim)])


def _advect_phys(u: np.ndarray, f_hat: np.ndarray, grid: Grid) -> np.ndarray:
    grad_f = ifft(1j * grid.xi_odd[None, :] * f_hat[:, None], grid)
    return np.sum(u[None, :] * grad_f, axis=1)


# -- nonlinear terms -----------------------------------------------------------

def q_bilinear(u: SpectralField, tau: SpectralField, b: float) -> SpectralField:
    """Q(grad u, tau) = tau Omega - Omega tau + b (D tau + tau D), dealiased."""
    g = u.grid
    q = _q_packed(_velocity_gradient(u.coeffs, g), ifft(tau.coeffs, g), b, g.dim)
    return SpectralField(g, SYM_TENSOR, fft(q, g) * g.dealias_mask)


def advect(u: SpectralField, f: SpectralField) -> SpectralField:
    """(u . grad) f for a field of any rank, dealiased."""
    g = u.grid
    out = _advect_phys(ifft(u.coeffs, g), f.coeffs, g)
    return f._like(fft(out, g) * g.dealias_mask)


def momentum_rhs(state, params: ModelParams, include_viscous: bool = True) -> SpectralField:
    """P[-(u.grad)u + k div tau + nu Lap u]."""
    g = state.u_hat.grid
    rhs = -advect(state.u_hat, state.u_hat).coeffs + params.k * _div_sym(state.tau_hat.coeffs, g)
    if include_viscous and params.nu:
        rhs = rhs - params.nu * g.k2 * state.u_hat.coeffs
    return SpectralField(g, VECTOR, _project(rhs, g))


def stress_rhs_explicit(state, params: ModelParams) -> SpectralField:
    """Non-stiff stress terms ``-(u.grad)tau - Q + alpha D(u)``.

    ``-eta Lap tau + mu tau`` is left to the integrating factor.
    """
    u, tau = state.u_hat, state.tau_hat
    return (-advect(u, tau) - q_bilinear(u, tau, params.b)
            + params.alpha * deformation(u))


def explicit_rhs(u_hat: np.ndarray, tau_hat: np.ndarray, params: ModelParams, grid: Grid):
    """Both explicit right-hand sides from one set of transforms.

    Array-level fast path used by the integrator; equals
    ``momentum_rhs(..., include_viscous=False)`` and ``stress_rhs_explicit``.
    """
    dim = grid.dim
    mask = grid.dealias_mask
    u = ifft(u_hat, grid)
    grad_u = _velocity_gradient(u_hat, grid)
    tau = ifft(tau_hat, grid)

    adv_u = np.sum(u[None, :] * grad_u, axis=1)
    stress_nl = _advect_phys(u, tau_hat, grid) + _q_packed(grad_u, tau, params.b, dim)
    nl = fft(np.concatenate([adv_u, stress_nl]), grid) * mask

    du = _project(params.k * _div_sym(tau_hat, grid) - nl[:dim], grid)
    ik = 1j * grid.xi_odd
    d_hat = np.stack([0.5 * (ik[j] * u_hat[i] + ik[i] * u_hat[j]) for i, j in sym_pairs(dim)])
    dtau = params.alpha * d_hat - nl[dim:]
    return du, dtau


def gamma_quantity(state, params: ModelParams) -> SpectralField:
    """Gamma = curl u - k R~ tau (scalar in 2D, vector in 3D)."""
    return ff.curl(state.u_hat) - params.k * ff.riesz_tilde(state.tau_hat)
