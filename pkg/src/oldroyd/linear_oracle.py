"""Exact per-mode solution of the system linearized about (u, tau) = (0, 0).

For one wavevector ``xi`` the linear part reads

    u'   = k P(xi) (i tau xi)
    tau' = -(eta |xi|^2 + mu) tau + alpha (i/2)(xi (x) u + u (x) xi)

on the stacked vector ``(u_hat, packed tau_hat)``. The projection ``P(xi)``
is applied to the incoming velocity as well, so the longitudinal velocity
direction is an inert zero mode rather than a constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .fourier_field import SpectralField, VECTOR, SYM_TENSOR, sym_index, sym_pairs
from .oldroyd_rhs import ModelParams


@dataclass(frozen=True, eq=False)
class ModeSystem:
    xi: tuple
    params: ModelParams
    dim: int
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)

    def transverse_basis(self) -> np.ndarray:
        """Orthonormal coordinates of the physical subspace (u perpendicular to xi, all of tau)."""
        d = self.dim
        xi = np.asarray(self.xi, dtype=float)
        q, _ = np.linalg.qr(np.column_stack([xi, np.eye(d)]))
        perp = q[:, 1:d]
        m = self.size - d
        basis = np.zeros((self.size, d - 1 + m))
        basis[:d, :d - 1] = perp
        basis[d:, d - 1:] = np.eye(m)
        return basis

    def physical_eigenvalues(self) -> np.ndarray:
        """Spectrum with the inert longitudinal velocity direction removed."""
        b = self.transverse_basis()
        return np.linalg.eigvals(b.T @ self.matrix @ b)

    def evolve(self, vec: np.ndarray, t: float) -> np.ndarray:
        return evolve_exact(self, vec, t)


def mode_matrix(xi, params: ModelParams) -> ModeSystem:
    xi_arr = np.asarray(xi, dtype=float)
    dim = xi_arr.size
    if dim not in (2, 3):
        raise ValueError(f"xi must have 2 or 3 components, got {dim}")
    k2 = float(xi_arr @ xi_arr)
    if k2 == 0:
        raise ValueError("xi = 0 is the mean mode; it does not evolve under the linear flow")
    pairs = sym_pairs(dim)
    idx = sym_index(dim)
    m = len(pairs)
    proj = np.eye(dim) - np.outer(xi_arr, xi_arr) / k2

    # div: (tau xi)_i = sum_j tau_ij xi_j, written against the packed slots
    div = np.zeros((dim, m), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            div[i, idx[i, j]] += 1j * xi_arr[j]
    # packed D(v) = (i/2)(xi_j v_i + xi_i v_j)
    dmat = np.zeros((m, dim), dtype=complex)
    for c, (i, j) in enumerate(pairs):
        dmat[c, i] += 0.5j * xi_arr[j]
        dmat[c, j] += 0.5j * xi_arr[i]

    mat = np.zeros((dim + m, dim + m), dtype=complex)
    mat[:dim, dim:] = params.k * proj @ div
    mat[dim:, :dim] = params.alpha * dmat @ proj
    mat[dim:, dim:] = -(params.eta * k2 + params.mu) * np.eye(m)
    if params.nu:
        mat[:dim, :dim] = -params.nu * k2 * np.eye(dim)
    return ModeSystem(tuple(float(x) for x in xi_arr), params, dim, mat)


def evolve_exact(system: ModeSystem, vec: np.ndarray, t: float) -> np.ndarray:
    """``exp(t M) vec`` by scaling-and-squaring Pade (scipy)."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return np.array(vec, dtype=complex, copy=True)
    return scipy.linalg.expm(t * system.matrix) @ np.asarray(vec, dtype=complex)


def evolve_fields_exact(u_hat: SpectralField, tau_hat: SpectralField, params: ModelParams,
                        t: float):
    """Apply the exact linear flow mode by mode to whole fields.

    Only modes carrying data are touched; the mean mode is left unchanged.
    Returns new ``(u_hat, tau_hat)``.
    """
    g = u_hat.grid
    d = g.dim
    u = u_hat.coeffs.copy()
    tau = tau_hat.coeffs.copy()
    stacked = np.concatenate([u, tau])
    active = np.argwhere(np.any(stacked != 0, axis=0))
    for pos in map(tuple, active):
        xi = g.xi[(slice(None),) + pos]
        if not np.any(xi):
            continue
        sys_ = mode_matrix(xi, params)
        new = evolve_exact(sys_, stacked[(slice(None),) + pos], t)
        u[(slice(None),) + pos] = new[:d]
        tau[(slice(None),) + pos] = new[d:]
    return SpectralField(g, VECTOR, u), SpectralField(g, SYM_TENSOR, tau)


def mode_decay_rate(params: ModelParams, xi_norm: float, dim: int = 2) -> float:
    """-max Re(lambda) on the physical subspace at |xi| = xi_norm."""
    xi = np.zeros(dim)
    xi[0] = xi_norm
    return float(-np.max(mode_matrix(xi, params).physical_eigenvalues().real))


def slowest_decay_rate(params: ModelParams, xi_max: float, dim: int = 2) -> float:
    """Smallest mode decay rate over lattice norms ``1 <= |xi| <= xi_max``.

    The linear system is isotropic, so only ``|xi|`` matters; the scan runs
    over every value ``sqrt(integer)`` in range.
    """
    if xi_max < 1:
        raise ValueError(f"xi_max must be >= 1, got {xi_max}")
    norms = np.sqrt(np.arange(1, int(np.floor(xi_max ** 2)) + 1))
    return min(mode_decay_rate(params, r, dim) for r in norms)


def small_k_rate(k: float, xi_norm: float = 1.0) -> float:
    """Leading-order slow rate ``(k/2) |xi|^2 / (|xi|^2 + 1)`` for eta = mu = alpha = 1."""
    r2 = xi_norm ** 2
    return 0.5 * k * r2 / (r2 + 1.0)


def reduced_characteristic(params: ModelParams, xi_norm: float) -> np.ndarray:
    """Coefficients of ``lambda^2 + (eta|xi|^2+mu) lambda + (k alpha/2)|xi|^2`` (nu = 0)."""
    r2 = xi_norm ** 2
    return np.array([1.0, params.eta * r2 + params.mu, 0.5 * params.k * params.alpha * r2])
