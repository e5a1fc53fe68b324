"""Independent reference implementations used only by the tests.

Nothing here calls the package's transforms or multipliers: DFTs are explicit
matrix products, derivatives are finite differences or dense operators, and
tensor algebra is done pointwise with numpy matrix products.
"""

import numpy as np


def wavenumbers(n):
    k = np.arange(n)
    k[k >= n // 2] -= n
    return k


def dft_matrix(n):
    """Unnormalized forward DFT on n points: F[k, x] = exp(-i k x_j)."""
    x = 2 * np.pi * np.arange(n) / n
    return np.exp(-1j * np.outer(wavenumbers(n), x))


def direct_dft(values):
    """Forward DFT over all spatial axes of a (dim,)*n array by explicit summation."""
    out = values.astype(complex)
    for ax in range(values.ndim):
        f = dft_matrix(values.shape[ax])
        out = np.moveaxis(np.tensordot(f, out, axes=([1], [ax])), 0, ax)
    return out


def direct_idft(coeffs):
    out = coeffs.astype(complex)
    for ax in range(coeffs.ndim):
        n = coeffs.shape[ax]
        f = np.conj(dft_matrix(n)).T / n
        out = np.moveaxis(np.tensordot(f, out, axes=([1], [ax])), 0, ax)
    return out


def spectral_derivative_direct(values, axis):
    """d/dx_axis by explicit DFT, zeroing the Nyquist mode."""
    n = values.shape[axis]
    k = wavenumbers(n).astype(float)
    k[n // 2] = 0.0
    c = direct_dft(values)
    shape = [1] * values.ndim
    shape[axis] = n
    return direct_idft(1j * k.reshape(shape) * c).real


def central_difference(values, axis, dx):
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * dx)


def dense_projector(n, dim):
    """Leray projector as one dense matrix acting on the flattened coefficients.

    Nyquist components of the wavevector are zeroed, as in the solver.
    """
    k = wavenumbers(n).astype(float)
    k[n // 2] = 0.0
    grids = np.meshgrid(*([k] * dim), indexing="ij")
    xi = np.stack([g.ravel() for g in grids])
    m = xi.shape[1]
    P = np.zeros((dim * m, dim * m))
    for idx in range(m):
        v = xi[:, idx]
        block = np.eye(dim)
        s = v @ v
        if s > 0:
            block -= np.outer(v, v) / s
        for i in range(dim):
            for j in range(dim):
                P[i * m + idx, j * m + idx] = block[i, j]
    return P


def sym_full(packed, dim):
    """Packed upper-triangle storage -> full (dim, dim, ...) tensor."""
    pairs = [(i, j) for i in range(dim) for j in range(i, dim)]
    full = np.zeros((dim, dim) + packed.shape[1:], dtype=packed.dtype)
    for c, (i, j) in enumerate(pairs):
        full[i, j] = packed[c]
        full[j, i] = packed[c]
    return full


def q_pointwise(grad_u, tau_full, b):
    """Q = tau W - W tau + b (D tau + tau D) with explicit matrix products per point.

    ``grad_u[i, j] = d_j u_i``; arrays have the spatial axes last.
    """
    g = np.moveaxis(grad_u, (0, 1), (-2, -1))
    t = np.moveaxis(tau_full, (0, 1), (-2, -1))
    d = 0.5 * (g + np.swapaxes(g, -1, -2))
    w = 0.5 * (g - np.swapaxes(g, -1, -2))
    q = t @ w - w @ t + b * (d @ t + t @ d)
    return np.moveaxis(q, (-2, -1), (0, 1))


def quadrature_inner(a, b, dx, dim):
    return float(np.sum(a * b)) * dx ** dim
