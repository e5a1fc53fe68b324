"""Property-based checks of the structural identities, over random fields and parameters."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oldroyd import fourier_field as ff
from oldroyd import littlewood_paley as lp
from oldroyd.checkpoint import read_checkpoint, write_checkpoint
from oldroyd.config import format_config, parse_config
from oldroyd.diagnostics import fit_exponential_rate, fit_polynomial_rate
from oldroyd.fourier_field import Grid, SCALAR, SYM_TENSOR, VECTOR
from oldroyd.integrator import SimState, make_state
from oldroyd.linear_oracle import mode_matrix
from oldroyd.oldroyd_rhs import ModelParams, advect, deformation, q_bilinear

from conftest import random_field

PROPS = settings(max_examples=25, deadline=None)

seeds = st.integers(0, 2 ** 32 - 1)
dims = st.sampled_from([2, 3])
small_n = st.sampled_from([8, 16])
couplings = st.floats(0.0, 10.0)
bs = st.floats(-1.0, 1.0)


def grid_for(dim, n):
    return Grid(dim, n if dim == 2 else min(n, 16))


def scale(*fields):
    return max(ff.l2_norm(f) for f in fields) ** 2


params_st = st.builds(ModelParams, k=couplings, b=bs, nu=st.floats(0.0, 2.0),
                      eta=st.floats(0.05, 5.0), mu=st.floats(0.0, 5.0),
                      alpha=st.floats(0.1, 5.0))


@PROPS
@given(seed=seeds, dim=dims, n=small_n)
def test_leray_idempotent_selfadjoint_divfree(seed, dim, n):
    g = grid_for(dim, n)
    rng = np.random.default_rng(seed)
    u, v = random_field(g, VECTOR, rng, band=False), random_field(g, VECTOR, rng, band=False)
    pu = ff.leray_project(u)
    s = scale(u, v)
    assert ff.l2_norm(ff.leray_project(pu) - pu) ** 2 <= 1e-24 * s
    assert abs(ff.inner(pu, v) - ff.inner(u, ff.leray_project(v))) <= 1e-12 * s
    assert ff.l2_norm(ff.divergence(pu)) <= 1e-12 * ff.l2_norm(ff.gradient(u))


@PROPS
@given(seed=seeds, dim=dims, b=bs)
def test_q_bilinear_and_corotational_orthogonality(seed, dim, b):
    g = grid_for(dim, 16)
    rng = np.random.default_rng(seed)
    u = ff.leray_project(random_field(g, VECTOR, rng, smooth=20))
    u2 = ff.leray_project(random_field(g, VECTOR, rng, smooth=20))
    tau = random_field(g, SYM_TENSOR, rng, smooth=20)
    c = float(rng.uniform(-3, 3))
    lhs = q_bilinear(u + u2 * c, tau, b)
    rhs = q_bilinear(u, tau, b) + q_bilinear(u2, tau, b) * c
    assert np.abs(lhs.coeffs - rhs.coeffs).max() <= 1e-10 * np.abs(lhs.coeffs).max()
    # b enters affinely, and at b = 0 the term is a commutator orthogonal to tau
    q0 = q_bilinear(u, tau, 0.0)
    assert abs(ff.inner(q0, tau)) <= 1e-12 * ff.l2_norm(ff.gradient(u)) * ff.l2_norm(tau) ** 2 * g.n
    qb = q_bilinear(u, tau, b)
    q1 = q_bilinear(u, tau, 1.0)
    assert np.abs((qb - q0).coeffs - b * (q1 - q0).coeffs).max() <= 1e-10 * np.abs(q1.coeffs).max()


@PROPS
@given(seed=seeds, dim=dims)
def test_coupling_cancellation(seed, dim):
    g = grid_for(dim, 16)
    rng = np.random.default_rng(seed)
    u = random_field(g, VECTOR, rng)
    tau = random_field(g, SYM_TENSOR, rng)
    lhs = ff.inner(ff.divergence_tensor(tau), u) + ff.inner(deformation(u), tau)
    assert abs(lhs) <= 1e-10 * ff.l2_norm(tau) * ff.l2_norm(ff.gradient(u))


@PROPS
@given(seed=seeds, dim=dims, rank=st.sampled_from([SCALAR, VECTOR, SYM_TENSOR]))
def test_advection_skew(seed, dim, rank):
    g = grid_for(dim, 16)
    rng = np.random.default_rng(seed)
    u = ff.leray_project(random_field(g, VECTOR, rng))
    f = random_field(g, rank, rng)
    got = ff.inner(advect(u, f), f)
    assert abs(got) <= 1e-10 * ff.l2_norm(ff.gradient(u)) * ff.l2_norm(f) ** 2 * g.n


@PROPS
@given(seed=seeds, dim=dims, n=st.sampled_from([8, 16, 32]))
def test_parseval(seed, dim, n):
    g = grid_for(dim, n)
    rng = np.random.default_rng(seed)
    f = random_field(g, SYM_TENSOR, rng, band=False)
    phys = ff.transform_backward(f)
    assert ff.physical_inner(phys, phys) == pytest.approx(ff.l2_norm(f) ** 2, rel=1e-12)


@PROPS
@given(seed=seeds, dim=dims)
def test_sym_pack_roundtrip(seed, dim):
    a = np.random.default_rng(seed).standard_normal((dim, dim, 3))
    full = a + a.transpose(1, 0, 2)
    assert np.array_equal(ff.unpack_sym(ff.pack_sym(full), dim), full)


@PROPS
@given(dim=dims, n=st.sampled_from([16, 32, 64]))
def test_partition_of_unity(dim, n):
    if dim == 3 and n > 32:
        n = 32
    part = lp.build_partition(Grid(dim, n))
    total = np.sum(part.blocks, axis=0)
    assert np.abs(total - 1).max() <= 1e-12
    assert all(np.all(b >= 0) for b in part.blocks)


@PROPS
@given(seed=seeds, dim=dims)
def test_block_reconstruction(seed, dim):
    g = grid_for(dim, 32)
    f = random_field(g, VECTOR, np.random.default_rng(seed), band=False)
    j_max = lp.build_partition(g).j_max
    total = sum((lp.block_project(f, j).coeffs for j in range(-1, j_max + 1)), np.zeros_like(f.coeffs))
    assert np.abs(total - f.coeffs).max() <= 1e-12 * np.abs(f.coeffs).max()


@PROPS
@given(rate=st.floats(1e-3, 2.0), amp=st.floats(1e-8, 1e3), c=st.floats(1e-6, 1e6),
       shift=st.floats(0.0, 50.0))
def test_exponential_fit_invariances(rate, amp, c, shift):
    t = np.linspace(0, 10, 41) + shift
    y = amp * np.exp(-rate * t)
    fit = fit_exponential_rate(t, y)
    assert fit.value == pytest.approx(rate, rel=1e-8, abs=1e-12)
    assert fit_exponential_rate(t, c * y).value == pytest.approx(fit.value, rel=1e-8, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-9)


@PROPS
@given(p=st.floats(0.1, 4.0), amp=st.floats(1e-6, 1e3))
def test_polynomial_fit_recovers_exponent(p, amp):
    t = np.linspace(0, 30, 61)
    y = amp * (1 + t) ** (-p)
    assert fit_polynomial_rate(t, y).value == pytest.approx(p, rel=1e-8)


@PROPS
@given(params=params_st, xi=st.lists(st.integers(-8, 8), min_size=2, max_size=3))
def test_linearization_dissipative(params, xi):
    if not any(xi):
        xi[0] = 1
    ev = mode_matrix(np.array(xi, dtype=float), params).eigenvalues()
    assert ev.real.max() <= 1e-9 * max(1.0, np.abs(ev).max())


@settings(max_examples=15, deadline=None)
@given(seed=seeds, dim=dims, params=params_st, t=st.floats(0, 1e6), diss=st.floats(0, 1e3))
def test_checkpoint_roundtrip(tmp_path_factory, seed, dim, params, t, diss):
    g = Grid(dim, 8)
    rng = np.random.default_rng(seed)
    st0 = make_state(random_field(g, VECTOR, rng), random_field(g, SYM_TENSOR, rng))
    state = SimState(t, st0.u_hat, st0.tau_hat, diss)
    path = tmp_path_factory.mktemp("chk") / "s.chk"
    write_checkpoint(state, params, path)
    back, p = read_checkpoint(path)
    assert p == params and back.t == t and back.dissipated == diss
    assert np.array_equal(back.u_hat.coeffs, state.u_hat.coeffs)
    assert np.array_equal(back.tau_hat.coeffs, state.tau_hat.coeffs)


@PROPS
@given(params=params_st, n=st.sampled_from([8, 16, 64]), t_end=st.floats(0, 1e3))
def test_config_echo_roundtrip(params, n, t_end):
    text = (f"[grid]\nn = {n}\n[model]\n" + "".join(f"{k} = {v!r}\n" for k, v in
                                                   zip(("k", "b", "nu", "eta", "mu", "alpha"),
                                                       params.as_tuple()))
            + f"[stepper]\nt_end = {t_end!r}\n")
    cfg = parse_config(text)
    assert cfg.params == params and cfg.stepper.t_end == t_end
    assert parse_config(format_config(cfg)) == cfg


@PROPS
@given(seed=seeds, dim=dims)
def test_riesz_tilde_bounded(seed, dim):
    # |xi x tau xi| <= |xi|^2 |tau|_F, so the degree-zero multiplier is a contraction
    g = grid_for(dim, 16)
    tau = random_field(g, SYM_TENSOR, np.random.default_rng(seed), band=False)
    r = ff.riesz_tilde(tau)
    assert ff.l2_norm(r) <= ff.l2_norm(tau) * (1 + 1e-12)
