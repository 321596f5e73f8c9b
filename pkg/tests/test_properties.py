"""Randomized invariants checked with hypothesis."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chronodg import dg1, dg2, glm, irk, newmark, smallmat
from chronodg.newmark import PairState
from chronodg.problem import Oscillator

SETTINGS = settings(max_examples=40, deadline=None)

entries = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)
lams = st.floats(0.1, 5.0)
steps = st.floats(0.02, 1.0)


def mats(rows, cols):
    return arrays(np.float64, (rows, cols), elements=entries)


@SETTINGS
@given(mats(2, 3), mats(3, 2), mats(2, 2), mats(2, 2))
def test_kron_mixed_product(A, C, B, D):
    lhs = smallmat.kron(A, B) @ smallmat.kron(C, D)
    np.testing.assert_allclose(lhs, smallmat.kron(A @ C, B @ D), atol=1e-10)


@SETTINGS
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_eig_reconstruction(n, seed):
    G = np.random.default_rng(seed).normal(size=(n, n))
    d = smallmat.eig(G)
    residual = np.abs(d.W @ np.diag(d.eigenvalues) @ d.Winv - G).max()
    assert residual <= 1e-9 * max(1.0, np.abs(G).max())


@SETTINGS
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_solve_residual(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + n * np.eye(n)
    b = rng.normal(size=n)
    x = smallmat.solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(A, 2) * max(np.linalg.norm(x), 1.0) * 10


@SETTINGS
@given(st.sampled_from([1, 2, 3]), lams, steps, st.floats(0.2, 5.0), st.sampled_from([0.0, 0.5]))
def test_g_mu_invariance(r, lam, dt, k, a):
    # lam dt^2 is unchanged under (lam, dt) -> (lam k^2, dt / k)
    G1 = dg2.assemble(dg2.DG2Config(r, lam, dt, a)).G
    G2 = dg2.assemble(dg2.DG2Config(r, lam * k * k, dt / k, a)).G
    np.testing.assert_allclose(G1, G2, atol=1e-11 * max(1.0, np.abs(G1).max()))


@SETTINGS
@given(st.sampled_from([1, 2, 3]), st.sampled_from([0.0, 0.5]), st.floats(0.02, 0.3), st.floats(-1, 1), st.floats(-1, 1))
def test_error_recursion(r, a, dt, u0, v0):
    prob = Oscillator(1.0, u0, v0)
    cfg = dg2.DG2Config(r, 1.0, dt, a)
    sys = dg2.assemble(cfg)
    n_steps = 10
    u = dg2.march(sys, dg2.initial_slab(cfg, prob, "taylor"), n_steps)
    e = np.array([dg2.exact_slab(cfg, prob, n * dt) for n in range(n_steps + 1)]) - u
    for n in range(n_steps):
        theta, _ = dg2.truncation_vector(sys, prob, n * dt)
        np.testing.assert_allclose(e[n + 1], sys.G @ e[n] + theta, atol=1e-12)


@SETTINGS
@given(lams, st.floats(0.01, 2.0), entries, entries)
def test_crank_nicolson_matches_average_acceleration(lam, dt, u, v):
    s = PairState(u, v)
    cn = newmark.crank_nicolson_step(lam, dt, s).as_array()
    nm = newmark.newmark_step(newmark.NewmarkParams(0.5, 0.25), lam, dt, s).as_array()
    np.testing.assert_allclose(cn, nm, atol=1e-13 * max(1.0, np.abs(nm).max()))


@SETTINGS
@given(st.floats(0.5, 1.0), st.floats(0.0, 0.5), lams, steps, entries, entries)
def test_newmark_propagator_matches_step(gamma, beta, lam, dt, u, v):
    p = newmark.NewmarkParams(gamma, beta)
    s = newmark.newmark_step(p, lam, dt, PairState(u, v)).as_array()
    np.testing.assert_allclose(newmark.newmark_propagator(p, lam, dt) @ [u, v], s, atol=1e-12)


@SETTINGS
@given(lams, steps, arrays(np.float64, 4, elements=entries), arrays(np.float64, 4, elements=entries), entries)
def test_glm_step_is_linear(lam, dt, y, z, c):
    from fractions import Fraction

    m = dg2.dg2_glm(1, Fraction(1, 2))
    _, a = glm.glm_step(m, lam, dt, y)
    _, b = glm.glm_step(m, lam, dt, z)
    _, both = glm.glm_step(m, lam, dt, y + c * z)
    np.testing.assert_allclose(both, a + c * b, atol=1e-10)


@SETTINGS
@given(st.sampled_from([1, 2, 3]), lams, st.floats(0.02, 0.5), entries, entries)
def test_dg1_step_matches_lobatto(r, lam, dt, u, v):
    sys = dg1.assemble_dg1(dg1.DG1Config(r, lam, dt))
    _, z = irk.irk_step(irk.lobatto_iiic(r + 1), irk.oscillator_matrix(lam), dt, np.array([u, v]))
    out = dg1.dg1_step(sys, np.tile([u, v], r + 1))
    np.testing.assert_allclose(out[-2:], z, atol=1e-12)


@SETTINGS
@given(st.sampled_from([1, 2, 3]), lams, st.floats(0.02, 2.0))
def test_det_k_is_a_polynomial_in_mu(r, lam, dt):
    # doubling lam while dividing dt by sqrt(2) keeps det K fixed
    d1 = np.linalg.det(dg1.assemble_dg1(dg1.DG1Config(r, lam, dt)).K)
    d2 = np.linalg.det(dg1.assemble_dg1(dg1.DG1Config(r, 2 * lam, dt / np.sqrt(2))).K)
    assert d1 == pytest.approx(d2, rel=1e-12)
    assert d1 >= 1.0 - 1e-12


@SETTINGS
@given(st.sampled_from([1, 2, 3]), lams, steps, st.sampled_from([0.0, 0.5]))
def test_propagator_residual(r, lam, dt, a):
    sys = dg2.assemble(dg2.DG2Config(r, lam, dt, a))
    scale = np.linalg.norm(sys.Aplus, 2) * np.linalg.norm(sys.G, 2) + np.linalg.norm(sys.Aminus, 2)
    assert np.linalg.norm(sys.Aplus @ sys.G + sys.Aminus, 2) <= 1e-12 * scale


@SETTINGS
@given(st.integers(2, 4), st.floats(-50.0, -0.01))
def test_lobatto_stability_bounded_on_negative_axis(s, x):
    assert abs(irk.stability_function(irk.lobatto_iiic(s), complex(x))) <= 1.0 + 1e-12
