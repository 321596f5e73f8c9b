from fractions import Fraction

import numpy as np
import pytest

from chronodg import analysis, dg2, glm, newmark
from chronodg.errors import SingularImplicitBlock, ZeroAlphaZero

NEWMARK_Q = ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1 / 12, 0.0, 0.0])
P1_Q = ([1.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.5, 0.0, -0.25, 0.75])
P1_KERNEL = [[-2, -1, 1, 0], [1, 0, 0, 1]]


@pytest.fixture(scope="module")
def newmark_glm():
    return glm.newmark_as_glm()


@pytest.fixture(scope="module")
def p1_glm():
    return dg2.dg2_glm(1, Fraction(1, 2))


# --- MuPolynomial ----------------------------------------------------------


def test_mu_polynomial_arithmetic():
    p = glm.MuPolynomial((Fraction(1), Fraction(2), Fraction(0)))
    q = glm.MuPolynomial((Fraction(-1), Fraction(1)))
    assert p.coeffs == (1, 2)
    assert (p * q).coeffs == (-1, -1, 2)
    assert (p + q).coeffs == (0, 3)
    assert (p - p).is_zero()
    assert (p + q).valuation() == 1
    assert (p + q).shift_down(1).coeffs == (3,)
    assert p(Fraction(1, 2)) == 2


def test_poly_det_and_adjugate(rng):
    Ap, _ = dg2.mu_slab_polynomials(2, Fraction(1, 3))
    det = glm.poly_det(Ap)
    adj = glm.poly_adjugate(Ap)
    for mu in (0.3, 1.7):
        M = glm.poly_matrix_eval(Ap, mu)
        assert float(det(mu)) == pytest.approx(np.linalg.det(M), rel=1e-12)
        np.testing.assert_allclose(glm.poly_matrix_eval(adj, mu) @ M, np.linalg.det(M) * np.eye(3), atol=1e-10)


# --- stepping ---------------------------------------------------------------


def test_free_equation(newmark_glm, rng):
    y = rng.normal(size=3)
    Y, y1 = glm.glm_step(newmark_glm, 0.0, 0.4, y)
    np.testing.assert_allclose(Y, newmark_glm.U @ y)
    np.testing.assert_allclose(y1, newmark_glm.V @ y)


def test_newmark_matrices(newmark_glm):
    block = np.block([[newmark_glm.A, newmark_glm.U], [newmark_glm.B, newmark_glm.V]])
    np.testing.assert_array_equal(
        block, [[0.25, 1, 0.25, 1], [0.5, 1, 0.5, 0], [1, 0, 0, 0], [0.25, 1, 0.25, 1]]
    )


def test_newmark_step_example(newmark_glm):
    Y, y1 = glm.glm_step(newmark_glm, 1.0, 1.0, [0.0, -1.0, 1.0])
    assert Y[0] == pytest.approx(0.6, abs=1e-15)
    np.testing.assert_allclose(y1, [-0.8, -0.6, 0.6], atol=1e-15)


def test_newmark_step_equivalence(newmark_glm, rng):
    p = newmark.NewmarkParams.average_acceleration()
    worst = 0.0
    for _ in range(50):
        lam, dt = rng.uniform(0.1, 5), rng.uniform(0.01, 1.5)
        u, v = rng.normal(size=2)
        Y, y1 = glm.glm_step(newmark_glm, lam, dt, [dt * v, -dt * dt * lam * u, u])
        s = newmark.newmark_step(p, lam, dt, newmark.PairState(u, v))
        worst = max(worst, abs(Y[0] - s.u), abs(y1[2] - s.u), abs(y1[0] / dt - s.v), abs(y1[1] + dt * dt * lam * s.u))
    assert worst <= 1e-12


def test_step_linearity_and_propagator(p1_glm, rng):
    lam, dt = 2.0, 0.3
    y, z = rng.normal(size=(2, 4))
    _, a = glm.glm_step(p1_glm, lam, dt, y)
    _, b = glm.glm_step(p1_glm, lam, dt, z)
    _, c = glm.glm_step(p1_glm, lam, dt, 2 * y - 3 * z)
    np.testing.assert_allclose(c, 2 * a - 3 * b, atol=1e-12)
    np.testing.assert_allclose(glm.glm_propagator(p1_glm, lam, dt) @ y, a, atol=1e-12)


def test_singular_implicit_block():
    m = glm.GeneralLinearMethod(A=[[-1.0]], U=[[1.0]], B=[[1.0]], V=[[1.0]])
    with pytest.raises(SingularImplicitBlock):
        glm.glm_step(m, 1.0, 1.0, [1.0])


def test_method_shape_validation():
    with pytest.raises(ValueError):
        glm.GeneralLinearMethod(A=[[1.0]], U=[[1.0, 2.0]], B=[[1.0]], V=[[1.0]])


# --- zero stability -----------------------------------------------------------


@pytest.mark.parametrize(
    "V, expected",
    [
        (glm.newmark_as_glm().V, True),
        (np.eye(3), False),
        (np.diag([0.5, -0.5]), True),
        (np.diag([1.0, -1.0]), True),
        (np.diag([1.0000001, 0.0]), False),
    ],
)
def test_zero_stability(V, expected):
    assert glm.zero_stability(V) is expected


def test_newmark_v_eigenvalues(newmark_glm):
    vals = np.linalg.eigvals(newmark_glm.V)
    assert set(np.round(vals.real, 12)) == {0.0, 1.0}


@pytest.mark.parametrize("V", [glm.newmark_as_glm().V, np.diag([0.5, -0.5]), np.diag([1.0, -1.0])])
def test_zero_stable_means_power_bounded(V):
    # a double eigenvalue on the circle allows linear growth, nothing faster
    assert glm.zero_stability(V)
    P = np.eye(len(V))
    growth = 0.0
    for n in range(1, 1001):
        P = P @ V
        growth = max(growth, np.linalg.norm(P, 2) / (1 + n))
    assert growth <= 10.0


# --- classical order conditions --------------------------------------------


def test_newmark_order_conditions(newmark_glm):
    qv = glm.QVectors(NEWMARK_Q, [1.0])
    rows = glm.order_condition_residuals(newmark_glm, qv, 3)
    assert {r.kind for r in rows} == {"stage", "output"}
    assert max(r.residual for r in rows) <= 1e-13


def test_newmark_q4_does_not_exist(newmark_glm):
    qv = glm.QVectors(NEWMARK_Q, [1.0])
    _, residual = glm.best_fit_q(newmark_glm, qv, 4)
    assert residual > 1e-2


def test_best_fit_recovers_q3(newmark_glm):
    qv = glm.QVectors(NEWMARK_Q[:3], [1.0])
    q3, residual = glm.best_fit_q(newmark_glm, qv, 3)
    assert residual <= glm.EXISTENCE_TOL
    np.testing.assert_allclose(q3, NEWMARK_Q[3], atol=1e-12)


def test_preconsistency_for_eigenvector():
    V = np.array([[0.5, 0.5], [0.5, 0.5]])
    m = glm.GeneralLinearMethod(A=[[0.0]], U=[[1.0, 1.0]], B=[[0.0], [0.0]], V=V)
    rows = glm.order_condition_residuals(m, glm.QVectors(([0.5, 0.5],), [0.0]), 0)
    out = [r for r in rows if r.kind == "output" and r.k == 0]
    assert out[0].residual == pytest.approx(0.0, abs=1e-15)


# --- DG2 embedding ------------------------------------------------------------


def test_p1_embedding_matrices(p1_glm):
    ex = dg2.dg2_expansion(1, Fraction(1, 2))
    assert ex.alpha == (-2.0, -0.5)
    np.testing.assert_allclose(p1_glm.A, 0.25 * np.eye(2))
    np.testing.assert_allclose(p1_glm.U, np.hstack([ex.G[0] / -2.0, np.eye(2)]))
    np.testing.assert_allclose(p1_glm.V[:2], np.hstack([ex.G[0] / -2.0, np.eye(2)]))
    np.testing.assert_array_equal(p1_glm.V[2:], np.zeros((2, 4)))


def test_p1_embedding_spectrum(p1_glm):
    G = glm.glm_propagator(p1_glm, 1.0, 1.0)
    vals = sorted(np.linalg.eigvals(G), key=abs)
    np.testing.assert_allclose(np.abs(vals[:2]), 0.0, atol=1e-7)
    np.testing.assert_allclose(np.abs(vals[2:]), 1.0, atol=1e-12)
    gamma = (2 + 1j) ** 2 / 5
    assert min(abs(v - gamma) for v in vals) <= 1e-12


@pytest.mark.parametrize("r", [1, 2, 3])
@pytest.mark.parametrize("a", [Fraction(0), Fraction(1, 2)])
def test_embedding_reproduces_dg2(r, a, rng):
    m = dg2.dg2_glm(r, a)
    for _ in range(20):
        lam, dt = rng.uniform(0.1, 4), rng.uniform(0.05, 1.0)
        G = dg2.assemble(dg2.DG2Config(r, lam, dt, float(a))).G
        u = rng.normal(size=r + 1)
        Y, y = glm.glm_step(m, lam, dt, dg2.glm_history(r, a, lam, dt, u))
        np.testing.assert_allclose(y[: r + 1], G @ u, atol=1e-11)


def test_zero_alpha_zero():
    P = [[glm.MuPolynomial((Fraction(0), Fraction(1))), glm.MuPolynomial((Fraction(1),))], [glm.MuPolynomial((Fraction(1),)), glm.MuPolynomial((Fraction(1),))]]
    Z = [[glm.MuPolynomial((Fraction(1),))] * 2] * 2
    # det = mu - 1, scaled away from zero: fine
    glm.dg2_as_glm(P, Z)
    with pytest.raises(ZeroAlphaZero):
        zero = [[glm.MuPolynomial((Fraction(0),))] * 2] * 2
        glm.dg2_as_glm(zero, Z)


# --- extended order conditions -------------------------------------------------


def test_extended_conditions_through_two(p1_glm):
    qv = glm.QVectors(P1_Q, [0.0, 1.0])
    T, theta = glm.extended_order_residuals(p1_glm, qv, 2, 2)
    assert max(T + theta) <= 1e-12
    np.testing.assert_allclose(glm.u_hat(p1_glm) @ P1_Q[0], 1.0)


def test_extended_q3_exists(p1_glm):
    # q3 = (-1/6, 0, 0, -1/4) satisfies every condition at j = 3
    qv = glm.QVectors(P1_Q, [0.0, 1.0]).extended([-1 / 6, 0.0, 0.0, -0.25])
    T, theta = glm.extended_order_residuals(p1_glm, qv, 3, 3)
    assert max(T + theta) <= 1e-12
    _, residual = glm.best_fit_extended_q(p1_glm, glm.QVectors(P1_Q, [0.0, 1.0]), 3)
    assert residual <= glm.EXISTENCE_TOL


@pytest.mark.parametrize("x", [-1.0, 0.0, 0.5])
def test_extended_q4_does_not_exist(p1_glm, x):
    qv = glm.QVectors(P1_Q, [0.0, 1.0]).extended([x, x + 1 / 6, 0.0, -0.25])
    _, theta_only = glm.best_fit_extended_q(p1_glm, qv, 4, include_T=False)
    _, with_T = glm.best_fit_extended_q(p1_glm, qv, 4)
    assert theta_only == pytest.approx(1 / 6, abs=1e-9)
    assert with_T >= 1 / 6 - 1e-9


def test_winv_expansion_p1_half(p1_glm):
    def winv(h):
        G = glm.glm_propagator(p1_glm, 1.0, h)
        return glm.eigenbasis(G, kernel_basis=P1_KERNEL, normalize="last").Winv

    W0, W1 = glm.winv_expansion(winv, h=1e-2)
    W0e = np.zeros((4, 4))
    W0e[0, 2] = W0e[1, 3] = 1.0
    W1e = 3j / 8 * np.array([[0] * 4, [0] * 4, [-1, 1, -1, 1], [1, -1, 1, -1]])
    # the nonzero-eigenvalue rows may come in either conjugate order
    swap = [0, 1, 3, 2]
    ok = np.allclose(glm.clean_matrix(W1), W1e, atol=1e-4) or np.allclose(glm.clean_matrix(W1)[swap], W1e, atol=1e-4)
    assert ok
    assert np.allclose(W0[:2], W0e[:2], atol=1e-6)


def test_weighted_levels(p1_glm, rng):
    x, y, x0, y0, x1, y1 = rng.normal(size=6)
    qv = glm.QVectors(P1_Q, [0.0, 1.0]).extended(
        [x, y, 0.0, -0.25], [x0, y0, 1 / 8, -0.25], [x1, y1, 1 / 24 + x / 4 - y / 2, 5 * y / 4 - x / 2]
    )
    W0 = np.zeros((4, 4))
    W0[0, 2] = W0[1, 3] = 1.0
    W1 = 3j / 8 * np.array([[0] * 4, [0] * 4, [-1, 1, -1, 1], [1, -1, 1, -1]])
    levels = glm.certified_levels(p1_glm, qv, [W0, W1])
    assert levels == [5, 3]
    assert glm.weighted_order(levels) == 5
    rows = glm.weighted_order_residuals(p1_glm, qv, [W0, W1], [2, 2])
    assert max(r.residual for r in rows) <= 1e-12


def test_p1_half_slab_consistency_order(ref_problem):
    rep = analysis.consistency_sweep(1, 0.5, ref_problem, analysis.default_dts())
    assert abs(rep.winv_theta_order - 3.0) <= 0.2
