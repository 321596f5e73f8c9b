"""Discontinuous Galerkin time stepping for the first-order system ``z' = L z``.

The slab unknowns are the ``(u, w)`` pairs at the Gauss-Lobatto-Legendre
nodes of the slab, interleaved node by node. Mass-type terms are integrated
with the same GLL rule, which is inexact for the products of two degree-``r``
polynomials; this lumping is what makes the scheme coincide with Lobatto IIIC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial

from . import smallmat
from .errors import DuplicateNodes, SingularK, SingularMatrix, Unsupported
from .irk import ButcherTableau, oscillator_matrix
from .problem import Oscillator

DEGREES = (1, 2, 3)


@dataclass(frozen=True)
class DG1Config:
    r: int
    lam: float
    dt: float

    def __post_init__(self):
        if self.r not in DEGREES:
            raise Unsupported(f"degree must be one of {DEGREES}, got {self.r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def L(self) -> np.ndarray:
        return oscillator_matrix(self.lam)


@dataclass(frozen=True)
class DG1SlabSystem:
    N0: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    N3: np.ndarray
    N4: np.ndarray
    N5: np.ndarray
    Bminus: np.ndarray
    Bplus: np.ndarray
    K: np.ndarray
    cfg: DG1Config


def gll_rule(r: int):
    """GLL nodes and weights mapped to ``[0, 1]`` (weights sum to one)."""
    if r == 1:
        x = [-1.0, 1.0]
        w = [1.0, 1.0]
    elif r == 2:
        x = [-1.0, 0.0, 1.0]
        w = [1 / 3, 4 / 3, 1 / 3]
    elif r == 3:
        x = [-1.0, -1 / math.sqrt(5.0), 1 / math.sqrt(5.0), 1.0]
        w = [1 / 6, 5 / 6, 5 / 6, 1 / 6]
    else:
        raise Unsupported(f"GLL rule provided for r in {DEGREES}, got {r}")
    return 0.5 * (np.array(x) + 1.0), 0.5 * np.array(w)


def lagrange_basis(nodes) -> list[Polynomial]:
    nodes = np.asarray(nodes, dtype=float)
    if len(np.unique(nodes)) != len(nodes):
        raise DuplicateNodes("interpolation nodes must be distinct")
    basis = []
    for j, xj in enumerate(nodes):
        others = np.delete(nodes, j)
        p = Polynomial.fromroots(others) if len(others) else Polynomial([1.0])
        basis.append(p / p(xj))
    return basis


@lru_cache(maxsize=None)
def _reference(r: int):
    c, w = gll_rule(r)
    basis = lagrange_basis(c)
    n = r + 1
    N0 = np.zeros((n, n))
    N0[0, -1] = -1.0
    # the GLL rule integrates psi_j' psi_i (degree 2r-1) exactly
    D = np.array([[p.deriv()(x) for x in c] for p in basis])
    N1 = np.diag(w) @ D.T
    N2 = np.diag(w)
    N3 = np.zeros((n, n))
    N3[0, 0] = 1.0
    return N0, N1, N2, N3


def assemble_dg1(cfg: DG1Config) -> DG1SlabSystem:
    """N^0..N^5, ``B_-``, ``B_+`` and ``K = I - N^4 (x) L``.

    Raises
    ------
    SingularK
        If ``K`` is singular.
    """
    N0, N1, N2u, N3 = _reference(cfg.r)
    N2 = cfg.dt * N2u
    S = N1 + N3
    N4 = smallmat.solve(S, N2)
    N5 = smallmat.solve(S, N0)
    L = cfg.L
    I2 = np.eye(2)
    Bminus = smallmat.kron(N0, I2)
    Bplus = smallmat.kron(S, I2) - smallmat.kron(N2, L)
    K = np.eye(2 * (cfg.r + 1)) - smallmat.kron(N4, L)
    sv = np.linalg.svd(K, compute_uv=False)
    if sv[-1] <= 1e-14 * sv[0]:
        raise SingularK("slab system matrix is singular")
    return DG1SlabSystem(N0, N1, N2, N3, N4, N5, Bminus, Bplus, K, cfg)


def dg1_step(sys: DG1SlabSystem, zhat) -> np.ndarray:
    """Solve ``K z_{n+1} = -(N^5 (x) I_2) z_n``."""
    rhs = -smallmat.kron(sys.N5, np.eye(2)) @ np.asarray(zhat, dtype=float)
    try:
        return smallmat.solve(sys.K, rhs)
    except SingularMatrix as exc:
        raise SingularK(str(exc)) from exc


def march(sys: DG1SlabSystem, z0, steps: int) -> np.ndarray:
    """Slab vectors ``z_0..z_steps`` as rows."""
    out = np.empty((steps + 1, len(z0)))
    out[0] = z0
    # the step is linear; build its matrix once
    M = smallmat.solve(sys.K, -smallmat.kron(sys.N5, np.eye(2)))
    for n in range(steps):
        out[n + 1] = M @ out[n]
    return out


def last_pair(zhat) -> np.ndarray:
    return np.asarray(zhat)[-2:]


def initial_slab_dg1(prob: Oscillator, r: int) -> np.ndarray:
    """Every node pair set to ``(u0, v0)``; only the last one is read by a step."""
    return np.tile([prob.u0, prob.v0], r + 1).astype(float)


def exact_slab(cfg: DG1Config, prob: Oscillator, t_left: float) -> np.ndarray:
    c, _ = gll_rule(cfg.r)
    t = t_left + c * cfg.dt
    return np.column_stack([prob.displacement(t), prob.velocity(t)]).ravel()


def tableau_from_nodes(c, b) -> ButcherTableau:
    """Runge-Kutta tableau induced by DG1 on the quadrature ``(c, b)``.

    ``a_i1 = b_1`` and ``a_ij = int_0^{c_i} l_j - b_1 l_j(c_1)`` for
    ``j >= 2``, where ``l_2..l_s`` is the Lagrange basis on ``c_2..c_s``.
    """
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(np.unique(c)) != len(c):
        raise DuplicateNodes("quadrature nodes must be distinct")
    if abs(c[0]) > 1e-14:
        raise ValueError("the first node must be 0")
    s = len(c)
    A = np.zeros((s, s))
    A[:, 0] = b[0]
    ell = lagrange_basis(c[1:])
    for j, lj in enumerate(ell, start=1):
        Lj = lj.integ()
        for i in range(s):
            A[i, j] = Lj(c[i]) - Lj(0.0) - b[0] * lj(c[0])
    return ButcherTableau(A, b, c)


def gll_tableau(r: int) -> ButcherTableau:
    c, w = gll_rule(r)
    return tableau_from_nodes(c, w)


# ---------------------------------------------------------------------------
# extended precision marching


def _gll_rule_mp(r: int, mp):
    half = mp.mpf(1) / 2
    if r == 1:
        c, w = [0, 1], [half, half]
    elif r == 2:
        c, w = [0, half, 1], [mp.mpf(1) / 6, mp.mpf(2) / 3, mp.mpf(1) / 6]
    elif r == 3:
        d = mp.sqrt(5) / 10
        c = [0, half - d, half + d, 1]
        w = [mp.mpf(1) / 12, mp.mpf(5) / 12, mp.mpf(5) / 12, mp.mpf(1) / 12]
    else:
        raise Unsupported(f"GLL rule provided for r in {DEGREES}, got {r}")
    return [mp.mpf(x) for x in c], w


def _step_columns_mp(cfg: DG1Config, mp):
    """Last two columns of the step matrix ``-K^{-1} (N^5 (x) I_2)`` in ``mp`` precision."""
    c, w = _gll_rule_mp(cfg.r, mp)
    n = cfg.r + 1
    # derivative of the j-th Lagrange polynomial at node q
    D = mp.matrix(n, n)
    for j in range(n):
        for q in range(n):
            if q == j:
                D[j, q] = mp.fsum(1 / (c[j] - c[m]) for m in range(n) if m != j)
            else:
                num = mp.fprod(c[q] - c[m] for m in range(n) if m != q)
                den = mp.fprod(c[j] - c[m] for m in range(n) if m != j)
                D[j, q] = num / (den * (c[q] - c[j]))
    dt = mp.mpf(cfg.dt)
    lam = mp.mpf(cfg.lam)
    S = mp.matrix(n, n)
    for i in range(n):
        for j in range(n):
            S[i, j] = w[i] * D[j, i]
    S[0, 0] += 1
    N0 = mp.matrix(n, n)
    N0[0, n - 1] = -1
    N2 = mp.diag([dt * wi for wi in w])
    Sinv = mp.inverse(S)
    N4 = Sinv * N2
    N5 = Sinv * N0
    L = mp.matrix([[0, 1], [-lam, 0]])
    K = mp.eye(2 * n)
    R = mp.matrix(2 * n, 2 * n)
    for i in range(n):
        for j in range(n):
            for a in range(2):
                R[2 * i + a, 2 * j + a] = -N5[i, j]
                for b in range(2):
                    K[2 * i + a, 2 * j + b] -= N4[i, j] * L[a, b]
    M = mp.lu_solve(K, R[:, 2 * n - 2]), mp.lu_solve(K, R[:, 2 * n - 1])
    return M, c


def march_errors_extended(cfg: DG1Config, prob: Oscillator, steps: int, dps: int = 40):
    """Max slab error and final-time error computed with ``dps`` decimal digits.

    At ``r = 3`` the final-time error on fine grids sits far below the
    accumulated rounding of a double-precision march, so the convergence
    harness can switch to this path.
    """
    import mpmath

    with mpmath.workdps(dps):
        (m1, m2), c = _step_columns_mp(cfg, mpmath.mp)
        n2 = 2 * (cfg.r + 1)
        om = mpmath.sqrt(mpmath.mpf(prob.lam))
        u0, v0, dt = mpmath.mpf(prob.u0), mpmath.mpf(prob.v0), mpmath.mpf(cfg.dt)

        def exact(t):
            return u0 * mpmath.cos(om * t) + v0 / om * mpmath.sin(om * t), -u0 * om * mpmath.sin(om * t) + v0 * mpmath.cos(om * t)

        zu, zw = u0, v0
        worst = mpmath.mpf(0)
        for n in range(1, steps + 1):
            z = [m1[k] * zu + m2[k] * zw for k in range(n2)]
            t0 = (n - 1) * dt
            err2 = mpmath.mpf(0)
            for i, ci in enumerate(c):
                eu, ew = exact(t0 + ci * dt)
                err2 += (z[2 * i] - eu) ** 2 + (z[2 * i + 1] - ew) ** 2
            worst = max(worst, err2)
            zu, zw = z[-2], z[-1]
        eu, ew = exact(steps * dt)
        final = mpmath.sqrt((zu - eu) ** 2 + (zw - ew) ** 2)
        return float(mpmath.sqrt(worst)), float(final)
