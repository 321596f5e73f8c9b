"""Discontinuous Galerkin time stepping for the second-order form ``u'' + lam u = 0``.

On each slab the solution is a degree-``r`` polynomial in a nodal Lagrange
basis on equispaced nodes, the last node being the right endpoint. The slab
recursion is ``A_+ u_{n+1} + A_- u_n = 0``, i.e. ``u_{n+1} = G u_n`` with
``G = -A_+^{-1} A_-``.

All entries of ``dt^2 A_+`` and ``dt^2 A_-`` are affine in ``mu = lam dt^2``
once the stabilization is written as ``s = a dt^2``, so ``G`` depends on
``(mu, a)`` only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

from . import glm, smallmat
from .errors import ModeUnavailable, SingularSlab, Unsupported
from .problem import Oscillator

DEGREES = (1, 2, 3)
INITIAL_MODES = ("exact_samples", "taylor", "newmark_T")


@dataclass(frozen=True)
class DG2Config:
    """Degree, stiffness, step and stabilization ``s = a dt^2``."""

    r: int
    lam: float
    dt: float
    a: float = 0.0

    def __post_init__(self):
        if self.r not in DEGREES:
            raise Unsupported(f"degree must be one of {DEGREES}, got {self.r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")

    @classmethod
    def from_s(cls, r: int, lam: float, dt: float, s: float) -> "DG2Config":
        return cls(r, lam, dt, s / dt**2)

    @property
    def s(self) -> float:
        return self.a * self.dt**2

    @property
    def s_mode(self) -> str:
        return "zero" if self.a == 0 else "a_dt2"

    @property
    def mu(self) -> float:
        return self.lam * self.dt**2

    def nodes(self) -> np.ndarray:
        """Offsets of the slab nodes relative to the left endpoint, in time units."""
        return reference_nodes(self.r) * self.dt


@dataclass(frozen=True)
class SlabSystem:
    Aminus: np.ndarray
    Aplus: np.ndarray
    G: np.ndarray
    cfg: DG2Config


def reference_nodes(r: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, r + 1)


# ---------------------------------------------------------------------------
# reference basis on [0, 1]


@lru_cache(maxsize=None)
def _basis_fractions(r: int):
    """Ascending Fraction coefficients of the nodal Lagrange basis on ``j / r``."""
    nodes = [Fraction(j, r) for j in range(r + 1)]
    basis = []
    for j, xj in enumerate(nodes):
        coeffs = [Fraction(1)]
        denom = Fraction(1)
        for m, xm in enumerate(nodes):
            if m == j:
                continue
            # multiply by (x - xm)
            coeffs = [Fraction(0)] + coeffs
            for k in range(len(coeffs) - 1):
                coeffs[k] -= xm * coeffs[k + 1]
            denom *= xj - xm
        basis.append(tuple(c / denom for c in coeffs))
    return tuple(basis)


def _fderiv(c):
    return tuple(k * c[k] for k in range(1, len(c)))


def _fmul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1) if p and q else []
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _fintegral01(c):
    return sum((ck / (k + 1) for k, ck in enumerate(c)), Fraction(0))


def _fvalue(c, x):
    return sum((ck * x**k for k, ck in enumerate(c)), Fraction(0))


@lru_cache(maxsize=None)
def reference_forms_exact(r: int):
    """Exact reference bilinear forms on ``[0, 1]``.

    Returns a dict of Fraction matrices indexed ``[test i][trial j]``:
    ``K2 = int psi_j'' psi_i'``, ``M1 = int psi_j psi_i'`` and the endpoint
    vectors ``v0, v1`` (values) and ``d0, d1`` (first derivatives).
    """
    B = _basis_fractions(r)
    D1 = [_fderiv(b) for b in B]
    D2 = [_fderiv(d) for d in D1]
    n = r + 1
    K2 = [[_fintegral01(_fmul(D2[j], D1[i])) for j in range(n)] for i in range(n)]
    M1 = [[_fintegral01(_fmul(B[j], D1[i])) for j in range(n)] for i in range(n)]
    v0 = [_fvalue(b, Fraction(0)) for b in B]
    v1 = [_fvalue(b, Fraction(1)) for b in B]
    d0 = [_fvalue(d, Fraction(0)) for d in D1]
    d1 = [_fvalue(d, Fraction(1)) for d in D1]
    return {"K2": K2, "M1": M1, "v0": v0, "v1": v1, "d0": d0, "d1": d1}


@lru_cache(maxsize=None)
def reference_forms(r: int):
    """Float reference forms assembled with ``r + 2`` Gauss-Legendre points."""
    x, w = leggauss(r + 2)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    polys = [Polynomial([float(c) for c in b]) for b in _basis_fractions(r)]
    P = np.array([p(x) for p in polys])
    P1 = np.array([p.deriv(1)(x) for p in polys])
    P2 = np.array([p.deriv(2)(x) if r >= 2 else np.zeros_like(x) for p in polys])
    K2 = (P1 * w) @ P2.T
    M1 = (P1 * w) @ P.T
    at = lambda polys_, y: np.array([p(y) for p in polys_])
    d_polys = [p.deriv(1) for p in polys]
    return {
        "K2": K2,
        "M1": M1,
        "v0": at(polys, 0.0),
        "v1": at(polys, 1.0),
        "d0": at(d_polys, 0.0),
        "d1": at(d_polys, 1.0),
    }


def scaled_slab_parts(r: int):
    """Constant and ``mu``-linear parts of ``dt^2 A_+`` and ``dt^2 A_-``.

    ``dt^2 A_+ = P0 + mu (P1 - (a/2) S0)`` and
    ``dt^2 A_- = M0 + mu (M1 - (a/2) S1)``.
    """
    f = reference_forms(r)
    v0, v1, d0, d1 = f["v0"], f["v1"], f["d0"], f["d1"]
    return {
        "P0": f["K2"] + np.outer(d0, d0),
        "P1": f["M1"] + np.outer(v0, v0),
        "S0": np.outer(d0, d0),
        "M0": -np.outer(d0, d1),
        "M1": -np.outer(v0, v1),
        "S1": np.outer(d0, d1),
    }


def assemble(cfg: DG2Config) -> SlabSystem:
    """Slab matrices and propagator.

    Raises
    ------
    SingularSlab
        If ``A_+`` is singular.
    """
    parts = scaled_slab_parts(cfg.r)
    mu, a, h2 = cfg.mu, cfg.a, cfg.dt**2
    Aplus = (parts["P0"] + mu * (parts["P1"] - 0.5 * a * parts["S0"])) / h2
    Aminus = (parts["M0"] + mu * (parts["M1"] - 0.5 * a * parts["S1"])) / h2
    num, den = _rational_propagator(cfg.r, float(cfg.a))
    d = np.polynomial.polynomial.polyval(mu, den)
    if abs(d) <= 1e-14 * np.abs(den).max():
        raise SingularSlab(f"slab determinant vanishes at mu={mu}")
    G = np.polynomial.polynomial.polyval(mu, num) / d
    return SlabSystem(Aminus=Aminus, Aplus=Aplus, G=G, cfg=cfg)


@lru_cache(maxsize=256)
def _rational_propagator(r: int, a: float):
    """Float coefficients of ``G = N(mu) / d(mu)`` from exact elimination.

    Forming ``-A_+^{-1} A_-`` by LU loses digits in proportion to
    ``cond(A_+) ~ dt^-2``, which for ``r = 3`` already spoils the error
    level on the standard step grid. The exact rational form does not.
    """
    ex = dg2_expansion(r, a)
    num = np.array([ex.G[0]] + [-Gk for Gk in ex.G[1:]])
    den = np.array(ex.alpha)
    return num, den


def propagator(r: int, mu: float, a: float = 0.0) -> np.ndarray:
    """``G`` as a function of ``mu = lam dt^2`` and ``a``."""
    return assemble(DG2Config(r, mu, 1.0, a)).G


def dg2_step(sys: SlabSystem, u) -> np.ndarray:
    return sys.G @ np.asarray(u)


def march(sys: SlabSystem, u0, steps: int) -> np.ndarray:
    """Slab vectors ``u_0..u_steps`` as rows."""
    out = np.empty((steps + 1, sys.G.shape[0]))
    out[0] = u0
    for n in range(steps):
        out[n + 1] = sys.G @ out[n]
    return out


# ---------------------------------------------------------------------------
# mu-polynomial assembly and the GLM embedding


def mu_slab_polynomials(r: int, a=Fraction(0)):
    """``dt^2 A_+`` and ``dt^2 A_-`` as matrices of exact ``MuPolynomial``."""
    a = glm.to_fraction(a)
    f = reference_forms_exact(r)
    n = r + 1
    v0, v1, d0, d1 = f["v0"], f["v1"], f["d0"], f["d1"]
    Ap0 = [[f["K2"][i][j] + d0[i] * d0[j] for j in range(n)] for i in range(n)]
    Ap1 = [[f["M1"][i][j] + v0[i] * v0[j] - a / 2 * d0[i] * d0[j] for j in range(n)] for i in range(n)]
    Am0 = [[-d0[i] * d1[j] for j in range(n)] for i in range(n)]
    Am1 = [[-v0[i] * v1[j] - a / 2 * d0[i] * d1[j] for j in range(n)] for i in range(n)]
    return glm.poly_matrix(Ap0, Ap1), glm.poly_matrix(Am0, Am1)


@lru_cache(maxsize=None)
def determinant_scale(r: int) -> Fraction:
    """Multiplier making the reduced ``a = 0`` determinant a primitive integer
    polynomial with negative constant term (``-mu - 2`` for ``r = 1``)."""
    Ap, _ = mu_slab_polynomials(r, Fraction(0))
    det = glm.poly_det(Ap)
    det = det.shift_down(det.valuation())
    coeffs = det.coeffs
    lcm = 1
    for c in coeffs:
        lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
    ints = [int(c * lcm) for c in coeffs]
    g = 0
    for v in ints:
        g = math.gcd(g, abs(v))
    scale = Fraction(lcm, g)
    if ints[0] > 0:
        scale = -scale
    return scale


def dg2_expansion(r: int, a=Fraction(0)) -> glm.SlabExpansion:
    Ap, Am = mu_slab_polynomials(r, a)
    return glm.slab_expansion(Ap, Am, determinant_scale(r))


def dg2_glm(r: int, a=Fraction(0)) -> glm.GeneralLinearMethod:
    """The GLM equivalent to DG2 of degree ``r`` with ``s = a dt^2``."""
    return glm.glm_from_expansion(dg2_expansion(r, a), name=f"dg2-p{r}-glm")


def glm_history(r: int, a, lam: float, dt: float, u) -> np.ndarray:
    """History vector ``[u, -sum_k mu^k G_k u / alpha_0]`` for a slab vector ``u``."""
    ex = dg2_expansion(r, a)
    mu = lam * dt * dt
    u = np.asarray(u, dtype=float)
    tail = -sum(mu**k * (ex.G[k] @ u) for k in range(1, len(ex.G))) / ex.alpha0
    return np.concatenate([u, tail])


# ---------------------------------------------------------------------------
# initial data, exact samples and truncation error


def exact_slab(cfg: DG2Config, prob: Oscillator, t_right: float) -> np.ndarray:
    """Exact solution sampled on the nodes of the slab ending at ``t_right``."""
    return prob.displacement(t_right - cfg.dt + cfg.nodes())


def newmark_map(cfg: DG2Config) -> np.ndarray:
    """``T`` sending a P1 slab ``(u_{n,1}, u_{n,2})`` to a Newmark state ``(u_n, v_n)``."""
    if cfg.r != 1:
        raise ModeUnavailable("the Newmark map exists for r = 1 only")
    mu, a, dt = cfg.mu, cfg.a, cfg.dt
    return np.array([[0.0, 1.0], [(-0.5 * a * mu - 1.0) / dt, (1.0 - 0.5 * (1.0 - a) * mu) / dt]])


def initial_slab(cfg: DG2Config, prob: Oscillator, mode: str = "exact_samples") -> np.ndarray:
    """Slab vector ``u_0`` on ``(-dt, 0]``.

    Modes
    -----
    exact_samples
        Nodal samples of the exact solution, so the initial error vanishes.
    taylor
        Samples of the degree-``r`` Taylor polynomial at ``t = 0``.
    newmark_T
        ``T^{-1} (u0, v0)``; only for ``r = 1``.
    """
    if mode == "exact_samples":
        return exact_slab(cfg, prob, 0.0)
    if mode == "taylor":
        t = cfg.nodes() - cfg.dt
        out = np.zeros_like(t)
        for k in range(cfg.r + 1):
            m = k // 2
            dk = (-prob.lam) ** m * (prob.u0 if k % 2 == 0 else prob.v0)
            out += dk * t**k / math.factorial(k)
        return out
    if mode == "newmark_T":
        T = newmark_map(cfg)
        return smallmat.solve(T, np.array([prob.u0, prob.v0]))
    raise ValueError(f"unknown initial mode {mode!r}; expected one of {INITIAL_MODES}")


def truncation_vector(sys: SlabSystem, prob: Oscillator, t_n: float, eigen=None):
    """``theta_n = u^ex_{n+1} - G u^ex_n`` and ``W^{-1} theta_n``.

    ``u^ex_n`` samples the exact solution on the slab ending at ``t_n``.
    """
    cfg = sys.cfg
    theta = exact_slab(cfg, prob, t_n + cfg.dt) - sys.G @ exact_slab(cfg, prob, t_n)
    if eigen is None:
        eigen = smallmat.eig(sys.G)
    return theta, eigen.Winv @ theta


def propagator_spectrum(cfg: DG2Config):
    """Spectral radius and eigen-decomposition of ``G``."""
    G = assemble(cfg).G
    eigen = smallmat.eig(G)
    return float(np.max(np.abs(eigen.eigenvalues))), eigen


def p1_eigenvalues(lam: float, dt: float, a: float) -> np.ndarray:
    """Closed-form eigenvalues of the P1 propagator."""
    disc = complex((4 * a * a - 4 * a + 1) * dt**2 * lam**2 - 16 * lam)
    root = dt * np.sqrt(disc)
    den = 2 * (a - 1) * dt**2 * lam - 4
    return np.array([(root + dt**2 * lam - 4) / den, (-root + dt**2 * lam - 4) / den])


def p1_unstable_window(x: float):
    """Interval of ``a`` where the P1 propagator has ``rho > 1`` at ``x = sqrt(lam) dt``."""
    return 0.5, 0.5 + 2.0 / x
