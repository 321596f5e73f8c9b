"""General Linear Methods for ``u'' = f(u)`` with the linear right-hand side ``f(u) = -lam u``.

A step reads ``Y = dt^2 A f(Y) + U y`` and ``y_next = dt^2 B f(Y) + V y``.
With ``f = -lam`` and ``mu = lam dt^2`` this collapses to
``(I + mu A) Y = U y`` and ``y_next = V y - mu B Y``.

The module also turns a DG slab propagator whose entries are rational in
``mu`` into an equivalent GLM, and evaluates the order conditions of both
the classical and the extended (eigenvector-weighted) kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import smallmat
from .errors import SingularImplicitBlock, SingularMatrix, ZeroAlphaZero

EXISTENCE_TOL = 1e-6


# ---------------------------------------------------------------------------
# polynomials in mu


@dataclass(frozen=True)
class MuPolynomial:
    """Polynomial in ``mu = lam dt^2`` with ascending coefficients.

    Coefficients may be floats or ``Fraction`` values; arithmetic keeps
    whatever scalar type it is given, so exact elimination is possible.
    """

    coeffs: tuple = ()

    def __post_init__(self):
        c = list(self.coeffs)
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def constant(cls, value) -> "MuPolynomial":
        return cls((value,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def coefficient(self, k: int):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0

    def valuation(self) -> int:
        """Lowest power with a nonzero coefficient."""
        for k, c in enumerate(self.coeffs):
            if c != 0:
                return k
        raise ValueError("zero polynomial has no valuation")

    def shift_down(self, m: int) -> "MuPolynomial":
        if any(c != 0 for c in self.coeffs[:m]):
            raise ValueError(f"polynomial is not divisible by mu^{m}")
        return MuPolynomial(self.coeffs[m:])

    def __call__(self, mu):
        out = 0
        for c in reversed(self.coeffs):
            out = out * mu + c
        return out

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return MuPolynomial(tuple(self.coefficient(k) + other.coefficient(k) for k in range(n)))

    __radd__ = __add__

    def __neg__(self):
        return MuPolynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        if self.is_zero() or other.is_zero():
            return MuPolynomial()
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return MuPolynomial(tuple(out))

    __rmul__ = __mul__

    def __repr__(self):
        return f"MuPolynomial({list(self.coeffs)})"


def _as_poly(x) -> MuPolynomial:
    return x if isinstance(x, MuPolynomial) else MuPolynomial.constant(x)


def poly_matrix(P0, P1=None):
    """Matrix of ``MuPolynomial`` with entries ``P0[i][j] + mu P1[i][j]``."""
    n, m = len(P0), len(P0[0])
    return [
        [MuPolynomial((P0[i][j],) if P1 is None else (P0[i][j], P1[i][j])) for j in range(m)]
        for i in range(n)
    ]


def poly_det(M) -> MuPolynomial:
    """Determinant by cofactor expansion along the first row."""
    n = len(M)
    if n == 1:
        return _as_poly(M[0][0])
    total = MuPolynomial()
    for j in range(n):
        if _as_poly(M[0][j]).is_zero():
            continue
        minor = [row[:j] + row[j + 1 :] for row in M[1:]]
        term = _as_poly(M[0][j]) * poly_det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def poly_adjugate(M):
    """Transpose of the cofactor matrix, so that ``adj(M) M = det(M) I``."""
    n = len(M)
    if n == 1:
        return [[MuPolynomial.constant(1)]]
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1 :] for k, row in enumerate(M) if k != i]
            cof = poly_det(minor)
            adj[j][i] = cof if (i + j) % 2 == 0 else -cof
    return adj


def poly_matmul(X, Y):
    n, k, m = len(X), len(Y), len(Y[0])
    return [[sum((_as_poly(X[i][l]) * _as_poly(Y[l][j]) for l in range(k)), MuPolynomial()) for j in range(m)] for i in range(n)]


def poly_matrix_eval(M, mu) -> np.ndarray:
    return np.array([[float(p(mu)) for p in row] for row in M])


def poly_matrix_coefficient(M, k) -> np.ndarray:
    return np.array([[float(_as_poly(p).coefficient(k)) for p in row] for row in M])


# ---------------------------------------------------------------------------
# methods and stepping


@dataclass(frozen=True)
class GeneralLinearMethod:
    A: np.ndarray
    U: np.ndarray
    B: np.ndarray
    V: np.ndarray
    name: str = "glm"

    def __post_init__(self):
        A, U, B, V = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (self.A, self.U, self.B, self.V))
        s, r = A.shape[0], V.shape[0]
        if A.shape != (s, s) or U.shape != (s, r) or B.shape != (r, s) or V.shape != (r, r):
            raise ValueError(f"inconsistent GLM shapes A{A.shape} U{U.shape} B{B.shape} V{V.shape}")
        for name, M in zip("AUBV", (A, U, B, V)):
            object.__setattr__(self, name, M)

    @property
    def s(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.V.shape[0]


@dataclass(frozen=True)
class QVectors:
    """Taylor weights ``q_0, q_1, ...`` of the history vector and stage nodes ``c``."""

    q: tuple
    c: np.ndarray

    def __post_init__(self):
        q = tuple(np.asarray(v, dtype=complex if np.iscomplexobj(v) else float) for v in self.q)
        if q and any(v.shape != q[0].shape for v in q):
            raise ValueError("all q vectors must have the same length")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "c", np.atleast_1d(np.asarray(self.c, dtype=float)))

    def __len__(self):
        return len(self.q)

    def extended(self, *more) -> "QVectors":
        return QVectors(self.q + tuple(more), self.c)


def _implicit_block(m: GeneralLinearMethod, mu: float) -> np.ndarray:
    return np.eye(m.s) + mu * m.A


def glm_step(m: GeneralLinearMethod, lam: float, dt: float, y):
    """One step; returns the stage vector ``Y`` and the new history ``y``."""
    mu = lam * dt * dt
    y = np.asarray(y)
    try:
        Y = smallmat.solve(_implicit_block(m, mu), m.U @ y)
    except SingularMatrix as exc:
        raise SingularImplicitBlock(str(exc)) from exc
    return Y, m.V @ y - mu * (m.B @ Y)


def glm_propagator(m: GeneralLinearMethod, lam: float, dt: float) -> np.ndarray:
    """``G_GLM = V - mu B (I + mu A)^{-1} U``."""
    mu = lam * dt * dt
    try:
        X = smallmat.solve(_implicit_block(m, mu), m.U)
    except SingularMatrix as exc:
        raise SingularImplicitBlock(str(exc)) from exc
    return m.V - mu * (m.B @ X)


def _eigen_clusters(vals: np.ndarray, tol: float):
    clusters: list[list[complex]] = []
    for z in vals:
        for cl in clusters:
            if abs(z - np.mean(cl)) <= tol:
                cl.append(z)
                break
        else:
            clusters.append([z])
    return [(complex(np.mean(cl)), len(cl)) for cl in clusters]


def zero_stability(V, tol: float = 1e-10, cluster_tol: float = 1e-6) -> bool:
    """Eigenvalues of ``V`` in the closed unit disc, at most double on the circle.

    Nearly equal eigenvalues are clustered first; a defective eigenvalue is
    split by roughly the square root of rounding error, hence the looser
    clustering tolerance.
    """
    vals = np.linalg.eigvals(np.atleast_2d(np.asarray(V, dtype=float)))
    for z, mult in _eigen_clusters(vals, cluster_tol):
        modulus = abs(z)
        if modulus > 1 + tol:
            return False
        if abs(modulus - 1) <= tol and mult > 2:
            return False
    return True


def newmark_as_glm() -> GeneralLinearMethod:
    """Average-acceleration Newmark with history ``[dt v, dt^2 f(u), u]``."""
    return GeneralLinearMethod(
        A=[[0.25]],
        U=[[1.0, 0.25, 1.0]],
        B=[[0.5], [1.0], [0.25]],
        V=[[1.0, 0.5, 0.0], [0.0, 0.0, 0.0], [1.0, 0.25, 1.0]],
        name="newmark-glm",
    )


# ---------------------------------------------------------------------------
# classical order conditions


@dataclass(frozen=True)
class ConditionRow:
    kind: str
    k: int
    residual: float

    def passes(self, tol: float) -> bool:
        return self.residual <= tol


def _stage_target(m: GeneralLinearMethod, c: np.ndarray, k: int) -> np.ndarray:
    # right-hand side of the stage condition once U q_k is moved left
    t = c**k / math.factorial(k)
    if k >= 2:
        t = t - m.A @ (c ** (k - 2) / math.factorial(k - 2))
    return t


def _output_target(m: GeneralLinearMethod, q: Sequence[np.ndarray], c: np.ndarray, k: int) -> np.ndarray:
    # everything except V q_k - q_k
    t = sum(q[k - l] / math.factorial(l) for l in range(1, k + 1)) if k >= 1 else np.zeros_like(q[0])
    if k >= 2:
        t = t - m.B @ (c ** (k - 2) / math.factorial(k - 2))
    return t


def order_condition_residuals(m: GeneralLinearMethod, qv: QVectors, p: int) -> list[ConditionRow]:
    """Residual norms of the stage and output conditions for ``k = 0..p``."""
    if len(qv) <= p:
        raise ValueError(f"need q_0..q_{p}, got {len(qv)} vectors")
    rows = []
    for k in range(p + 1):
        stage = m.U @ qv.q[k] - _stage_target(m, qv.c, k)
        out = m.V @ qv.q[k] - qv.q[k] - _output_target(m, qv.q, qv.c, k)
        rows.append(ConditionRow("stage", k, float(np.linalg.norm(stage))))
        rows.append(ConditionRow("output", k, float(np.linalg.norm(out))))
    return rows


def best_fit_q(m: GeneralLinearMethod, qv: QVectors, k: int):
    """Least-squares ``q_k`` given ``q_0..q_{k-1}``; returns ``(q_k, residual)``.

    A residual above ``EXISTENCE_TOL`` certifies that no exact ``q_k`` exists.
    """
    q = list(qv.q[:k]) + [np.zeros(m.r)]
    M = np.vstack([m.U, m.V - np.eye(m.r)])
    rhs = np.concatenate([_stage_target(m, qv.c, k), _output_target(m, q, qv.c, k)])
    x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return x, float(np.linalg.norm(M @ x - rhs))


# ---------------------------------------------------------------------------
# DG slab propagator as a GLM


@dataclass(frozen=True)
class SlabExpansion:
    """``G = (G_0 - sum_k mu^k G_k) / d`` with ``d = sum_k alpha_k mu^k``."""

    alpha: tuple
    G: tuple = field(repr=False)

    @property
    def alpha0(self):
        return self.alpha[0]

    @property
    def order(self) -> int:
        return max(len(self.alpha), len(self.G)) - 1


def slab_expansion(Aplus_mu, Aminus_mu, scale=1) -> SlabExpansion:
    """Expand ``G = -A_+^{-1} A_-`` for polynomial slab matrices.

    A common factor ``mu^m`` shared by ``det A_+`` and ``-adj(A_+) A_-`` is
    removed, then both are multiplied by ``scale``.
    """
    det = poly_det(Aplus_mu)
    if det.is_zero():
        raise ZeroAlphaZero("slab determinant vanishes identically")
    num = poly_matmul(poly_adjugate(Aplus_mu), Aminus_mu)
    num = [[-p for p in row] for row in num]
    m = det.valuation()
    num = [[p.shift_down(m) if not p.is_zero() else p for p in row] for row in num]
    det = det.shift_down(m) * scale
    num = [[p * scale for p in row] for row in num]
    if det.coefficient(0) == 0:
        raise ZeroAlphaZero("alpha_0 = 0")
    N = max(det.degree, max(p.degree for row in num for p in row))
    G = tuple(
        np.array([[float(p.coefficient(k)) * (1 if k == 0 else -1) for p in row] for row in num])
        for k in range(N + 1)
    )
    alpha = tuple(float(det.coefficient(k)) for k in range(N + 1))
    return SlabExpansion(alpha=alpha, G=G)


def glm_from_expansion(ex: SlabExpansion, name: str = "dg2-glm") -> GeneralLinearMethod:
    a0 = ex.alpha0
    if a0 == 0:
        raise ZeroAlphaZero("alpha_0 = 0")
    n = ex.G[0].shape[0]
    N = max(ex.order, 1)
    I = np.eye(n)
    A = np.zeros((N * n, N * n))
    for k in range(1, N + 1):
        ak = ex.alpha[k] if k < len(ex.alpha) else 0.0
        A[:n, (k - 1) * n : k * n] = ak / a0 * I
    for k in range(1, N):
        A[k * n : (k + 1) * n, (k - 1) * n : k * n] = -I
    U = np.zeros((N * n, 2 * n))
    U[:n, :n] = ex.G[0] / a0
    U[:n, n:] = I
    B = np.zeros((2 * n, N * n))
    for k in range(1, N + 1):
        ak = ex.alpha[k] if k < len(ex.alpha) else 0.0
        Gk = ex.G[k] if k < len(ex.G) else np.zeros((n, n))
        B[:n, (k - 1) * n : k * n] = ak / a0 * I
        B[n:, (k - 1) * n : k * n] = Gk / a0
    V = np.zeros((2 * n, 2 * n))
    V[:n, :n] = ex.G[0] / a0
    V[:n, n:] = I
    return GeneralLinearMethod(A=A, U=U, B=B, V=V, name=name)


def dg2_as_glm(Aplus_mu, Aminus_mu, scale=1) -> GeneralLinearMethod:
    """GLM equivalent to ``u_{n+1} = G u_n`` for polynomial slab matrices.

    Parameters
    ----------
    Aplus_mu, Aminus_mu : list of lists of MuPolynomial
        ``dt^2 A_+`` and ``dt^2 A_-`` with entries polynomial in ``mu``.
    scale : scalar
        Multiplier fixing the normalization of ``d``; it does not change
        ``G`` but does change the individual ``alpha_k`` and ``G_k``.

    Raises
    ------
    ZeroAlphaZero
        If the constant term of the reduced determinant vanishes.
    """
    return glm_from_expansion(slab_expansion(Aplus_mu, Aminus_mu, scale))


def history_block(m: GeneralLinearMethod) -> int:
    """Length of the solution part ``u_n`` inside ``y``."""
    return m.r // 2


def u_hat(m: GeneralLinearMethod) -> np.ndarray:
    """First block row ``[G_0 / alpha_0, I]`` of ``U``."""
    return m.U[: history_block(m), :]


def _alphas_from_glm(m: GeneralLinearMethod) -> list:
    # alpha_k / alpha_0 sit on the diagonal of the first block row of A
    n = history_block(m)
    N = m.s // n
    return [m.A[0, (k - 1) * n] for k in range(1, N + 1)]


def _theta_target(m: GeneralLinearMethod, q: Sequence[np.ndarray], j: int) -> np.ndarray:
    # everything except V q_j - q_j
    t = sum(q[j - l] / math.factorial(l) for l in range(1, j + 1)) if j >= 1 else np.zeros_like(q[0])
    Ak = np.eye(m.s)
    for l in range(j // 2):
        t = t - (-1) ** l * (m.B @ (Ak @ (m.U @ q[j - 2 * l - 2])))
        Ak = Ak @ m.A
    return t


def _t_target(m: GeneralLinearMethod, c: np.ndarray, j: int) -> np.ndarray:
    t = c**j / math.factorial(j)
    ratios = _alphas_from_glm(m)
    for k in range(1, j // 2 + 1):
        if k <= len(ratios):
            t = t - ratios[k - 1] * c ** (j - 2 * k) / math.factorial(j - 2 * k)
    return t


def extended_theta_residual_vectors(m: GeneralLinearMethod, qv: QVectors, p: int) -> list[np.ndarray]:
    """Residual vectors ``V q_j - (expected)`` of the history conditions, ``j = 0..p``."""
    return [m.V @ qv.q[j] - qv.q[j] - _theta_target(m, qv.q, j) for j in range(p + 1)]


def extended_order_residuals(m: GeneralLinearMethod, qv: QVectors, p: int, a: int):
    """Residual norms of the stage (``T``) and history (``theta``) conditions.

    Returns
    -------
    T_residuals : list of float, ``j = 0..a``
    theta_residuals : list of float, ``j = 0..p``
    """
    Uh = u_hat(m)
    T = [float(np.linalg.norm(Uh @ qv.q[j] - _t_target(m, qv.c, j))) for j in range(a + 1)]
    theta = [float(np.linalg.norm(v)) for v in extended_theta_residual_vectors(m, qv, p)]
    return T, theta


def best_fit_extended_q(m: GeneralLinearMethod, qv: QVectors, j: int, include_T: bool = True):
    """Least-squares ``q_j`` for the extended conditions; returns ``(q_j, residual)``."""
    q = list(qv.q[:j]) + [np.zeros(m.r)]
    blocks = [m.V - np.eye(m.r)]
    rhs = [_theta_target(m, q, j)]
    if include_T:
        blocks.insert(0, u_hat(m))
        rhs.insert(0, _t_target(m, qv.c, j))
    M = np.vstack(blocks)
    b = np.concatenate(rhs)
    x, *_ = np.linalg.lstsq(M, b, rcond=None)
    return x, float(np.linalg.norm(M @ x - b))


def weighted_order_residuals(m: GeneralLinearMethod, qv: QVectors, Wexpansion, p_per_level) -> list[ConditionRow]:
    """Residuals of the ``W_l``-projected history conditions.

    Parameters
    ----------
    Wexpansion : sequence of ndarray
        ``W_0, W_1, ...`` with ``W^{-1} = sum_l dt^l W_l``.
    p_per_level : sequence of int
        Highest ``j`` checked at each level ``l``.
    """
    pmax = max(p_per_level)
    vecs = extended_theta_residual_vectors(m, qv, pmax)
    rows = []
    for l, (Wl, pl) in enumerate(zip(Wexpansion, p_per_level)):
        for j in range(pl + 1):
            rows.append(ConditionRow(f"W{l}", j, float(np.linalg.norm(Wl @ vecs[j]))))
    return rows


def certified_levels(m: GeneralLinearMethod, qv: QVectors, Wexpansion, tol: float = 1e-12) -> list[int]:
    """Largest ``p_l`` per level such that all projected conditions up to ``p_l`` hold."""
    vecs = extended_theta_residual_vectors(m, qv, len(qv) - 1)
    out = []
    for Wl in Wexpansion:
        p = -1
        for v in vecs:
            if np.linalg.norm(Wl @ v) > tol:
                break
            p += 1
        out.append(p)
    return out


def weighted_order(p_levels: Sequence[int]) -> int:
    """``p_l + l + 1`` at the level minimizing ``p_l``."""
    l = int(np.argmin(p_levels))
    return p_levels[l] + l + 1


# ---------------------------------------------------------------------------
# eigen-decomposition helpers


def eigenbasis(G, kernel_basis=None, normalize: str = "first") -> smallmat.EigenDecomposition:
    """Eigen-decomposition with a caller-fixed basis for the kernel.

    When ``kernel_basis`` is given its columns come first and replace the
    numerically computed null vectors, which are not unique; the nonzero
    eigenvalues follow, sorted as in ``smallmat.eig``.
    """
    G = np.asarray(G)
    if kernel_basis is None:
        return smallmat.eig(G, normalize=normalize)
    K = np.atleast_2d(np.asarray(kernel_basis, dtype=complex))
    if K.shape[0] != G.shape[0]:
        K = K.T
    k = K.shape[1]
    vals, vecs = np.linalg.eig(G)
    order = np.argsort(np.abs(vals))[k:]
    vals, vecs = vals[order], vecs[:, order]
    idx = sorted(range(len(vals)), key=lambda i: smallmat._sort_key(complex(vals[i])))
    vals = vals[idx].astype(complex)
    W = np.hstack([K, smallmat._normalize_columns(vecs[:, idx], normalize)])
    eigenvalues = np.concatenate([np.zeros(k, dtype=complex), vals])
    return smallmat.EigenDecomposition(eigenvalues, W, smallmat.inverse(W))


def winv_expansion(winv_of_h: Callable[[float], np.ndarray], h: float = 1e-3, levels: int = 2, points: int = 4):
    """Taylor coefficients of ``W^{-1}(dt)`` at ``dt = 0`` from samples.

    Fits ``W^{-1}(h / 2^i)`` for ``i < points`` by a polynomial of degree
    ``points - 1`` in ``dt`` (Richardson extrapolation in matrix form) and
    returns the first ``levels`` coefficient matrices.
    """
    hs = np.array([h / 2**i for i in range(points)])
    samples = np.array([np.asarray(winv_of_h(x), dtype=complex) for x in hs])
    Vand = np.vander(hs, points, increasing=True)
    coeffs = np.linalg.solve(Vand, samples.reshape(points, -1))
    shape = samples.shape[1:]
    return [coeffs[l].reshape(shape) for l in range(levels)]


def clean_matrix(M, tol: float = 1e-6) -> np.ndarray:
    """Round entries below ``tol`` to zero; convenient after extrapolation."""
    M = np.array(M, dtype=complex)
    M.real[np.abs(M.real) < tol] = 0.0
    M.imag[np.abs(M.imag) < tol] = 0.0
    return M


def to_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)
