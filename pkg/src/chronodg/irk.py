"""Implicit Runge-Kutta machinery for the first-order oscillator ``z' = L z``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import smallmat
from .errors import PoleHit, SingularMatrix, SingularStageSystem, Unsupported


@dataclass(frozen=True)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = len(b)
        if A.shape != (s, s) or c.shape != (s,):
            raise ValueError(f"inconsistent tableau shapes A{A.shape}, b{b.shape}, c{c.shape}")
        if np.any(c < -1e-14) or np.any(c > 1 + 1e-14):
            raise ValueError("nodes must lie in [0, 1]")
        if abs(b.sum() - 1.0) > 1e-13:
            raise ValueError(f"weights sum to {b.sum()}, expected 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def s(self) -> int:
        return len(self.b)


def lobatto_iiic(s: int) -> ButcherTableau:
    """Lobatto IIIC tableau with ``s`` stages, ``s`` in {2, 3, 4}."""
    if s == 2:
        A = [[1 / 2, -1 / 2], [1 / 2, 1 / 2]]
        b = [1 / 2, 1 / 2]
        c = [0.0, 1.0]
    elif s == 3:
        A = [
            [1 / 6, -1 / 3, 1 / 6],
            [1 / 6, 5 / 12, -1 / 12],
            [1 / 6, 2 / 3, 1 / 6],
        ]
        b = [1 / 6, 2 / 3, 1 / 6]
        c = [0.0, 1 / 2, 1.0]
    elif s == 4:
        r5 = math.sqrt(5.0)
        A = [
            [1 / 12, -r5 / 12, r5 / 12, -1 / 12],
            [1 / 12, 1 / 4, (10 - 7 * r5) / 60, r5 / 60],
            [1 / 12, (10 + 7 * r5) / 60, 1 / 4, -r5 / 60],
            [1 / 12, 5 / 12, 5 / 12, 1 / 12],
        ]
        b = [1 / 12, 5 / 12, 5 / 12, 1 / 12]
        c = [0.0, 1 / 2 - r5 / 10, 1 / 2 + r5 / 10, 1.0]
    else:
        raise Unsupported(f"Lobatto IIIC is provided for s in {{2, 3, 4}}, got {s}")
    return ButcherTableau(np.array(A), np.array(b), np.array(c))


def oscillator_matrix(lam: float) -> np.ndarray:
    """``L`` of the first-order form ``(u, w)' = (w, -lam u)``."""
    return np.array([[0.0, 1.0], [-lam, 0.0]])


def stage_matrix(tab: ButcherTableau, L, dt: float) -> np.ndarray:
    m = np.asarray(L).shape[0]
    return np.eye(tab.s * m) - dt * smallmat.kron(tab.A, L)


def irk_step(tab: ButcherTableau, L, dt: float, z):
    """One IRK step for ``z' = L z``.

    Returns
    -------
    k : ndarray, shape (s, m)
        Stage derivatives ``k_i = L (z + dt sum_j a_ij k_j)``.
    z_next : ndarray, shape (m,)
    """
    L = np.asarray(L, dtype=float)
    z = np.asarray(z, dtype=float)
    K = stage_matrix(tab, L, dt)
    rhs = np.tile(L @ z, tab.s)
    try:
        k = smallmat.solve(K, rhs).reshape(tab.s, -1)
    except SingularMatrix as exc:
        raise SingularStageSystem(str(exc)) from exc
    return k, z + dt * (tab.b @ k)


def order_condition_B(tab: ButcherTableau, p: int) -> np.ndarray:
    """Residuals of ``sum_j b_j c_j^{k-1} = 1/k`` for ``k = 1..p``."""
    return np.array([tab.b @ tab.c ** (k - 1) - 1.0 / k for k in range(1, p + 1)])


def order_condition_C(tab: ButcherTableau, q: int) -> np.ndarray:
    """Residual matrix; column ``k-1`` holds ``sum_j a_ij c_j^{k-1} - c_i^k / k``."""
    cols = [tab.A @ tab.c ** (k - 1) - tab.c**k / k for k in range(1, q + 1)]
    return np.column_stack(cols) if cols else np.zeros((tab.s, 0))


def order_condition_D(tab: ButcherTableau, r: int) -> np.ndarray:
    """Residual matrix; column ``k-1`` holds ``sum_i b_i c_i^{k-1} a_ij - b_j (1 - c_j^k) / k``."""
    cols = [(tab.b * tab.c ** (k - 1)) @ tab.A - tab.b * (1.0 - tab.c**k) / k for k in range(1, r + 1)]
    return np.column_stack(cols) if cols else np.zeros((tab.s, 0))


def stability_function(tab: ButcherTableau, z: complex) -> complex:
    """``R(z) = 1 + z b^T (I - z A)^{-1} 1``."""
    M = np.eye(tab.s, dtype=complex) - z * tab.A
    try:
        x = smallmat.solve(M, np.ones(tab.s, dtype=complex))
    except SingularMatrix as exc:
        raise PoleHit(f"I - zA is singular at z={z}") from exc
    return complex(1.0 + z * (tab.b @ x))


def algebraic_stability_matrices(tab: ButcherTableau):
    Bd = np.diag(tab.b)
    M = Bd @ tab.A + tab.A.T @ Bd - np.outer(tab.b, tab.b)
    return Bd, M


def algebraic_stability_check(tab: ButcherTableau, tol: float = 1e-12):
    """Whether ``B = diag(b)`` and ``M = BA + A^T B - b b^T`` are PSD."""
    Bd, M = algebraic_stability_matrices(tab)
    b_psd = bool(np.linalg.eigvalsh(Bd).min() >= -tol)
    m_psd = bool(np.linalg.eigvalsh(0.5 * (M + M.T)).min() >= -tol)
    return b_psd, m_psd
