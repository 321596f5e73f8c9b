"""Newmark integrators for ``u'' = -lam u``.

The implicit displacement update is linear in ``u_{n+1}``, so each step is
solved in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStep


@dataclass(frozen=True)
class NewmarkParams:
    gamma: float = 0.5
    beta: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.beta <= 0.5:
            raise ValueError(f"beta must lie in [0, 1/2], got {self.beta}")

    @classmethod
    def average_acceleration(cls) -> "NewmarkParams":
        return cls(0.5, 0.25)


@dataclass(frozen=True)
class PairState:
    u: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v], dtype=float)

    @classmethod
    def from_array(cls, z) -> "PairState":
        return cls(float(z[0]), float(z[1]))

    def energy(self, lam: float) -> float:
        return self.v**2 + lam * self.u**2


def _denominator(beta: float, mu: float) -> float:
    den = 1.0 + beta * mu
    if den == 0.0:
        raise DegenerateStep("1 + beta*lam*dt^2 vanishes")
    return den


def newmark_step(p: NewmarkParams, lam: float, dt: float, state: PairState) -> PairState:
    """Advance ``(u, v)`` by one Newmark step with ``f(u) = -lam u``.

    Parameters
    ----------
    p : NewmarkParams
    lam : float
        Stiffness; zero gives free motion.
    dt : float
        Step size, must be positive.
    state : PairState
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    mu = lam * dt * dt
    u, v = state.u, state.v
    u1 = ((1.0 - (0.5 - p.beta) * mu) * u + dt * v) / _denominator(p.beta, mu)
    v1 = v - dt * lam * ((1.0 - p.gamma) * u + p.gamma * u1)
    return PairState(u1, v1)


def newmark_propagator(p: NewmarkParams, lam: float, dt: float) -> np.ndarray:
    """2x2 matrix ``G`` with ``(u, v)_{n+1} = G (u, v)_n``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    mu = lam * dt * dt
    D = 2.0 * _denominator(p.beta, mu)
    g, b = p.gamma, p.beta
    return np.array(
        [
            [(2.0 - (1.0 - 2.0 * b) * mu) / D, 2.0 * dt / D],
            [((g - 2.0 * b) * dt**3 * lam**2 - 2.0 * dt * lam) / D, ((2.0 * b - 2.0 * g) * mu + 2.0) / D],
        ]
    )


def crank_nicolson_step(lam: float, dt: float, state: PairState) -> PairState:
    """Trapezoidal rule on ``z' = L z`` with ``L = [[0, 1], [-lam, 0]]``."""
    L = np.array([[0.0, 1.0], [-lam, 0.0]])
    z = state.as_array()
    M = np.eye(2) - 0.5 * dt * L
    rhs = z + 0.5 * dt * (L @ z)
    return PairState.from_array(np.linalg.solve(M, rhs))
