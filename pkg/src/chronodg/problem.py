"""The harmonic oscillator ``u'' + lam u = 0`` and its closed-form solution."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Oscillator:
    lam: float
    u0: float
    v0: float
    T: float = 20.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def omega(self) -> float:
        return math.sqrt(self.lam)

    def derivative(self, t, k: int = 0):
        """k-th time derivative of the exact displacement."""
        w = self.omega
        t = np.asarray(t, dtype=float)
        # derivatives of cos/sin cycle with period four
        c = np.cos(w * t + k * np.pi / 2)
        s = np.sin(w * t + k * np.pi / 2)
        return w**k * (self.u0 * c + self.v0 / w * s)

    def displacement(self, t):
        return self.derivative(t, 0)

    def velocity(self, t):
        return self.derivative(t, 1)

    def state(self, t) -> np.ndarray:
        return np.array([self.displacement(t), self.velocity(t)], dtype=float)

    def energy(self) -> float:
        return self.v0**2 + self.lam * self.u0**2


# the experiment used throughout the convergence studies
REFERENCE_PROBLEM = Oscillator(lam=1.0, u0=1.0, v0=1.0, T=20.0)


def load_problem(path) -> Oscillator:
    """Read a JSON record with keys ``lambda``, ``u0``, ``v0``, ``T``."""
    data = json.loads(Path(path).read_text())
    return Oscillator(
        lam=float(data.get("lambda", REFERENCE_PROBLEM.lam)),
        u0=float(data.get("u0", REFERENCE_PROBLEM.u0)),
        v0=float(data.get("v0", REFERENCE_PROBLEM.v0)),
        T=float(data.get("T", REFERENCE_PROBLEM.T)),
    )


def problem_record(prob: Oscillator) -> dict:
    d = asdict(prob)
    d["lambda"] = d.pop("lam")
    return d
