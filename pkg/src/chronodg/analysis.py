"""Convergence, consistency, spectral and conditioning studies.

Every study is a pure function of its inputs. Runs over several step sizes
may execute on a thread pool whose size is capped by ``CHRONODG_THREADS``;
results are always merged in a fixed order so output is reproducible.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np
from scipy import stats

from . import dg1, dg2, irk, newmark, smallmat
from .errors import NonPositiveError, UnstableRun
from .problem import Oscillator

BLOWUP = 1e6
STEP_TOL = 1e-12


def default_dts(levels: int = 6, dt0: float = 0.2) -> list[float]:
    """``dt0 * 2^-k`` for ``k = 0..levels-1``."""
    return [dt0 * 2.0**-k for k in range(levels)]


def thread_cap() -> int:
    raw = os.environ.get("CHRONODG_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"CHRONODG_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"CHRONODG_THREADS must be a positive integer, got {raw!r}")
    return n


def _parallel_map(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    threads = thread_cap() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# order fitting


def observed_order(points: Iterable) -> tuple[float, float]:
    """Least-squares slope of ``log(error)`` against ``log(dt)``.

    Parameters
    ----------
    points : iterable of (dt, error)

    Returns
    -------
    slope, r2 : float
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    if np.any(x <= 0):
        raise NonPositiveError("step sizes must be positive")
    if np.any(~(y > 0)):
        raise NonPositiveError("errors must be positive for a log-log fit")
    fit = stats.linregress(np.log(x), np.log(y))
    r2 = float(fit.rvalue**2) if np.isfinite(fit.rvalue) else 1.0
    return float(fit.slope), r2


def steps_for(T: float, dt: float) -> int:
    ratio = T / dt
    n = round(ratio)
    if n < 1 or abs(ratio - n) > STEP_TOL * max(1.0, ratio):
        raise ValueError(f"T/dt = {ratio!r} is not an integer")
    return int(n)


# ---------------------------------------------------------------------------
# integrator handles


class Integrator(Protocol):
    method_id: str

    def params(self) -> dict: ...

    def errors(self, prob: Oscillator, dt: float, steps: int) -> tuple[float, float]:
        """Max slab error over ``n >= 1`` and final-time error."""
        ...


def _state_errors(M: np.ndarray, prob: Oscillator, dt: float, steps: int):
    z = np.array([prob.u0, prob.v0], dtype=float)
    traj = np.empty((steps, 2))
    for n in range(steps):
        z = M @ z
        traj[n] = z
    t = dt * np.arange(1, steps + 1)
    exact = np.column_stack([prob.displacement(t), prob.velocity(t)])
    e = np.linalg.norm(traj - exact, axis=1)
    return float(e.max()), float(e[-1])


@dataclass(frozen=True)
class NewmarkMethod:
    gamma: float = 0.5
    beta: float = 0.25
    method_id: str = "newmark"

    def params(self) -> dict:
        return {"gamma": self.gamma, "beta": self.beta}

    def errors(self, prob, dt, steps):
        G = newmark.newmark_propagator(newmark.NewmarkParams(self.gamma, self.beta), prob.lam, dt)
        return _state_errors(G, prob, dt, steps)


@dataclass(frozen=True)
class LobattoMethod:
    s: int = 2
    method_id: str = "lobatto3c"

    def params(self) -> dict:
        return {"s": self.s}

    def errors(self, prob, dt, steps):
        tab = irk.lobatto_iiic(self.s)
        L = irk.oscillator_matrix(prob.lam)
        M = np.column_stack([irk.irk_step(tab, L, dt, e)[1] for e in np.eye(2)])
        return _state_errors(M, prob, dt, steps)


@dataclass(frozen=True)
class DG2Method:
    r: int = 1
    a: float = 0.0
    initial: str = "exact_samples"
    method_id: str = "dg2"

    def params(self) -> dict:
        return {"r": self.r, "a": self.a, "initial": self.initial}

    def errors(self, prob, dt, steps):
        cfg = dg2.DG2Config(self.r, prob.lam, dt, self.a)
        sys = dg2.assemble(cfg)
        U = dg2.march(sys, dg2.initial_slab(cfg, prob, self.initial), steps)
        E = exact_slabs(cfg, prob, steps)
        e = np.linalg.norm(U[1:] - E[1:], axis=1)
        final = abs(U[-1, -1] - float(prob.displacement(steps * dt)))
        return float(e.max()), float(final)


@dataclass(frozen=True)
class DG1Method:
    """DG1 of degree ``r``.

    ``precision="auto"`` marches ``r = 3`` in 40-digit arithmetic because its
    final-time error drops below double-precision rounding on fine grids.
    """

    r: int = 1
    precision: str = "auto"
    method_id: str = "dg1"

    def params(self) -> dict:
        return {"r": self.r, "precision": self.resolved_precision()}

    def resolved_precision(self) -> str:
        if self.precision == "auto":
            return "extended" if self.r == 3 else "double"
        if self.precision not in ("double", "extended"):
            raise ValueError(f"unknown precision {self.precision!r}")
        return self.precision

    def errors(self, prob, dt, steps):
        cfg = dg1.DG1Config(self.r, prob.lam, dt)
        if self.resolved_precision() == "extended":
            return dg1.march_errors_extended(cfg, prob, steps)
        sys = dg1.assemble_dg1(cfg)
        Z = dg1.march(sys, dg1.initial_slab_dg1(prob, self.r), steps)
        c, _ = dg1.gll_rule(self.r)
        t = dt * (np.arange(steps)[:, None] + c[None, :])
        exact = np.stack([prob.displacement(t), prob.velocity(t)], axis=-1).reshape(steps, -1)
        e = np.linalg.norm(Z[1:] - exact, axis=1)
        final = np.linalg.norm(Z[-1, -2:] - prob.state(steps * dt))
        return float(e.max()), float(final)


def exact_slabs(cfg: dg2.DG2Config, prob: Oscillator, steps: int) -> np.ndarray:
    """Row ``n`` samples the exact solution on the DG2 slab ending at ``n dt``."""
    t = cfg.dt * (np.arange(steps + 1)[:, None] - 1.0) + cfg.nodes()[None, :]
    return prob.displacement(t)


# ---------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceReport:
    method_id: str
    params: dict
    problem: dict
    rows: list = field(default_factory=list)
    slab_order: float = math.nan
    slab_r2: float = math.nan
    final_order: float = math.nan
    final_r2: float = math.nan

    def dts(self) -> list[float]:
        return [r[0] for r in self.rows]

    def slab_errors(self) -> list[float]:
        return [r[1] for r in self.rows]

    def final_errors(self) -> list[float]:
        return [r[2] for r in self.rows]

    def as_dict(self) -> dict:
        return asdict(self)


def _fit_or_nan(points):
    try:
        return observed_order(points)
    except (NonPositiveError, ValueError):
        return math.nan, math.nan


def run_convergence(method: Integrator, prob: Oscillator, dts: Sequence[float], threads: int | None = None) -> ConvergenceReport:
    """March ``method`` for each step size and fit observed orders.

    Raises
    ------
    UnstableRun
        If any recorded error exceeds 1e6 or is not finite; the report is
        attached to the exception.
    """
    dts = sorted({float(d) for d in dts}, reverse=True)
    steps = [steps_for(prob.T, dt) for dt in dts]
    results = _parallel_map(lambda k: method.errors(prob, dts[k], steps[k]), list(range(len(dts))), threads)
    rows = [(dt, se, fe) for dt, (se, fe) in zip(dts, results)]
    report = ConvergenceReport(
        method_id=method.method_id,
        params=method.params(),
        problem={"lambda": prob.lam, "u0": prob.u0, "v0": prob.v0, "T": prob.T},
        rows=rows,
    )
    unstable = any(not (np.isfinite(se) and np.isfinite(fe)) or max(se, fe) > BLOWUP for _, se, fe in rows)
    if len(rows) >= 3 and not unstable:
        report.slab_order, report.slab_r2 = _fit_or_nan([(d, s) for d, s, _ in rows])
        report.final_order, report.final_r2 = _fit_or_nan([(d, f) for d, _, f in rows])
    if unstable:
        raise UnstableRun(f"{method.method_id} errors exceed {BLOWUP:g}", report=report)
    return report


# ---------------------------------------------------------------------------
# spectral radius


@dataclass(frozen=True)
class SweepCurve:
    label: str
    samples: tuple
    slope: float = math.nan

    def __post_init__(self):
        xs = [x for x, _ in self.samples]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("sweep abscissae must be strictly increasing")

    @property
    def x(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])


def spectral_radius_dg2(r: int, a: float, x: float) -> float:
    """``rho(G)`` at ``x = sqrt(lam) dt`` with ``lam = 1``."""
    return smallmat.spectral_radius(dg2.assemble(dg2.DG2Config(r, 1.0, x, a)).G)


def spectral_sweep(r: int, a: float, x_range=(0.1, 20.0), samples: int = 200, threads: int | None = None) -> SweepCurve:
    lo, hi = map(float, x_range)
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < x_min < x_max, got {x_range}")
    if samples < 2:
        raise ValueError("need at least two samples")
    xs = np.linspace(lo, hi, samples)
    rhos = _parallel_map(lambda x: spectral_radius_dg2(r, a, float(x)), list(xs), threads)
    return SweepCurve("x", tuple((float(x), float(v)) for x, v in zip(xs, rhos)))


# ---------------------------------------------------------------------------
# consistency


@dataclass(frozen=True)
class ConsistencyReport:
    r: int
    a: float
    rows: tuple
    theta_order: float
    winv_theta_order: float

    def __iter__(self):
        return iter((self.theta_order, self.winv_theta_order))


def truncation_norms(r: int, a: float, prob: Oscillator, dt: float) -> tuple[float, float]:
    """``max_n |theta_n|`` and ``max_n |W^{-1} theta_n|`` over ``n = 0..N-1``."""
    steps = steps_for(prob.T, dt)
    cfg = dg2.DG2Config(r, prob.lam, dt, a)
    sys = dg2.assemble(cfg)
    eigen = smallmat.eig(sys.G)
    E = exact_slabs(cfg, prob, steps)
    theta = E[1:] - E[:-1] @ sys.G.T
    wtheta = theta @ eigen.Winv.T
    return float(np.linalg.norm(theta, axis=1).max()), float(np.linalg.norm(wtheta, axis=1).max())


def consistency_sweep(r: int, a: float, prob: Oscillator, dts: Sequence[float], threads: int | None = None) -> ConsistencyReport:
    dts = sorted({float(d) for d in dts}, reverse=True)
    vals = _parallel_map(lambda dt: truncation_norms(r, a, prob, dt), dts, threads)
    rows = tuple((dt, t, w) for dt, (t, w) in zip(dts, vals))
    t_order, _ = observed_order([(d, t) for d, t, _ in rows])
    w_order, _ = observed_order([(d, w) for d, _, w in rows])
    return ConsistencyReport(r, a, rows, t_order, w_order)


# ---------------------------------------------------------------------------
# conditioning

CONDITIONING_TARGETS = ("dg2_aplus", "dg1_bplus")


def _normalize_which(which: str) -> str:
    w = which.replace("-", "_").lower()
    if w not in CONDITIONING_TARGETS:
        raise ValueError(f"unknown matrix {which!r}; expected one of {CONDITIONING_TARGETS}")
    return w


def slab_condition(which: str, r: int, lam: float, dt: float, a: float = 0.0) -> float:
    which = _normalize_which(which)
    if which == "dg2_aplus":
        return smallmat.cond2(dg2.assemble(dg2.DG2Config(r, lam, dt, a)).Aplus)
    return smallmat.cond2(dg1.assemble_dg1(dg1.DG1Config(r, lam, dt)).Bplus)


def conditioning_sweep(which: str, r: int, lam: float, dts: Sequence[float], a: float = 0.0) -> SweepCurve:
    """``cond2`` of the slab matrix for each step and its log-log slope."""
    dts = sorted(float(d) for d in dts)
    if any(d <= 0 for d in dts):
        raise ValueError("step sizes must be positive")
    samples = tuple((dt, slab_condition(which, r, lam, dt, a)) for dt in dts)
    slope, _ = observed_order(samples)
    return SweepCurve("dt", samples, slope)
