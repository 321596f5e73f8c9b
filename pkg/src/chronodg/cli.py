"""Command-line front end.

Data goes to standard output as CSV (numbers with 17 significant digits,
``#`` comment lines for fitted slopes); diagnostics go to standard error.

Exit codes: 0 success, 1 equivalence deviation above tolerance, 2 invalid
flags, 3 unstable convergence run (the table is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from fractions import Fraction

import numpy as np

from . import analysis, dg1, dg2, glm, irk, newmark, smallmat
from .errors import ChronoDGError, UnstableRun
from .problem import REFERENCE_PROBLEM, Oscillator, load_problem

EXIT_OK = 0
EXIT_DEVIATION = 1
EXIT_USAGE = 2
EXIT_UNSTABLE = 3
EQUIV_TOL = 1e-9
CONDITION_TOL = 1e-10


class UsageError(Exception):
    pass


def fmt(x) -> str:
    return "%.17g" % x


class CsvTable:
    """Header, numeric rows and ``#`` comment lines, rendered deterministically."""

    def __init__(self, header, rows=(), comments=()):
        self.header = list(header)
        self.rows = [list(r) for r in rows]
        self.comments = list(comments)
        for r in self.rows:
            if len(r) != len(self.header):
                raise ValueError("ragged CSV row")

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([fmt(c) if isinstance(c, (float, int, np.floating, np.integer)) and not isinstance(c, bool) else c for c in r])
        for c in self.comments:
            buf.write(f"# {c}\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# argument helpers


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("step sizes must be positive")
    return vals


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", help="JSON file with lambda, u0, v0, T")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--u0", type=float)
    p.add_argument("--v0", type=float)
    p.add_argument("--T", type=float)


def _problem(args) -> Oscillator:
    base = load_problem(args.problem) if getattr(args, "problem", None) else REFERENCE_PROBLEM
    try:
        return Oscillator(
            lam=base.lam if args.lam is None else args.lam,
            u0=base.u0 if args.u0 is None else args.u0,
            v0=base.v0 if args.v0 is None else args.v0,
            T=base.T if args.T is None else args.T,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# converge


def _method_from_args(args):
    m = args.method
    if m == "newmark":
        try:
            newmark.NewmarkParams(args.gamma, args.beta)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        return analysis.NewmarkMethod(args.gamma, args.beta)
    if args.r not in (1, 2, 3):
        raise UsageError(f"--r must be 1, 2 or 3, got {args.r}")
    if m == "lobatto3c":
        return analysis.LobattoMethod(args.r + 1)
    if m == "dg1":
        return analysis.DG1Method(args.r, args.precision)
    s_mode = args.s_mode or ("a-dt2" if args.a is not None else "zero")
    if s_mode == "zero":
        if args.a not in (None, 0.0):
            raise UsageError("--a requires --s-mode a-dt2")
        a = 0.0
    else:
        a = 0.5 if args.a is None else args.a
    if args.initial == "newmark_T" and args.r != 1:
        raise UsageError("--initial newmark_T needs --r 1")
    return analysis.DG2Method(args.r, a, args.initial)


def report_table(rep: analysis.ConvergenceReport) -> CsvTable:
    params = ", ".join(f"{k}={v}" for k, v in rep.params.items())
    comments = [
        f"method={rep.method_id} {params}",
        f"slab_order={fmt(rep.slab_order)} r2={fmt(rep.slab_r2)}",
        f"final_order={fmt(rep.final_order)} r2={fmt(rep.final_r2)}",
    ]
    return CsvTable(["dt", "slab_error", "final_error"], rep.rows, comments)


def cmd_converge(args, out) -> int:
    method = _method_from_args(args)
    prob = _problem(args)
    dts = args.dt_list or analysis.default_dts()
    try:
        for dt in dts:
            analysis.steps_for(prob.T, dt)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        rep = analysis.run_convergence(method, prob, dts)
    except UnstableRun as exc:
        table = report_table(exc.report)
        table.comments.append("unstable: errors exceed the blow-up threshold")
        out.write(table.render())
        print(str(exc), file=sys.stderr)
        return EXIT_UNSTABLE
    out.write(report_table(rep).render())
    return EXIT_OK


# ---------------------------------------------------------------------------
# equiv


def _check_newmark_p1(lam, dt, steps, a, rng):
    cfg = dg2.DG2Config(1, lam, dt, a)
    G = dg2.assemble(cfg).G
    T = dg2.newmark_map(cfg)
    GN = newmark.newmark_propagator(newmark.NewmarkParams(1 - a, (1 - a) / 2), lam, dt)
    dev = np.abs(T @ G @ smallmat.inverse(T) - GN).max()
    u = dg2.initial_slab(cfg, Oscillator(lam, *rng.normal(size=2)), "newmark_T")
    z = T @ u
    p = newmark.NewmarkParams(1 - a, (1 - a) / 2)
    for _ in range(steps):
        u = G @ u
        z = newmark.newmark_step(p, lam, dt, newmark.PairState(*z)).as_array()
        dev = max(dev, np.abs(T @ u - z).max() / max(1.0, np.abs(z).max()))
    return dev


def _check_lobatto(r, lam, dt, steps, rng):
    sys_ = dg1.assemble_dg1(dg1.DG1Config(r, lam, dt))
    tab = irk.lobatto_iiic(r + 1)
    L = irk.oscillator_matrix(lam)
    Linv = smallmat.inverse(L)
    z = rng.normal(size=2)
    zhat = np.tile(z, r + 1)
    dev = 0.0
    for _ in range(steps):
        k, z_next = irk.irk_step(tab, L, dt, z)
        zhat = dg1.dg1_step(sys_, zhat)
        stage_map = (smallmat.kron(np.eye(r + 1), Linv) @ k.ravel())
        dev = max(dev, np.abs(zhat[-2:] - z_next).max(), np.abs(zhat - stage_map).max())
        z = z_next
    return dev


def _check_glm_newmark(lam, dt, steps, rng):
    m = glm.newmark_as_glm()
    p = newmark.NewmarkParams.average_acceleration()
    u, v = rng.normal(size=2)
    y = np.array([dt * v, -dt * dt * lam * u, u])
    st = newmark.PairState(u, v)
    dev = 0.0
    for _ in range(steps):
        Y, y = glm.glm_step(m, lam, dt, y)
        st = newmark.newmark_step(p, lam, dt, st)
        dev = max(dev, abs(y[2] - st.u), abs(Y[0] - st.u), abs(y[0] / dt - st.v))
    return dev


def _check_glm_dg2_p1(lam, dt, steps, a, rng):
    af = Fraction(a)
    m = dg2.dg2_glm(1, af)
    G = dg2.assemble(dg2.DG2Config(1, lam, dt, a)).G
    u = rng.normal(size=2)
    y = dg2.glm_history(1, af, lam, dt, u)
    dev = 0.0
    for _ in range(steps):
        Y, y = glm.glm_step(m, lam, dt, y)
        u = G @ u
        dev = max(dev, np.abs(y[:2] - u).max(), np.abs(Y[:2] - u).max())
    return dev


CHECKS = ("newmark-p1", "lobatto-r1", "lobatto-r2", "lobatto-r3", "glm-newmark", "glm-dg2-p1")


def run_check(check: str, lam: float, dt: float, steps: int, a: float = 0.5, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    if check == "newmark-p1":
        return _check_newmark_p1(lam, dt, steps, a, rng)
    if check.startswith("lobatto-r"):
        return _check_lobatto(int(check[-1]), lam, dt, steps, rng)
    if check == "glm-newmark":
        return _check_glm_newmark(lam, dt, steps, rng)
    if check == "glm-dg2-p1":
        return _check_glm_dg2_p1(lam, dt, steps, a, rng)
    raise UsageError(f"unknown check {check!r}")


def cmd_equiv(args, out) -> int:
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    if args.a > 1:
        raise UsageError("--a must not exceed 1")
    dev = run_check(args.check, args.lam, args.dt, args.steps, args.a, args.seed)
    ok = dev <= EQUIV_TOL
    out.write(f"check={args.check} steps={args.steps} dt={fmt(args.dt)} lambda={fmt(args.lam)}\n")
    out.write(f"max_deviation={fmt(dev)} tolerance={fmt(EQUIV_TOL)} {'PASS' if ok else 'FAIL'}\n")
    return EXIT_OK if ok else EXIT_DEVIATION


# ---------------------------------------------------------------------------
# spectral, cond, order-conditions


def cmd_spectral(args, out) -> int:
    if not 0 < args.x_min < args.x_max:
        raise UsageError("need 0 < --x-min < --x-max")
    if args.samples < 2:
        raise UsageError("--samples must be at least 2")
    curve = analysis.spectral_sweep(args.r, args.a, (args.x_min, args.x_max), args.samples)
    table = CsvTable(["x", "rho"], curve.samples, [f"r={args.r} a={fmt(args.a)} max_rho={fmt(curve.values.max())}"])
    out.write(table.render())
    return EXIT_OK


def cmd_cond(args, out) -> int:
    dts = args.dt_list or analysis.default_dts()
    curve = analysis.conditioning_sweep(args.which, args.r, args.lam, dts)
    table = CsvTable(["dt", "cond2"], reversed(curve.samples), [f"which={args.which} r={args.r} slope={fmt(curve.slope)}"])
    out.write(table.render())
    return EXIT_OK


def _lobatto_rows(s: int, max_order: int):
    tab = irk.lobatto_iiic(s)
    rows = []
    rows.append((f"B({max_order})", max_order, float(np.abs(irk.order_condition_B(tab, max_order)).max())))
    rows.append((f"C({s - 1})", s - 1, float(np.abs(irk.order_condition_C(tab, s - 1)).max())))
    rows.append((f"D({s - 1})", s - 1, float(np.abs(irk.order_condition_D(tab, s - 1)).max())))
    rows.append(("a_sj=b_j", s, float(np.abs(tab.A[-1] - tab.b).max())))
    rows.append(("a_i1=b_1", s, float(np.abs(tab.A[:, 0] - tab.b[0]).max())))
    b_psd, m_psd = irk.algebraic_stability_check(tab)
    Bd, M = irk.algebraic_stability_matrices(tab)
    rows.append(("B_psd", 0, max(0.0, -float(np.linalg.eigvalsh(Bd).min()))))
    rows.append(("M_psd", 0, max(0.0, -float(np.linalg.eigvalsh(0.5 * (M + M.T)).min()))))
    return rows


NEWMARK_Q = ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1 / 12, 0.0, 0.0])
DG2_P1_Q = ([1.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.5, 0.0, -0.25, 0.75])


def _newmark_glm_rows(max_order: int):
    m = glm.newmark_as_glm()
    qv = glm.QVectors(NEWMARK_Q[: max_order + 1], [1.0])
    rows = []
    for k in range(len(qv), max_order + 1):
        q, _ = glm.best_fit_q(m, qv, k)
        qv = qv.extended(q)
    for row in glm.order_condition_residuals(m, qv, max_order):
        rows.append((row.kind, row.k, row.residual))
    return rows


def _dg2_glm_rows(max_order: int):
    m = dg2.dg2_glm(1, Fraction(1, 2))
    qv = glm.QVectors(DG2_P1_Q[: max_order + 1], [0.0, 1.0])
    for j in range(len(qv), max_order + 1):
        q, _ = glm.best_fit_extended_q(m, qv, j)
        qv = qv.extended(q)
    T, theta = glm.extended_order_residuals(m, qv, max_order, max_order)
    return [("T", j, r) for j, r in enumerate(T)] + [("theta", j, r) for j, r in enumerate(theta)]


TARGETS = ("lobatto2", "lobatto3", "lobatto4", "newmark-glm", "dg2-p1-glm")


def cmd_order_conditions(args, out) -> int:
    if args.max_order < 0:
        raise UsageError("--max-order must be non-negative")
    if args.target.startswith("lobatto"):
        rows = _lobatto_rows(int(args.target[-1]), max(args.max_order, 1))
    elif args.target == "newmark-glm":
        rows = _newmark_glm_rows(args.max_order)
    else:
        rows = _dg2_glm_rows(args.max_order)
    table = CsvTable(
        ["condition", "k", "residual", "status"],
        [(name, k, res, "PASS" if res <= CONDITION_TOL else "FAIL") for name, k, res in rows],
        [f"target={args.target} tolerance={fmt(CONDITION_TOL)}"],
    )
    out.write(table.render())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chronodg", description="Time-integration experiments for u'' + lambda u = 0.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", help="convergence table over a step-size grid")
    p.add_argument("--method", choices=("newmark", "lobatto3c", "dg2", "dg1"), required=True)
    p.add_argument("--r", type=int, default=1, help="polynomial degree (Lobatto IIIC uses r+1 stages)")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.25)
    p.add_argument("--a", type=float, default=None, help="stabilization s = a dt^2")
    p.add_argument("--s-mode", choices=("zero", "a-dt2"), default=None)
    p.add_argument("--initial", choices=dg2.INITIAL_MODES, default="exact_samples")
    p.add_argument("--precision", choices=("auto", "double", "extended"), default="auto")
    p.add_argument("--dt-list", type=_float_list, default=None)
    _add_problem_flags(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("equiv", help="numerical equivalence checks")
    p.add_argument("--check", choices=CHECKS, required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--dt", type=_positive, default=0.05)
    p.add_argument("--lambda", dest="lam", type=_positive, default=1.0)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("spectral", help="spectral radius of the DG2 propagator against x = sqrt(lambda) dt")
    p.add_argument("--r", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--x-min", type=float, default=0.1)
    p.add_argument("--x-max", type=float, default=20.0)
    p.add_argument("--samples", type=int, default=200)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("cond", help="condition number of the slab matrix against dt")
    p.add_argument("--which", choices=("dg2-aplus", "dg1-bplus"), required=True)
    p.add_argument("--r", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--lambda", dest="lam", type=_positive, default=1.0)
    p.add_argument("--dt-list", type=_float_list, default=None)
    p.set_defaults(func=cmd_cond)

    p = sub.add_parser("order-conditions", help="order-condition residuals")
    p.add_argument("--target", choices=TARGETS, required=True)
    p.add_argument("--max-order", type=int, default=3)
    p.set_defaults(func=cmd_order_conditions)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except (UsageError, ValueError, ChronoDGError) as exc:
        print(f"chronodg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
