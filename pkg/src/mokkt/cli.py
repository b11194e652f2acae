"""Command-line front end.

Every command builds a JSON-serializable report; the exit code is computed
from that report alone (see :func:`exit_code`), and ``--json`` prints it.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .calculus import NonDifferentiableError, gradient, second_dir_deriv
from .catalog import UnknownEntry, check_fact, list_ids, load
from .cones import TOL_ACT, sample_critical_directions
from .cq import STRICT_TOL, check_socq
from .expr import DomainError, ExprSyntaxError
from .gconvex import PROPERTIES, probe_function, probe_problem_2kt_pseudoconvex
from .kkt import TOL_CURV, certify_point
from .lp import LPNumericalError, LPSizeError
from .pareto import BudgetExceeded, GridOracle, component_restriction_check
from .problem import InfeasiblePointError, Problem, ProblemFileError

SCHEMA = "mokkt-report/1"
EXIT_USAGE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


# --------------------------------------------------------------------------
# JSON helpers
# --------------------------------------------------------------------------


def jsonable(obj: Any) -> Any:
    """Convert numpy values and non-finite floats ("inf", "-inf", "nan") to plain JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return 0.0 if v == 0 else v
    return obj


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True, allow_nan=False)


def strip_volatile(report: dict) -> dict:
    """The report without fields that legitimately differ between identical runs."""
    return {k: v for k, v in report.items() if k != "timestamp"}


def exit_code(report: dict) -> int:
    """Exit status as a function of a (possibly re-parsed) report."""
    if "error" in report:
        return EXIT_USAGE
    cmd = report["command"]
    res = report["result"]
    if cmd == "certify":
        return {"certified": 0, "refuted": 1, "inconclusive": 2}[res["status"]]
    if cmd == "cq":
        socq_ok = res["socq"]["verdict"] == "holds-sampled"
        if not socq_ok:
            return 2
        return 0 if res["mfcq"]["verdict"] == "holds" else 1
    if cmd == "pareto":
        return {"pareto": 0, "weak-pareto-only": 1, "dominated": 2}[res["classification"]]
    if cmd == "probe":
        return 1 if any(p["outcome"] == "counterexample" for p in res["probes"]) else 0
    if cmd == "catalog" and res.get("action") == "check":
        return 0 if all(f["reproduced"] for f in res["facts"]) else 1
    return 0


# --------------------------------------------------------------------------
# argument helpers
# --------------------------------------------------------------------------


def _vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def load_problem(ref: str) -> Problem:
    """A problem file path, or ``catalog:ID`` for a built-in entry."""
    if ref.startswith("catalog:"):
        try:
            return load(ref.split(":", 1)[1]).problem
        except UnknownEntry as exc:
            raise UsageError(exc.args[0]) from None
    path = Path(ref)
    if not path.is_file():
        raise UsageError(f"no such problem file: {ref}")
    try:
        return Problem.load(path)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{ref}: invalid JSON ({exc})") from None


def _point(args, problem: Problem, required: bool = True) -> list[float] | None:
    if getattr(args, "point", None):
        x = _vector(args.point)
        if len(x) != problem.dim:
            raise UsageError(f"--point has {len(x)} entries, problem has {problem.dim} variables")
        return x
    if problem.point is None and required:
        raise UsageError("the problem has no candidate point; pass --point")
    return None if problem.point is None else list(problem.point)


def _tolerances(args) -> dict:
    return {"tol_act": args.tol_act, "tol_strict": args.tol_strict, "tol_curv": args.tol_curv}


def _base(args, command: str, problem: Problem | None, point=None) -> dict:
    report = {
        "schema": SCHEMA,
        "tool": "mokkt",
        "version": __version__,
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": getattr(args, "seed", None),
        "tolerances": _tolerances(args),
    }
    if problem is not None:
        report["problem"] = problem.to_dict()
    if point is not None:
        report["point"] = list(point)
    return report


def _fmt(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return "(" + ", ".join(_fmt(u) for u in v) + ")"
    if isinstance(v, float):
        return f"{v + 0.0:.6g}"
    return str(v)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_certify(args) -> tuple[dict, list[str]]:
    problem = load_problem(args.file)
    x = _point(args, problem)
    verdict = certify_point(
        problem,
        x,
        args.mode,
        args.directions,
        args.seed,
        tol_act=args.tol_act,
        tol_crit=args.tol_act,
        tol_curv=args.tol_curv,
        strict_tol=args.tol_strict,
    )
    report = _base(args, "certify", problem, x)
    report["result"] = verdict.to_dict()
    lines = [f"{args.mode.upper()} certification at {_fmt(x)}: {verdict.status} over {verdict.directions_tested} sampled directions"]
    lines.append(f"{'d':>24}  {'I':>8}  {'J':>8}  {'lambda':>20}  {'mu':>16}  {'L2':>10}  {'margin':>10}  status")
    for o in verdict.outcomes[: args.show]:
        c = o.certificate
        lam = _fmt(c.lam.tolist()) if c else "-"
        mu = _fmt(c.mu.tolist()) if c else "-"
        curv = _fmt(c.curvature) if c else "-"
        margin = _fmt(c.lp_margin) if c else "-"
        lines.append(
            f"{_fmt(o.direction.d.tolist()):>24}  {_fmt([i + 1 for i in o.direction.I]):>8}  "
            f"{_fmt([j + 1 for j in o.direction.J]):>8}  {lam:>20}  {mu:>16}  {curv:>10}  {margin:>10}  {o.status}"
        )
    if len(verdict.outcomes) > args.show:
        lines.append(f"... {len(verdict.outcomes) - args.show} more directions (use --json for all)")
    if verdict.witness is not None:
        lines.append(f"witness direction: {_fmt(verdict.witness.d.tolist())}")
        lines.append(f"not a local Pareto minimizer: {'yes' if verdict.implies_not_local_pareto else 'not implied'}")
    lines += [f"note: {n}" for n in verdict.notes]
    return report, lines


def cmd_cq(args) -> tuple[dict, list[str]]:
    problem = load_problem(args.file)
    x = _point(args, problem)
    dirs = sample_critical_directions(problem, x, args.directions, args.seed, args.tol_act, args.tol_act, objectives=False)
    cq = check_socq(problem, x, [c.d for c in dirs], args.tol_strict, args.tol_act, args.tol_act)
    report = _base(args, "cq", problem, x)
    report["result"] = cq.to_dict()
    m = cq.mfcq
    lines = [f"MFCQ at {_fmt(x)}: {'holds' if m.holds else 'fails'}  s* = {_fmt(m.margin)}  u* = {_fmt(m.u.tolist())}"]
    if not m.active:
        lines.append("note: no active constraints; both conditions hold vacuously")
    lines.append(f"second-order CQ: {cq.verdict} over {cq.directions_tested} sampled directions")
    lines.append(f"{'d':>24}  {'u*':>24}  {'omega*':>8}  {'s*':>10}  verdict")
    for r in cq.socq[: args.show]:
        u = _fmt(r.u.tolist()) if r.u is not None else "-"
        lines.append(f"{_fmt(r.d.tolist()):>24}  {u:>24}  {_fmt(r.omega):>8}  {_fmt(r.margin):>10}  {r.status}")
    lines += [f"note: {n}" for n in cq.notes]
    return report, lines


def cmd_pareto(args) -> tuple[dict, list[str]]:
    problem = load_problem(args.file)
    x = _point(args, problem)
    oracle = GridOracle(problem, args.grid)
    verdict = oracle.classify(x, args.scope, args.radius)
    report = _base(args, "pareto", problem, x)
    result = verdict.to_dict()
    lines = [f"{verdict.classification} ({args.scope}, {verdict.resolution}, {verdict.points_scanned} feasible points)"]
    if verdict.witness is not None:
        fy = problem.f(verdict.witness)
        lines.append(f"witness {_fmt(verdict.witness.tolist())} with f = {_fmt(fy.tolist())} vs {_fmt(problem.f(x).tolist())}")
    if args.kanniappan:
        check = component_restriction_check(problem, x, args.grid, args.scope, args.radius, oracle)
        result["component_restriction"] = check.to_dict()
        lines.append(f"component restriction check: {check.verdict} (scalar side {check.scalar_side}, oracle side {check.oracle_side})")
        lines.append("note: C_i uses the weak inequality f_j(y) <= f_j(x)")
    report["result"] = result
    return report, lines


def cmd_probe(args) -> tuple[dict, list[str]]:
    problem = load_problem(args.file)
    report = _base(args, "probe", problem)
    results = []
    if args.property == "problem-2kt-pseudoconvex":
        anchors = [problem.point] if problem.point is not None else []
        r = probe_problem_2kt_pseudoconvex(problem, args.trials, args.seed, anchors, args.tol_act)
        r.target = "problem"
        results.append(r)
    else:
        labelled = [(f"f{i + 1}", e) for i, e in enumerate(problem.objectives)]
        labelled += [(f"g{j + 1}", e) for j, e in enumerate(problem.constraints)]
        if args.fn:
            labelled = [(k, e) for k, e in labelled if k == args.fn]
            if not labelled:
                raise UsageError(f"no function named {args.fn}")
        for label, e in labelled:
            results.append(probe_function(args.property, e, problem.box, args.trials, args.seed, label))
    report["result"] = {"property": args.property, "probes": [r.to_dict() for r in results]}
    lines = []
    for r in results:
        lines.append(f"{r.target}: {r.property} {r.outcome} ({r.trials} sampled trials)")
        if r.refuted:
            w = r.witness
            lines.append(f"  witness: {json.dumps(jsonable(w), sort_keys=True)}")
    return report, lines


def cmd_deriv(args) -> tuple[dict, list[str]]:
    problem = load_problem(args.file)
    label = args.fn
    group = problem.objectives if label.startswith("f") else problem.constraints
    try:
        e = group[int(label[1:]) - 1]
        if label[0] not in "fg" or int(label[1:]) < 1:
            raise ValueError
    except (ValueError, IndexError):
        raise UsageError(f"--fn must name an objective f1..f{problem.n_objectives} or constraint g1..g{problem.n_constraints}") from None
    x = _vector(args.at) if args.at else _point(args, problem)
    d = _vector(args.dir)
    if len(x) != problem.dim or len(d) != problem.dim:
        raise UsageError(f"--at and --dir need {problem.dim} entries")
    grad = gradient(e, x)
    sd = second_dir_deriv(e, x, d)
    try:
        table = second_dir_deriv(e, x, d, force_limit=True).table
    except (ArithmeticError, ValueError):
        table = []
    report = _base(args, "deriv", problem, x)
    report["result"] = {
        "function": label,
        "expression": str(e),
        "direction": d,
        "gradient": grad.tolist(),
        "slope": float(grad @ np.asarray(d)),
        "second": sd.to_dict(),
        "quotient_table": table,
    }
    lines = [
        f"{label} = {e}",
        f"gradient at {_fmt(x)}: {_fmt(grad.tolist())}",
        f"grad . d = {_fmt(float(grad @ np.asarray(d)))}",
        f"{label}''(x, d) = {_fmt(sd.value)} ({sd.status})",
    ]
    if table:
        lines.append(f"{'t':>12}  {'q(t)':>22}  {'extrapolated':>22}")
        lines += [f"{row['t']:>12.4g}  {row['q']:>22.15g}  {row['extrapolated']:>22.15g}" for row in table]
    return report, lines


def cmd_catalog(args) -> tuple[dict, list[str]]:
    report = _base(args, "catalog", None)
    if args.action == "list":
        entries = [load(i) for i in list_ids()]
        report["result"] = {"action": "list", "entries": [{"id": e.id, "description": e.description} for e in entries]}
        return report, [f"{e.id:<28} {e.description}" for e in entries]
    if not args.id and args.action == "export":
        raise UsageError("catalog export needs an entry id")
    try:
        entries = [load(args.id)] if args.id else [load(i) for i in list_ids()]
    except UnknownEntry as exc:
        raise UsageError(exc.args[0]) from None
    if args.action == "export":
        data = entries[0].raw
        report["result"] = {"action": "export", "entry": data}
        return report, [json.dumps(data, indent=2)]
    facts = []
    lines = []
    for entry in entries:
        for fact in entry.known_facts:
            ok, observed = check_fact(entry, fact, args.seed)
            facts.append({"entry": entry.id, "fact": fact, "reproduced": ok, "observed": observed})
            lines.append(f"{'ok  ' if ok else 'FAIL'} {entry.id}: {fact['kind']} {fact.get('value', '')} -> {observed}")
    report["result"] = {"action": "check", "facts": facts}
    return report, lines


COMMANDS = {
    "certify": cmd_certify,
    "cq": cmd_cq,
    "pareto": cmd_pareto,
    "probe": cmd_probe,
    "deriv": cmd_deriv,
    "catalog": cmd_catalog,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the JSON report")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol-act", type=float, default=TOL_ACT, help="active-set and criticality tolerance")
    common.add_argument("--tol-strict", type=float, default=STRICT_TOL, help="strict-feasibility margin for CQ LPs")
    common.add_argument("--tol-curv", type=float, default=TOL_CURV, help="slack on the curvature row")

    def problem_args(p, point=True):
        p.add_argument("file", help="problem JSON file, or catalog:ID")
        if point:
            p.add_argument("--point", help="candidate point overriding the file, e.g. 0.5,0")

    parser = _Parser(prog="mokkt", description="Second-order optimality certificates for multiobjective programs.")
    parser.add_argument("--version", action="version", version=f"mokkt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("certify", parents=[common], help="search FJ/KT multipliers over sampled critical directions")
    problem_args(p)
    p.add_argument("--mode", choices=["fj", "kt"], default="fj")
    p.add_argument("--directions", type=int, default=200)
    p.add_argument("--show", type=int, default=20, help="rows of the direction table to print")

    p = sub.add_parser("cq", parents=[common], help="first- and second-order MF constraint qualifications")
    problem_args(p)
    p.add_argument("--directions", type=int, default=64)
    p.add_argument("--show", type=int, default=20)

    p = sub.add_parser("pareto", parents=[common], help="grid oracle classification")
    problem_args(p)
    p.add_argument("--grid", type=float, default=0.02, help="grid step (rounded down to box/2^k)")
    p.add_argument("--scope", choices=["global", "local"], default="global")
    p.add_argument("--radius", type=float, default=None, help="local radius (default 0.1 * box diagonal)")
    p.add_argument("--kanniappan", action="store_true", help="also run the component restriction cross-check")

    p = sub.add_parser("probe", parents=[common], help="generalized-convexity refutation probes")
    problem_args(p, point=False)
    p.add_argument("--property", choices=[q for q in PROPERTIES if q != "quasiconvex-at"], required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--fn", help="restrict to one function, e.g. f1")

    p = sub.add_parser("deriv", parents=[common], help="gradient and second-order directional derivative")
    problem_args(p)
    p.add_argument("--fn", required=True, help="f1, f2, ..., g1, g2, ...")
    p.add_argument("--at", help="point, e.g. 0,0 (default: the file's point)")
    p.add_argument("--dir", required=True, help="direction, e.g. 1,0")

    p = sub.add_parser("catalog", parents=[common], help="list, export or self-check built-in problems")
    p.add_argument("action", choices=["list", "export", "check"])
    p.add_argument("id", nargs="?")
    return parser


def run(argv: Sequence[str] | None = None) -> tuple[int, dict | None, list[str]]:
    """Parse ``argv``, run the command and return (exit code, report, human-readable lines)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return EXIT_USAGE, None, [f"error: {exc}", parser.format_usage().strip()]
    try:
        report, lines = COMMANDS[args.command](args)
    except (
        UsageError,
        ProblemFileError,
        ExprSyntaxError,
        InfeasiblePointError,
        NonDifferentiableError,
        DomainError,
        BudgetExceeded,
        LPNumericalError,
        LPSizeError,
    ) as exc:
        report = _base(args, args.command, None)
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        return EXIT_USAGE, report, [f"error: {exc}"]
    report["exit"] = exit_code(report)
    return report["exit"], report, lines


def main(argv: Sequence[str] | None = None) -> int:
    code, report, lines = run(argv)
    as_json = report is not None and "--json" in (sys.argv[1:] if argv is None else argv)
    if as_json:
        print(dumps(report))
    if code == EXIT_USAGE:
        for line in lines:
            print(line, file=sys.stderr)
    elif not as_json:
        print("\n".join(lines))
    return code


if __name__ == "__main__":
    sys.exit(main())
