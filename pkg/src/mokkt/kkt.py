"""Second-order Fritz-John / Kuhn-Tucker multiplier search and point certification.

For a critical direction d at a feasible point x the multipliers (lambda, mu)
must satisfy

    sum_i lambda_i grad f_i(x) + sum_j mu_j grad g_j(x) = 0,
    lambda_i = 0 for i not in I(x, d),  mu_j = 0 for j not in J(x, d),
    sum_i lambda_i f_i''(x, d) + sum_j mu_j g_j''(x, d) >= 0,

normalized by sum(lambda) + sum(mu) = 1 (FJ) or sum(lambda) = 1 (KT).  The
constraint part of the curvature sum runs over the active set.  Existence is
decided by a small LP that also maximizes the curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import second_dir_deriv
from .cones import TOL_ACT, TOL_CRIT, CriticalDirection, Linearization, linearize, sample_critical_directions
from .cq import STRICT_TOL, CqReport, check_socq
from .gconvex import ProbeResult, probe_2pseudoconvex, probe_quasiconvex
from .lp import LinearProgram, solve
from .problem import Problem

__all__ = [
    "MODES",
    "TOL_CURV",
    "TOL_STAT",
    "MultiplierCertificate",
    "CurvatureUnavailable",
    "DirectionOutcome",
    "Verdict",
    "Theorem3Verdict",
    "find_multipliers",
    "certify_point",
    "theorem3_probes",
    "theorem3_verdict",
    "theorem2_verdict",
]

MODES = ("fj", "kt")
TOL_CURV = 1e-7
TOL_STAT = 1e-7


class CurvatureUnavailable(ArithmeticError):
    """A second-order derivative needed by the curvature row is infinite or did not converge."""

    def __init__(self, label: str, status: str, value: float):
        super().__init__(f"{label}''(x, d) is {value} ({status})")
        self.label = label
        self.status = status
        self.value = value


@dataclass
class MultiplierCertificate:
    mode: str
    direction: CriticalDirection
    lam: np.ndarray
    mu: np.ndarray  # full length m, zero off the active set
    curvature: float
    lp_margin: float
    residual: float

    def normalized_fj(self) -> "MultiplierCertificate":
        """The same multipliers rescaled so that sum(lambda) + sum(mu) = 1."""
        total = float(self.lam.sum() + self.mu.sum())
        return MultiplierCertificate(
            "fj",
            self.direction,
            self.lam / total,
            self.mu / total,
            self.curvature / total,
            self.lp_margin / total,
            self.residual / total,
        )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            **self.direction.to_dict(),
            "lambda": self.lam.tolist(),
            "mu": self.mu.tolist(),
            "curvature": self.curvature,
            "lp_margin": self.lp_margin,
            "residual": self.residual,
        }


def _curvatures(problem: Problem, lin: Linearization, cd: CriticalDirection):
    n, m = problem.n_objectives, problem.n_constraints
    cf, cg = np.zeros(n), np.zeros(m)
    if cd.is_zero:
        return cf, cg
    items = [(f"f{i + 1}", problem.objectives[i], cf, i) for i in cd.I]
    items += [(f"g{j + 1}", problem.constraints[j], cg, j) for j in cd.J]
    for label, e, out, k in items:
        sd = second_dir_deriv(e, lin.x, cd.d)
        if not sd.finite:
            raise CurvatureUnavailable(label, sd.status, sd.value)
        out[k] = sd.value
    return cf, cg


def find_multipliers(
    problem: Problem,
    x: Sequence[float],
    cd: CriticalDirection,
    mode: str = "fj",
    tol_curv: float = TOL_CURV,
    tol_act: float = TOL_ACT,
    lin: Linearization | None = None,
) -> MultiplierCertificate | None:
    """Solve the multiplier LP for one critical direction; None when it is infeasible.

    Raises CurvatureUnavailable when a second derivative in the curvature row is
    not a finite number.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    lin = lin or linearize(problem, x, tol_act)
    n, m, s = problem.n_objectives, problem.n_constraints, problem.dim
    active = list(lin.active)
    a = len(active)
    cf, cg = _curvatures(problem, lin, cd)

    G = np.vstack([lin.grad_f, lin.grad_g[active]]).reshape(n + a, s)
    curv = np.concatenate([cf, cg[active]])
    norm = np.concatenate([np.ones(n), np.ones(a) if mode == "fj" else np.zeros(a)])
    A_eq = np.vstack([G.T, norm])
    b_eq = np.concatenate([np.zeros(s), [1.0]])
    hi = np.zeros(n + a)
    hi[list(cd.I)] = np.inf
    hi[[n + active.index(j) for j in cd.J]] = np.inf

    def _lp(c):
        return solve(LinearProgram(c, A_eq, b_eq, curv[None, :], [-tol_curv], np.zeros(n + a), hi))

    res = _lp(curv)
    if res.status == "infeasible":
        return None
    if res.status == "unbounded":
        res = _lp(np.zeros(n + a))
        margin = math.inf
    else:
        margin = float(res.value)
    z = res.x
    lam = z[:n].copy()
    mu = np.zeros(m)
    mu[active] = z[n:]
    residual = float(np.max(np.abs(G.T @ z), initial=0.0))
    return MultiplierCertificate(mode, cd, lam, mu, float(curv @ z), margin, residual)


@dataclass
class DirectionOutcome:
    direction: CriticalDirection
    status: str  # certified | refuted | inconclusive
    certificate: MultiplierCertificate | None = None
    note: str = ""

    def to_dict(self) -> dict:
        out = {**self.direction.to_dict(), "status": self.status}
        if self.certificate is not None:
            c = self.certificate
            out |= {
                "lambda": c.lam.tolist(),
                "mu": c.mu.tolist(),
                "curvature": c.curvature,
                "lp_margin": c.lp_margin,
                "residual": c.residual,
            }
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class Verdict:
    status: str  # certified | refuted | inconclusive
    mode: str
    directions_tested: int
    outcomes: list[DirectionOutcome]
    witness: CriticalDirection | None = None
    implies_not_local_pareto: bool = False
    socq: CqReport | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def certificates(self) -> list[MultiplierCertificate]:
        return [o.certificate for o in self.outcomes if o.certificate is not None]

    def to_dict(self) -> dict:
        out = {
            "status": self.status,
            "mode": self.mode,
            "directions_tested": self.directions_tested,
            "sampled": True,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "implies_not_local_pareto": self.implies_not_local_pareto,
            "directions": [o.to_dict() for o in self.outcomes],
            "notes": list(self.notes),
        }
        if self.socq is not None:
            out["socq"] = self.socq.to_dict()
        return out


def certify_point(
    problem: Problem,
    x: Sequence[float],
    mode: str = "fj",
    direction_budget: int = 200,
    seed: int = 0,
    tol_act: float = TOL_ACT,
    tol_crit: float = TOL_CRIT,
    tol_curv: float = TOL_CURV,
    strict_tol: float = STRICT_TOL,
    socq_budget: int = 64,
    stop_at_refutation: bool = False,
) -> Verdict:
    """Run the multiplier LP on d = 0 and on up to ``direction_budget`` sampled critical directions.

    A refutation in FJ mode shows x is not a local Pareto minimizer.  In KT
    mode it does so only when the second-order CQ holds on the sampled
    admissible directions, so that check is run as well.  With
    ``stop_at_refutation`` the scan ends at the first direction without
    multipliers.
    """
    lin = linearize(problem, x, tol_act)
    zero = CriticalDirection(np.zeros(problem.dim), tuple(range(problem.n_objectives)), lin.active)
    directions = [zero] + sample_critical_directions(problem, x, direction_budget, seed, tol_crit, tol_act, lin=lin)
    outcomes: list[DirectionOutcome] = []
    for cd in directions:
        try:
            cert = find_multipliers(problem, x, cd, mode, tol_curv, tol_act, lin)
        except CurvatureUnavailable as exc:
            outcomes.append(DirectionOutcome(cd, "inconclusive", note=str(exc)))
            continue
        if cert is None:
            outcomes.append(DirectionOutcome(cd, "refuted"))
            if stop_at_refutation:
                break
        else:
            outcomes.append(DirectionOutcome(cd, "certified", cert))

    n_dir = len(outcomes)
    notes = [f"over {n_dir} sampled critical directions (including d = 0)"]
    if lin.active:
        notes.append("constraint curvature summed over the active set")
    refuted = [o for o in outcomes if o.status == "refuted"]
    if refuted:
        # a nonzero direction is the more informative witness when one exists
        nonzero = [o for o in refuted if not o.direction.is_zero]
        status, witness = "refuted", (nonzero or refuted)[0].direction
    elif any(o.status == "inconclusive" for o in outcomes):
        status, witness = "inconclusive", None
    else:
        status, witness = "certified", None

    socq = None
    implies = False
    if mode == "kt":
        cq_dirs = sample_critical_directions(problem, x, socq_budget, seed, tol_crit, tol_act, objectives=False, lin=lin)
        socq = check_socq(problem, x, [c.d for c in cq_dirs], strict_tol, tol_crit, tol_act, lin)
        if status == "refuted":
            implies = socq.verdict == "holds-sampled" or socq.mfcq.holds
            if not implies:
                notes.append("second-order CQ not verified: KT refutation does not exclude local Pareto optimality")
    else:
        implies = status == "refuted"
    return Verdict(status, mode, n_dir, outcomes, witness, implies, socq, notes)


# --------------------------------------------------------------------------
# sufficiency readings
# --------------------------------------------------------------------------


def theorem3_probes(problem: Problem, trials: int = 10_000, seed: int = 0) -> dict[str, ProbeResult]:
    """2-pseudoconvexity probes on every objective and quasiconvexity probes on every constraint."""
    out: dict[str, ProbeResult] = {}
    for i, fi in enumerate(problem.objectives):
        r = probe_2pseudoconvex(fi, problem.box, trials, seed)
        r.target = f"f{i + 1}"
        out[r.target] = r
    for j, gj in enumerate(problem.constraints):
        r = probe_quasiconvex(gj, problem.box, trials, seed)
        r.target = f"g{j + 1}"
        out[r.target] = r
    return out


@dataclass
class Theorem3Verdict:
    status: str  # weak-pareto-certified | refuted | hypotheses-unverified
    reasons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"status": self.status, "reasons": list(self.reasons)}


def theorem3_verdict(
    problem: Problem,
    x: Sequence[float],
    probes: dict[str, ProbeResult],
    certification: Verdict,
    socq: CqReport | None = None,
) -> Theorem3Verdict:
    """Weak-efficiency reading of a KT certification under 2-pseudoconvex objectives and quasiconvex constraints."""
    if certification.mode != "kt":
        raise ValueError("the weak-efficiency equivalence needs a KT-mode certification")
    socq = socq or certification.socq
    reasons = [f"{name}: {r.property} counterexample" for name, r in probes.items() if r.refuted]
    missing = [f"f{i + 1}" for i in range(problem.n_objectives) if f"f{i + 1}" not in probes]
    missing += [f"g{j + 1}" for j in range(problem.n_constraints) if f"g{j + 1}" not in probes]
    reasons += [f"{name}: not probed" for name in missing]
    if socq is None or socq.verdict != "holds-sampled":
        reasons.append(f"second-order CQ: {'not checked' if socq is None else socq.verdict}")
    if reasons:
        return Theorem3Verdict("hypotheses-unverified", reasons)
    if certification.status == "certified":
        return Theorem3Verdict("weak-pareto-certified", [f"KT certified over {certification.directions_tested} directions"])
    if certification.status == "refuted":
        return Theorem3Verdict("refuted", ["KT multipliers missing for the witness direction"])
    return Theorem3Verdict("hypotheses-unverified", ["KT certification inconclusive"])


def theorem2_verdict(problem_probe: ProbeResult, certification: Verdict) -> Theorem3Verdict:
    """Global Pareto reading of a KT certification when the problem-level probe found nothing."""
    if problem_probe.property != "problem-2kt-pseudoconvex":
        raise ValueError("expected a problem-2kt-pseudoconvex probe result")
    if problem_probe.refuted:
        return Theorem3Verdict("hypotheses-unverified", ["problem-level pseudoconvexity counterexample"])
    if problem_probe.trials == 0:
        return Theorem3Verdict("hypotheses-unverified", ["no dominated feasible pairs sampled"])
    if certification.mode == "kt" and certification.status == "certified":
        return Theorem3Verdict("pareto-certified", [f"KT certified over {certification.directions_tested} directions"])
    return Theorem3Verdict("not-certified", [f"certification {certification.status} in {certification.mode} mode"])
