"""First- and second-order Mangasarian-Fromovitz constraint qualifications.

Sign convention: MFCQ asks for u with grad g_j(x) @ u > 0 on the active set,
the second-order version for (u, w >= 0) with
grad g_j(x) @ u > w * g_j''(x, d).  Both are checked through strict-feasibility
LPs whose optimal margin must exceed ``strict_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import second_dir_deriv
from .cones import TOL_ACT, TOL_CRIT, Linearization, linearize
from .lp import LinearProgram, solve
from .problem import Problem

__all__ = [
    "STRICT_TOL",
    "MfcqResult",
    "SocqResult",
    "CqReport",
    "AdmissibilityError",
    "check_mfcq",
    "check_socq_direction",
    "check_socq",
]

STRICT_TOL = 1e-7


class AdmissibilityError(ValueError):
    """The direction is zero or increases some active constraint to first order."""


@dataclass
class MfcqResult:
    holds: bool
    margin: float
    u: np.ndarray | None
    active: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "verdict": "holds" if self.holds else "fails",
            "margin": self.margin,
            "u": None if self.u is None else self.u.tolist(),
            "active": [j + 1 for j in self.active],
        }


@dataclass
class SocqResult:
    status: str  # holds | fails | inconclusive
    d: np.ndarray
    margin: float | None = None
    u: np.ndarray | None = None
    omega: float | None = None
    curvatures: dict[int, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.status == "holds"

    def to_dict(self) -> dict:
        return {
            "d": self.d.tolist(),
            "verdict": self.status,
            "margin": self.margin,
            "u": None if self.u is None else self.u.tolist(),
            "omega": self.omega,
            "curvatures": {f"g{j + 1}": v for j, v in sorted(self.curvatures.items())},
            "notes": list(self.notes),
        }


@dataclass
class CqReport:
    mfcq: MfcqResult
    socq: list[SocqResult]
    verdict: str  # holds-sampled | fails | inconclusive
    directions_tested: int
    mfcq_implies_socq_checked: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mfcq": self.mfcq.to_dict(),
            "socq": {
                "verdict": self.verdict,
                "directions_tested": self.directions_tested,
                "sampled": True,
                "directions": [r.to_dict() for r in self.socq],
            },
            "mfcq_implies_socq_checked": self.mfcq_implies_socq_checked,
            "notes": list(self.notes),
        }


def _margin_lp(rows: np.ndarray, extra_cols: np.ndarray | None, s: int):
    """max t s.t. rows @ u + extra_cols * w - t >= 0, |u|_inf <= 1, 0 <= w <= 1."""
    n_rows = rows.shape[0]
    has_w = extra_cols is not None
    k = s + (1 if has_w else 0) + 1
    A = np.zeros((n_rows, k))
    A[:, :s] = rows
    if has_w:
        A[:, s] = extra_cols
    A[:, -1] = -1.0
    lo = np.concatenate([-np.ones(s), [0.0] if has_w else [], [-np.inf]])
    hi = np.concatenate([np.ones(s), [1.0] if has_w else [], [np.inf]])
    c = np.zeros(k)
    c[-1] = 1.0
    return solve(LinearProgram(c, A_ge=A, b_ge=np.zeros(n_rows), lo=lo, hi=hi))


def check_mfcq(
    problem: Problem,
    x: Sequence[float],
    strict_tol: float = STRICT_TOL,
    tol_act: float = TOL_ACT,
    lin: Linearization | None = None,
) -> MfcqResult:
    """Solve max s s.t. grad g_j(x) @ u >= s (j active), |u|_inf <= 1."""
    lin = lin or linearize(problem, x, tol_act)
    if not lin.active:
        return MfcqResult(True, math.inf, np.zeros(problem.dim), ())
    rows = lin.grad_g[list(lin.active)]
    res = _margin_lp(rows, None, problem.dim)
    margin = float(res.value)
    u = res.x[: problem.dim]
    return MfcqResult(margin > strict_tol, margin, u, lin.active)


def check_socq_direction(
    problem: Problem,
    x: Sequence[float],
    d: Sequence[float],
    strict_tol: float = STRICT_TOL,
    tol: float = TOL_CRIT,
    tol_act: float = TOL_ACT,
    lin: Linearization | None = None,
) -> SocqResult:
    """Second-order MFCQ for one direction d != 0 with grad g_j(x) @ d <= tol on A(x).

    Solves max s s.t. grad g_j @ u - w g_j''(x, d) >= s, |u|_inf <= 1, 0 <= w <= 1.
    Active constraints with g_j''(x, d) = -inf satisfy the inequality for any
    w > 0; they are dropped and w >= s is imposed instead.  A +inf curvature
    makes the direction inconclusive.
    """
    lin = lin or linearize(problem, x, tol_act)
    d = np.asarray(d, dtype=float)
    if not np.any(d):
        raise AdmissibilityError("the second-order CQ is only required for d != 0")
    scale = np.max(np.abs(d))
    for j in lin.active:
        slope = float(lin.grad_g[j] @ d) / scale
        if slope > tol:
            raise AdmissibilityError(f"grad g{j + 1}(x) @ d = {slope:.3g} > 0")
    if not lin.active:
        return SocqResult("holds", d, math.inf, np.zeros(problem.dim), 0.0, notes=["no active constraints"])

    curv: dict[int, float] = {}
    notes: list[str] = []
    for j in lin.active:
        sd = second_dir_deriv(problem.constraints[j], lin.x, d)
        if sd.status == "failed":
            return SocqResult("inconclusive", d, curvatures=curv, notes=[f"g{j + 1}'' did not converge"])
        curv[j] = sd.value
        if sd.status == "estimated":
            notes.append(f"g{j + 1}'' estimated by extrapolation")
    if any(v == math.inf for v in curv.values()):
        return SocqResult("inconclusive", d, curvatures=curv, notes=notes + ["+inf curvature"])

    finite = [j for j in lin.active if math.isfinite(curv[j])]
    rows = lin.grad_g[finite].reshape(len(finite), problem.dim)
    w_col = -np.array([curv[j] for j in finite])
    if len(finite) < len(lin.active):
        notes.append("nonfinite-curvature")
        # w itself must stay positive for the -inf rows
        rows = np.vstack([rows, np.zeros(problem.dim)])
        w_col = np.concatenate([w_col, [1.0]])
    res = _margin_lp(rows, w_col, problem.dim)
    margin = float(res.value)
    u = res.x[: problem.dim]
    omega = float(res.x[problem.dim])
    status = "holds" if margin > strict_tol else "fails"
    return SocqResult(status, d, margin, u, omega, curv, notes)


def check_socq(
    problem: Problem,
    x: Sequence[float],
    directions: Sequence[Sequence[float]],
    strict_tol: float = STRICT_TOL,
    tol: float = TOL_CRIT,
    tol_act: float = TOL_ACT,
    lin: Linearization | None = None,
) -> CqReport:
    """Run the second-order CQ over a sample of admissible nonzero directions.

    The verdict is ``holds-sampled`` only when every tested direction holds,
    ``fails`` as soon as one fails and ``inconclusive`` otherwise (including an
    empty sample).
    """
    lin = lin or linearize(problem, x, tol_act)
    mfcq = check_mfcq(problem, x, strict_tol, tol_act, lin)
    results = [check_socq_direction(problem, x, d, strict_tol, tol, tol_act, lin) for d in directions]
    notes = []
    if not results:
        verdict = "inconclusive"
        notes.append("no-directions")
    elif any(r.status == "fails" for r in results):
        verdict = "fails"
    elif all(r.holds for r in results):
        verdict = "holds-sampled"
    else:
        verdict = "inconclusive"
    implied_ok = True
    if mfcq.holds:
        implied_ok = all(
            r.status != "fails" and (r.margin is None or r.margin >= mfcq.margin - 1e-9) for r in results
        )
        if not implied_ok:
            notes.append("MFCQ holds but some second-order margin fell below the MFCQ margin")
    return CqReport(mfcq, results, verdict, len(results), implied_ok, notes)
