"""Dominance relations and brute-force grid oracles for (weak) Pareto optimality.

Grids are nested dyadic lattices: along each coordinate the box is split into
2^k cells with k = ceil(log2(width / step)), so halving ``grid_step`` refines
the previous grid and every witness found on a coarse grid persists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .problem import Problem

__all__ = [
    "KINDS",
    "FEAS_TOL",
    "RESTRICTION_TOL",
    "BudgetExceeded",
    "dominates",
    "GridOracle",
    "OracleVerdict",
    "RestrictionCheck",
    "classify",
    "component_restriction_check",
    "luc_schaible_check",
]

KINDS = ("strict", "weak", "pareto")
FEAS_TOL = 1e-12
RESTRICTION_TOL = 1e-9
DEFAULT_BUDGET = 10_000_000


class BudgetExceeded(ValueError):
    pass


def dominates(a: Sequence[float], b: Sequence[float], kind: str = "pareto") -> bool:
    """Exact componentwise comparison of objective vectors ``a`` against ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if kind == "strict":
        return bool(np.all(a < b))
    if kind == "weak":
        return bool(np.all(a <= b))
    if kind == "pareto":
        return bool(np.all(a <= b) and np.any(a < b))
    raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


def _lex_first(points: np.ndarray) -> np.ndarray:
    order = np.lexsort(points.T[::-1])
    return points[order[0]]


@dataclass
class OracleVerdict:
    classification: str  # pareto | weak-pareto-only | dominated
    scope: str
    grid_step: float
    resolution: str
    witness: np.ndarray | None = None  # lexicographically smallest Pareto dominator
    strict_witness: np.ndarray | None = None
    points_scanned: int = 0
    radius: float | None = None

    @property
    def weak_pareto(self) -> bool:
        return self.classification != "dominated"

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "scope": self.scope,
            "radius": self.radius,
            "grid_step": self.grid_step,
            "resolution": self.resolution,
            "witness": None if self.witness is None else self.witness.tolist(),
            "strict_witness": None if self.strict_witness is None else self.strict_witness.tolist(),
            "points_scanned": self.points_scanned,
        }


class GridOracle:
    """Feasible points of a nested dyadic grid over the problem box, with objective values cached."""

    def __init__(self, problem: Problem, grid_step: float, budget: int = DEFAULT_BUDGET):
        if not grid_step > 0:
            raise ValueError("grid_step must be positive")
        self.problem = problem
        lo, hi = problem.lower, problem.upper
        widths = hi - lo
        self.levels = [max(0, math.ceil(math.log2(w / grid_step))) for w in widths]
        self.steps = np.array([w / 2**k for w, k in zip(widths, self.levels)])
        size = math.prod(2**k + 1 for k in self.levels)
        if size > budget:
            raise BudgetExceeded(
                f"grid with step {grid_step} needs {size} evaluations (budget {budget}); use a larger step"
            )
        axes = [np.linspace(a, b, 2**k + 1) for a, b, k in zip(lo, hi, self.levels)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, problem.dim)
        F = problem.f_batch(X)
        G = problem.g_batch(X)
        ok = np.all(np.isfinite(F), axis=1) & np.all(np.isfinite(G), axis=1) & np.all(G <= FEAS_TOL, axis=1)
        self.points = X[ok]
        self.values = F[ok]
        self.grid_step = float(np.max(self.steps))

    @property
    def resolution(self) -> str:
        return f"grid-resolution {self.grid_step:g}"

    def _scope(self, x: np.ndarray, scope: str, radius: float | None):
        if scope == "global":
            return self.points, self.values, None
        if scope != "local":
            raise ValueError("scope must be 'global' or 'local'")
        if radius is None:
            radius = 0.1 * float(np.linalg.norm(self.problem.upper - self.problem.lower))
        near = np.linalg.norm(self.points - x, axis=1) <= radius
        return self.points[near], self.values[near], radius

    def candidates(self, x: Sequence[float], scope: str = "global", radius: float | None = None):
        """Grid points in scope together with x itself, and their objective values."""
        x = np.asarray(x, dtype=float)
        P, F, radius = self._scope(x, scope, radius)
        fx = self.problem.f(x)
        return np.vstack([P, x]), np.vstack([F, fx]), fx, radius

    def classify(self, x: Sequence[float], scope: str = "global", radius: float | None = None) -> OracleVerdict:
        x = np.asarray(x, dtype=float)
        self.problem.check_feasible(x, FEAS_TOL)
        P, F, fx, radius = self.candidates(x, scope, radius)
        weakly = np.all(F <= fx, axis=1)
        pareto_dom = weakly & np.any(F < fx, axis=1)
        strict_dom = np.all(F < fx, axis=1)
        if strict_dom.any():
            label = "dominated"
        elif pareto_dom.any():
            label = "weak-pareto-only"
        else:
            label = "pareto"
        return OracleVerdict(
            label,
            scope,
            self.grid_step,
            self.resolution,
            _lex_first(P[pareto_dom]) if pareto_dom.any() else None,
            _lex_first(P[strict_dom]) if strict_dom.any() else None,
            len(P),
            radius,
        )

    def component_minima(self, x: Sequence[float], scope: str = "global", radius: float | None = None):
        """For each i: the minimum of f_i over C_i = {y : f_j(y) <= f_j(x) for j != i} and a minimizer."""
        P, F, fx, _ = self.candidates(x, scope, radius)
        n = self.problem.n_objectives
        out = []
        for i in range(n):
            others = [j for j in range(n) if j != i]
            mask = np.all(F[:, others] <= fx[others], axis=1)
            vals = F[mask, i]
            best = float(vals.min())
            arg = _lex_first(P[mask][vals == best])
            out.append((best, arg, float(fx[i])))
        return out


def classify(
    problem: Problem,
    x: Sequence[float],
    scope: str = "global",
    grid_step: float = 0.05,
    radius: float | None = None,
    budget: int = DEFAULT_BUDGET,
) -> OracleVerdict:
    """Classify x as pareto / weak-pareto-only / dominated against the grid (plus x itself)."""
    return GridOracle(problem, grid_step, budget).classify(x, scope, radius)


@dataclass
class RestrictionCheck:
    verdict: str  # consistent | violation
    scalar_side: bool
    oracle_side: bool
    components: list[dict]
    classification: str
    annotations: list[str] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "scalar_side": self.scalar_side,
            "oracle_side": self.oracle_side,
            "classification": self.classification,
            "components": self.components,
            "annotations": list(self.annotations),
        }


def _components(oracle: GridOracle, x, scope, radius) -> list[dict]:
    rows = []
    for i, (best, arg, fi) in enumerate(oracle.component_minima(x, scope, radius)):
        rows.append(
            {
                "index": f"f{i + 1}",
                "f_x": fi,
                "min_over_C": best,
                "minimizer": arg.tolist(),
                "minimizes": best >= fi - RESTRICTION_TOL,
            }
        )
    return rows


def component_restriction_check(
    problem: Problem,
    x: Sequence[float],
    grid_step: float = 0.05,
    scope: str = "global",
    radius: float | None = None,
    oracle: GridOracle | None = None,
) -> RestrictionCheck:
    """Compare "x minimizes every f_i over C_i" with the oracle's Pareto classification.

    C_i = {feasible y : f_j(y) <= f_j(x) for all j != i} on the grid, with the
    weak inequality.  Both sides are reported; any disagreement is a violation.
    """
    oracle = oracle or GridOracle(problem, grid_step)
    comps = _components(oracle, x, scope, radius)
    cls = oracle.classify(x, scope, radius).classification
    scalar = all(c["minimizes"] for c in comps)
    oracle_side = cls == "pareto"
    verdict = "consistent" if scalar == oracle_side else "violation"
    return RestrictionCheck(verdict, scalar, oracle_side, comps, cls, [oracle.resolution])


def luc_schaible_check(
    problem: Problem,
    x: Sequence[float],
    grid_step: float = 0.05,
    hypotheses_verified: bool | None = None,
    scope: str = "global",
    radius: float | None = None,
    oracle: GridOracle | None = None,
) -> RestrictionCheck:
    """Compare "x minimizes some f_k over C_k" with the oracle's weak-Pareto classification.

    The equivalence needs quasiconvex and semistrictly quasiconvex objectives;
    pass the probe outcome as ``hypotheses_verified``.  When it is not True the
    result carries a ``hypotheses-unverified`` annotation.
    """
    oracle = oracle or GridOracle(problem, grid_step)
    comps = _components(oracle, x, scope, radius)
    cls = oracle.classify(x, scope, radius).classification
    scalar = any(c["minimizes"] for c in comps)
    oracle_side = cls != "dominated"
    verdict = "consistent" if scalar == oracle_side else "violation"
    notes = [oracle.resolution]
    if hypotheses_verified is not True:
        notes.append("hypotheses-unverified")
    return RestrictionCheck(verdict, scalar, oracle_side, comps, cls, notes)
