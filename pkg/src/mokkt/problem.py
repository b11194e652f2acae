"""Problem definition: minimize f(x) subject to g(x) <= 0 over a box-shaped domain."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .expr import Expr, evaluate, evaluate_batch, parse

__all__ = ["Problem", "InfeasiblePointError", "ProblemFileError"]


class ProblemFileError(ValueError):
    pass


class InfeasiblePointError(ValueError):
    """The candidate violates some constraint; ``violations`` maps index -> g_j(x)."""

    def __init__(self, violations: dict[int, float]):
        detail = ", ".join(f"g{j + 1} = {v:+.6g}" for j, v in sorted(violations.items()))
        super().__init__(f"infeasible: {detail}")
        self.violations = violations


@dataclass(frozen=True)
class Problem:
    names: tuple[str, ...]
    objectives: tuple[Expr, ...]
    constraints: tuple[Expr, ...]
    box: tuple[tuple[float, float], ...]
    point: tuple[float, ...] | None = None
    name: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def n_objectives(self) -> int:
        return len(self.objectives)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.box])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.box])

    @classmethod
    def build(
        cls,
        names: Sequence[str],
        objectives: Sequence[str],
        constraints: Sequence[str] = (),
        box: Sequence[Sequence[float]] | None = None,
        point: Sequence[float] | None = None,
        name: str = "",
        metadata: dict | None = None,
    ) -> "Problem":
        names = tuple(names)
        if not objectives:
            raise ProblemFileError("at least one objective is required")
        if box is None:
            raise ProblemFileError("a box [lo, hi] per variable is required")
        box_t = tuple((float(lo), float(hi)) for lo, hi in box)
        if len(box_t) != len(names):
            raise ProblemFileError(f"box has {len(box_t)} entries for {len(names)} variables")
        for (lo, hi), v in zip(box_t, names):
            if not lo < hi:
                raise ProblemFileError(f"box for {v} must satisfy lo < hi, got [{lo}, {hi}]")
        pt = None
        if point is not None:
            pt = tuple(float(p) for p in point)
            if len(pt) != len(names):
                raise ProblemFileError(f"point has dimension {len(pt)}, expected {len(names)}")
            if any(not lo <= p <= hi for p, (lo, hi) in zip(pt, box_t)):
                raise ProblemFileError(f"point {pt} lies outside the box")
        return cls(
            names,
            tuple(parse(t, names) for t in objectives),
            tuple(parse(t, names) for t in constraints),
            box_t,
            pt,
            name,
            dict(metadata or {}),
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Problem":
        try:
            return cls.build(
                data["vars"],
                data["objectives"],
                data.get("constraints", []),
                data.get("box"),
                data.get("point"),
                data.get("name", ""),
                data.get("metadata"),
            )
        except KeyError as exc:
            raise ProblemFileError(f"missing field {exc.args[0]!r}") from None

    @classmethod
    def load(cls, path: str | Path) -> "Problem":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "vars": list(self.names),
            "objectives": [str(f) for f in self.objectives],
            "constraints": [str(g) for g in self.constraints],
            "box": [list(b) for b in self.box],
        }
        if self.point is not None:
            out["point"] = list(self.point)
        if self.name:
            out["name"] = self.name
        return out

    def with_point(self, point: Sequence[float]) -> "Problem":
        return Problem.build(
            self.names,
            [str(f) for f in self.objectives],
            [str(g) for g in self.constraints],
            self.box,
            point,
            self.name,
            self.metadata,
        )

    def f(self, x: Sequence[float]) -> np.ndarray:
        return np.array([evaluate(fi, x) for fi in self.objectives])

    def g(self, x: Sequence[float]) -> np.ndarray:
        return np.array([evaluate(gj, x) for gj in self.constraints])

    def f_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.column_stack([evaluate_batch(fi, X) for fi in self.objectives])

    def g_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if not self.constraints:
            return np.zeros((X.shape[0], 0))
        return np.column_stack([evaluate_batch(gj, X) for gj in self.constraints])

    def check_feasible(self, x: Sequence[float], tol: float = 1e-8) -> np.ndarray:
        """Return g(x), raising :class:`InfeasiblePointError` if some g_j(x) > tol."""
        gx = self.g(x)
        bad = {j: float(v) for j, v in enumerate(gx) if v > tol}
        if bad:
            raise InfeasiblePointError(bad)
        return gx

    def is_feasible(self, x: Sequence[float], tol: float = 1e-8) -> bool:
        try:
            self.check_feasible(x, tol)
        except (InfeasiblePointError, ArithmeticError):
            return False
        return True
