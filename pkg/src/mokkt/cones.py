"""Active sets, critical directions and the index sets I(x, d), J(x, d)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calculus import _safe_gradient, gradient
from .problem import Problem

__all__ = [
    "TOL_ACT",
    "TOL_CRIT",
    "Linearization",
    "CriticalDirection",
    "linearize",
    "active_set",
    "is_critical",
    "sample_critical_directions",
]

TOL_ACT = 1e-8
TOL_CRIT = 1e-8
NULLSPACE_MAX_DIM = 4


@dataclass
class Linearization:
    """Values and gradients of a problem at a feasible point."""

    x: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    active: tuple[int, ...]
    grad_f: np.ndarray
    grad_g: np.ndarray  # rows of inactive, nondifferentiable constraints are NaN


@dataclass(frozen=True)
class CriticalDirection:
    d: np.ndarray
    I: tuple[int, ...]
    J: tuple[int, ...]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.d)

    def to_dict(self) -> dict:
        return {
            "d": self.d.tolist(),
            "I": [i + 1 for i in self.I],
            "J": [j + 1 for j in self.J],
        }


def linearize(problem: Problem, x: Sequence[float], tol_act: float = TOL_ACT) -> Linearization:
    """Evaluate f, g and the required gradients at a feasible ``x``.

    Raises InfeasiblePointError if some g_j(x) > tol_act; gradients of the
    objectives and of the active constraints must exist.
    """
    x = np.asarray(x, dtype=float)
    gx = problem.check_feasible(x, tol_act)
    active = tuple(j for j, v in enumerate(gx) if abs(v) <= tol_act)
    grad_f = np.array([gradient(fi, x) for fi in problem.objectives]).reshape(-1, problem.dim)
    grad_g = np.array(
        [gradient(gj, x) if j in active else _safe_gradient(gj, x) for j, gj in enumerate(problem.constraints)]
    ).reshape(-1, problem.dim)
    return Linearization(x, problem.f(x), gx, active, grad_f, grad_g)


def active_set(problem: Problem, x: Sequence[float], tol_act: float = TOL_ACT) -> tuple[int, ...]:
    """Indices j (0-based) with |g_j(x)| <= tol_act; raises if x is infeasible."""
    gx = problem.check_feasible(x, tol_act)
    return tuple(j for j, v in enumerate(gx) if abs(v) <= tol_act)


def _classify(lin: Linearization, d: np.ndarray, tol: float, objectives: bool = True):
    if not np.any(d):
        return True, tuple(range(len(lin.f_values))), lin.active
    d = d / np.max(np.abs(d))
    ok = True
    I: tuple[int, ...] = ()
    if objectives:
        sf = lin.grad_f @ d
        ok = bool(np.all(sf <= tol))
        I = tuple(int(i) for i in np.flatnonzero(np.abs(sf) <= tol))
    J: list[int] = []
    for j in lin.active:
        sg = float(lin.grad_g[j] @ d)
        if sg > tol:
            ok = False
        if abs(sg) <= tol:
            J.append(j)
    return ok, I, tuple(J)


def is_critical(
    problem: Problem,
    x: Sequence[float],
    d: Sequence[float],
    tol: float = TOL_CRIT,
    tol_act: float = TOL_ACT,
    lin: Linearization | None = None,
) -> tuple[bool, tuple[int, ...], tuple[int, ...]]:
    """Whether ``d`` is a critical direction at ``x``, with the sets I(x, d) and J(x, d).

    The test is applied to d / ||d||_inf, so the verdict is invariant under
    positive scaling.  d = 0 is critical with I = all objectives, J = A(x).
    """
    lin = lin or linearize(problem, x, tol_act)
    return _classify(lin, np.asarray(d, dtype=float), tol)


def _nullspace(rows: np.ndarray) -> np.ndarray:
    _, sv, vt = np.linalg.svd(rows)
    scale = sv[0] if sv.size else 0.0
    rank = int(np.sum(sv > 1e-10 * max(scale, 1.0)))
    return vt[rank:].T


def _unit(v: np.ndarray) -> np.ndarray | None:
    norm = np.max(np.abs(v)) if v.size else 0.0
    if not np.isfinite(norm) or norm <= 1e-12:
        return None
    return v / norm


def _structured_candidates(rows: np.ndarray, s: int):
    eye = np.eye(s)
    for k in range(s):
        yield eye[k]
        yield -eye[k]
    norms = np.linalg.norm(rows, axis=1)
    live = [r / n for r, n in zip(rows, norms) if n > 1e-12]
    if live:
        yield -np.sum(live, axis=0)
    for r in live:
        yield -r
        for k in range(s):
            p = eye[k] - (r @ eye[k]) * r
            yield p
            yield -p
    if s > NULLSPACE_MAX_DIM or not len(rows):
        return
    # faces of the critical cone: directions orthogonal to a subset of gradients
    for size in range(1, min(len(rows), s - 1) + 1):
        for subset in itertools.combinations(range(len(rows)), size):
            basis = _nullspace(rows[list(subset)])
            if basis.size == 0:
                continue
            rest = [live_r for i, live_r in enumerate(rows) if i not in subset and norms[i] > 1e-12]
            if rest:
                push = -np.sum([r / np.linalg.norm(r) for r in rest], axis=0)
                yield basis @ (basis.T @ push)
            for col in basis.T:
                yield col
                yield -col


def sample_critical_directions(
    problem: Problem,
    x: Sequence[float],
    count: int,
    seed: int = 0,
    tol: float = TOL_CRIT,
    tol_act: float = TOL_ACT,
    objectives: bool = True,
    lin: Linearization | None = None,
) -> list[CriticalDirection]:
    """Deterministically sample up to ``count`` distinct nonzero critical directions.

    Structured candidates come first (coordinate axes, negative and projected
    gradients, and for s <= 4 the null spaces of every subset of at most s-1
    stacked gradients, which reach the faces where I or J is nonempty); random
    Gaussian directions fill the rest.  With ``objectives=False`` only the
    active constraints are imposed, which gives the directions admissible for
    the second-order constraint qualification.
    """
    lin = lin or linearize(problem, x, tol_act)
    s = problem.dim
    rows = [lin.grad_g[j] for j in lin.active]
    if objectives:
        rows = list(lin.grad_f) + rows
    rows_arr = np.array(rows).reshape(-1, s)

    out: list[CriticalDirection] = []
    seen: set[tuple] = set()

    def offer(v: np.ndarray) -> None:
        u = _unit(np.asarray(v, dtype=float))
        if u is None:
            return
        u = np.where(np.abs(u) < 1e-15, 0.0, u)
        key = tuple(np.round(u, 10))
        if key in seen:
            return
        ok, I, J = _classify(lin, u, tol, objectives)
        if ok:
            seen.add(key)
            out.append(CriticalDirection(u, I, J))

    for cand in _structured_candidates(rows_arr, s):
        if len(out) >= count:
            return out
        offer(cand)

    rng = np.random.default_rng(seed)
    checks = [lin.grad_g[j] for j in lin.active]
    if objectives:
        checks = list(lin.grad_f) + checks
    C = np.array(checks).reshape(-1, s)
    budget = 200 * max(count, 1)
    while len(out) < count and budget > 0:
        n = min(budget, 4096)
        budget -= n
        D = rng.standard_normal((n, s))
        D /= np.max(np.abs(D), axis=1, keepdims=True)
        keep = np.all(D @ C.T <= tol, axis=1) if len(C) else np.ones(n, bool)
        for v in D[keep]:
            if len(out) >= count:
                break
            offer(v)
    return out
