"""Sampling probes that try to refute generalized-convexity properties.

A probe either returns a concrete counterexample, which can be re-checked with
:func:`reverify`, or reports that none was found in the sampled trials.  It
never proves a property.

Sampling mixes uniform points with points snapped to dyadic lattices of the
box (midpoints, quarter points, ...), because degenerate witnesses such as a
stationary point at the box centre have probability zero under uniform draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import (
    NonDifferentiableError,
    directional_derivative,
    directional_derivative_batch,
    gradient,
    second_dir_deriv,
)
from .cones import TOL_ACT
from .expr import DomainError, Expr, evaluate, evaluate_batch
from .problem import Problem

__all__ = [
    "MARGIN",
    "PROPERTIES",
    "ProbeResult",
    "probe_quasiconvex",
    "probe_pseudoconvex",
    "probe_2pseudoconvex",
    "probe_semistrict_quasiconvex",
    "probe_problem_2kt_pseudoconvex",
    "probe_function",
    "reverify",
    "check_quasiconvex_triple",
    "check_pseudoconvex_pair",
    "check_2pseudoconvex_pair",
    "check_semistrict_triple",
    "check_problem_pair",
]

MARGIN = 1e-9
BATCH = 4096
PROPERTIES = (
    "quasiconvex-on",
    "pseudoconvex",
    "two-pseudoconvex",
    "semistrict-quasiconvex",
    "problem-2kt-pseudoconvex",
)


@dataclass
class ProbeResult:
    property: str
    trials: int
    outcome: str  # counterexample | none-found
    witness: dict | None = None
    skipped: dict = field(default_factory=dict)
    target: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def refuted(self) -> bool:
        return self.outcome == "counterexample"

    def to_dict(self) -> dict:
        out = {
            "property": self.property,
            "target": self.target,
            "trials": self.trials,
            "outcome": self.outcome,
            "sampled": True,
            "skipped": dict(self.skipped),
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.notes:
            out["notes"] = list(self.notes)
        return out


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def _box(box) -> tuple[np.ndarray, np.ndarray]:
    b = np.asarray(box, dtype=float).reshape(-1, 2)
    if np.any(b[:, 0] >= b[:, 1]):
        raise ValueError("box must satisfy lo < hi in every coordinate")
    return b[:, 0], b[:, 1]


def _points(rng: np.random.Generator, lo: np.ndarray, hi: np.ndarray, n: int, p_snap: float = 0.25):
    s = lo.size
    uniform = lo + (hi - lo) * rng.random((n, s))
    cells = 2 ** rng.integers(1, 5, size=(n, s))
    lattice = lo + (hi - lo) * rng.integers(0, cells + 1) / cells
    return np.where(rng.random((n, s)) < p_snap, lattice, uniform)


def _weights(rng: np.random.Generator, n: int, open_interval: bool):
    t = rng.random(n)
    dyadic = rng.integers(1, 4, size=n)
    snapped = rng.integers(1, 2**dyadic) / 2.0**dyadic
    t = np.where(rng.random(n) < 0.25, snapped, t)
    if open_interval:
        t = np.clip(t, 1e-6, 1.0 - 1e-6)
    return t


def _value(e: Expr, x) -> float | None:
    try:
        return evaluate(e, x)
    except (DomainError, ValueError):
        return None


# --------------------------------------------------------------------------
# pointwise checks (shared by the probes and by re-verification)
# --------------------------------------------------------------------------


def check_quasiconvex_triple(e: Expr, x, y, t: float) -> dict | None:
    """Counterexample data if f((1-t)x + ty) > max(f(x), f(y)) + MARGIN."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    z = (1.0 - t) * x + t * y
    fx, fy, fz = _value(e, x), _value(e, y), _value(e, z)
    if None in (fx, fy, fz):
        return None
    excess = fz - max(fx, fy)
    if excess > MARGIN:
        return {"x": x.tolist(), "y": y.tolist(), "t": float(t), "f_x": fx, "f_y": fy, "f_z": fz, "margin": excess}
    return None


def _slope(e: Expr, x: np.ndarray, d: np.ndarray) -> float | None:
    """grad f(x) @ d, or None when f is not differentiable at x."""
    try:
        gradient(e, x)
        return directional_derivative(e, x, d)[1]
    except (NonDifferentiableError, DomainError):
        return None


def check_pseudoconvex_pair(e: Expr, x, y) -> dict | None:
    """Counterexample data if f(y) < f(x) - MARGIN and grad f(x)(y - x) >= -MARGIN."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    fx, fy = _value(e, x), _value(e, y)
    if fx is None or fy is None or not fy < fx - MARGIN:
        return None
    slope = _slope(e, x, y - x)
    if slope is None or slope < -MARGIN:
        return None
    return {"x": x.tolist(), "y": y.tolist(), "f_x": fx, "f_y": fy, "slope": slope, "margin": fx - fy}


def check_2pseudoconvex_pair(e: Expr, x, y) -> dict | None:
    """Counterexample data for second-order pseudoconvexity at x, or None.

    Violation: f(y) < f(x) - MARGIN and either the slope toward y is positive,
    or it vanishes and f''(x, y - x) is not negative.  Raises
    :class:`_CurvatureFailed` if the second derivative cannot be determined.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    fx, fy = _value(e, x), _value(e, y)
    if fx is None or fy is None or not fy < fx - MARGIN:
        return None
    slope = _slope(e, x, y - x)
    if slope is None:
        return None
    base = {"x": x.tolist(), "y": y.tolist(), "f_x": fx, "f_y": fy, "slope": slope, "margin": fx - fy}
    if slope > MARGIN:
        return base | {"branch": "first-order"}
    if abs(slope) <= MARGIN:
        sd = second_dir_deriv(e, x, y - x)
        if sd.status == "failed":
            raise _CurvatureFailed()
        if sd.value >= -MARGIN:
            return base | {"branch": "second-order", "curvature": sd.value, "curvature_status": sd.status}
    return None


def check_semistrict_triple(e: Expr, x, y, t: float) -> dict | None:
    """Counterexample data if f(y) < f(x) - MARGIN but f((1-t)x + ty) >= f(x).

    The segment value is compared without slack: a near-tie below f(x) is not
    a violation of the strict descent along the segment.
    """
    if not 0.0 < t < 1.0:
        return None
    x, y = np.asarray(x, float), np.asarray(y, float)
    z = (1.0 - t) * x + t * y
    fx, fy, fz = _value(e, x), _value(e, y), _value(e, z)
    if None in (fx, fy, fz) or not fy < fx - MARGIN:
        return None
    if fz >= fx:
        return {"x": x.tolist(), "y": y.tolist(), "t": float(t), "f_x": fx, "f_y": fy, "f_z": fz, "margin": fx - fy}
    return None


class _CurvatureFailed(Exception):
    pass


# --------------------------------------------------------------------------
# single-function probes
# --------------------------------------------------------------------------


def _lattice_pairs(lo: np.ndarray, hi: np.ndarray, level: int = 2, cap: int = 4096):
    """All pairs of a coarse dyadic lattice, x in lexicographic order, y by distance to x."""
    axes = [np.linspace(a, b, 2**level + 1) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    X, Y = [], []
    for x in pts:
        dist = np.linalg.norm(pts - x, axis=1)
        for k in np.argsort(dist, kind="stable"):
            if dist[k] > 0:
                X.append(x)
                Y.append(pts[k])
        if len(X) >= cap:
            break
    return np.array(X[:cap]).reshape(-1, lo.size), np.array(Y[:cap]).reshape(-1, lo.size)


def _batches(rng: np.random.Generator, lo, hi, trials: int, open_t: bool):
    """Lattice pairs first (t = 1/2), then uniform/lattice-snapped random triples."""
    Xl, Yl = _lattice_pairs(lo, hi)
    take = min(len(Xl), trials)
    if take:
        yield Xl[:take], Yl[:take], np.full(take, 0.5)
    done = take
    while done < trials:
        n = min(BATCH, trials - done)
        yield _points(rng, lo, hi, n), _points(rng, lo, hi, n), _weights(rng, n, open_t)
        done += n


def _segment_filter(e: Expr, X, Y, T, prop: str, skipped: dict):
    Z = (1.0 - T)[:, None] * X + T[:, None] * Y
    fx, fy, fz = evaluate_batch(e, X), evaluate_batch(e, Y), evaluate_batch(e, Z)
    valid = np.isfinite(fx) & np.isfinite(fy) & np.isfinite(fz)
    skipped["domain"] += int(np.sum(~valid))
    if prop == "quasiconvex-on":
        return valid & (fz > np.maximum(fx, fy) + MARGIN), None
    return valid & (fy < fx - MARGIN) & (fz >= fx), None


def _slope_filter(e: Expr, X, Y, T, prop: str, skipped: dict):
    fy = evaluate_batch(e, Y)
    fx, slope, flagged = directional_derivative_batch(e, X, Y - X)
    valid = np.isfinite(fx) & np.isfinite(fy)
    skipped["domain"] += int(np.sum(~valid))
    return valid & (fy < fx - MARGIN) & (flagged | (slope >= -MARGIN)), flagged


_CHECKS = {
    "quasiconvex-on": (_segment_filter, check_quasiconvex_triple),
    "semistrict-quasiconvex": (_segment_filter, check_semistrict_triple),
    "pseudoconvex": (_slope_filter, check_pseudoconvex_pair),
    "two-pseudoconvex": (_slope_filter, check_2pseudoconvex_pair),
}


def _probe(prop: str, e: Expr, box, trials: int, seed: int) -> ProbeResult:
    lo, hi = _box(box)
    rng = np.random.default_rng(seed)
    prefilter, check = _CHECKS[prop]
    uses_t = prefilter is _segment_filter
    skipped = {"domain": 0} if uses_t else {"domain": 0, "nondifferentiable": 0, "curvature-failed": 0}
    done = 0
    for X, Y, T in _batches(rng, lo, hi, trials, open_t=prop == "semistrict-quasiconvex"):
        suspicious, flagged = prefilter(e, X, Y, T, prop, skipped)
        for k in np.flatnonzero(suspicious):
            if flagged is not None and flagged[k] and _slope(e, X[k], Y[k] - X[k]) is None:
                skipped["nondifferentiable"] += 1
                continue
            try:
                w = check(e, X[k], Y[k], T[k]) if uses_t else check(e, X[k], Y[k])
            except _CurvatureFailed:
                skipped["curvature-failed"] += 1
                continue
            if w is not None:
                return ProbeResult(prop, done + int(k) + 1, "counterexample", w, skipped)
        done += len(X)
    return ProbeResult(prop, done, "none-found", None, skipped)


def probe_quasiconvex(e: Expr, box, trials: int = 10_000, seed: int = 0) -> ProbeResult:
    """Look for (x, y, t) with f((1-t)x + ty) > max(f(x), f(y))."""
    return _probe("quasiconvex-on", e, box, trials, seed)


def probe_pseudoconvex(e: Expr, box, trials: int = 10_000, seed: int = 0) -> ProbeResult:
    """Look for f(y) < f(x) with grad f(x)(y - x) >= 0."""
    return _probe("pseudoconvex", e, box, trials, seed)


def probe_2pseudoconvex(e: Expr, box, trials: int = 10_000, seed: int = 0) -> ProbeResult:
    """Look for f(y) < f(x) where the slope toward y is positive, or zero with f''(x, y - x) >= 0."""
    return _probe("two-pseudoconvex", e, box, trials, seed)


def probe_semistrict_quasiconvex(e: Expr, box, trials: int = 10_000, seed: int = 0) -> ProbeResult:
    """Look for f(y) < f(x) with some point of the open segment not below f(x)."""
    return _probe("semistrict-quasiconvex", e, box, trials, seed)

_FUNCTION_PROBES = {
    "quasiconvex-on": probe_quasiconvex,
    "pseudoconvex": probe_pseudoconvex,
    "two-pseudoconvex": probe_2pseudoconvex,
    "semistrict-quasiconvex": probe_semistrict_quasiconvex,
}


def probe_function(prop: str, e: Expr, box, trials: int = 10_000, seed: int = 0, target: str = "") -> ProbeResult:
    """Dispatch to the probe for ``prop`` (one of the single-function properties)."""
    try:
        probe = _FUNCTION_PROBES[prop]
    except KeyError:
        raise ValueError(f"unknown property {prop!r}; choose from {sorted(_FUNCTION_PROBES)}") from None
    result = probe(e, box, trials, seed)
    result.target = target
    return result


# --------------------------------------------------------------------------
# problem-level probe
# --------------------------------------------------------------------------


def check_problem_pair(problem: Problem, x, y, tol_act: float = TOL_ACT) -> dict | None:
    """Check the problem-level second-order pseudoconvexity implication for one pair.

    The antecedent is: x, y feasible and f(y) <= f(x) with at least one
    component lower by more than MARGIN.  Returns the first violated consequent
    as a witness, or None (also when the antecedent fails or derivatives are
    unavailable).
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    try:
        fx, fy = problem.f(x), problem.f(y)
        gx, gy = problem.g(x), problem.g(y)
    except (DomainError, ValueError):
        return None
    if np.any(gx > tol_act) or np.any(gy > tol_act):
        return None
    if not (np.all(fy <= fx) and np.any(fy < fx - MARGIN)):
        return None
    d = y - x
    base = {"x": x.tolist(), "y": y.tolist(), "f_x": fx.tolist(), "f_y": fy.tolist()}
    for i, fi in enumerate(problem.objectives):
        slope = _slope(fi, x, d)
        if slope is None:
            return None
        if slope > MARGIN:
            return base | {"consequent": "objective-slope", "index": f"f{i + 1}", "slope": slope}
        if abs(slope) <= MARGIN:
            sd = second_dir_deriv(fi, x, d)
            if sd.status == "failed":
                raise _CurvatureFailed()
            if sd.value >= -MARGIN:
                return base | {"consequent": "objective-curvature", "index": f"f{i + 1}", "curvature": sd.value}
    for j, gj in enumerate(problem.constraints):
        if abs(gx[j]) > tol_act:
            continue
        slope = _slope(gj, x, d)
        if slope is None:
            return None
        if slope > MARGIN:
            return base | {"consequent": "constraint-slope", "index": f"g{j + 1}", "slope": slope}
        if abs(slope) <= MARGIN:
            sd = second_dir_deriv(gj, x, d)
            if sd.status == "failed":
                raise _CurvatureFailed()
            if sd.value > MARGIN:
                return base | {"consequent": "constraint-curvature", "index": f"g{j + 1}", "curvature": sd.value}
    return None


def probe_problem_2kt_pseudoconvex(
    problem: Problem,
    trials: int = 10_000,
    seed: int = 0,
    anchors: Sequence[Sequence[float]] = (),
    tol_act: float = TOL_ACT,
    max_attempts: int | None = None,
) -> ProbeResult:
    """Sample feasible dominated pairs (x, y) and test the problem-level implication.

    ``trials`` counts dominated pairs actually checked.  y is drawn from a ball
    around x whose radius shrinks by random powers of two, which keeps the
    dominance rate reasonable in higher dimensions.  ``anchors`` are extra
    base points (e.g. candidate solutions) mixed into the x samples.
    """
    lo, hi = problem.lower, problem.upper
    s = problem.dim
    diag = float(np.linalg.norm(hi - lo))
    rng = np.random.default_rng(seed)
    anchors_arr = np.asarray(anchors, dtype=float).reshape(-1, s)
    max_attempts = max_attempts or 50 * max(trials, 1)
    checked = attempts = 0
    skipped = {"curvature-failed": 0}
    while checked < trials and attempts < max_attempts:
        n = BATCH
        X = _points(rng, lo, hi, n)
        if anchors_arr.size:
            use = rng.random(n) < 0.1
            X[use] = anchors_arr[rng.integers(0, len(anchors_arr), size=int(use.sum()))]
        u = rng.standard_normal((n, s))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = diag * 0.5 ** rng.integers(0, 7, size=n) * rng.random(n) ** (1.0 / s)
        Y = np.clip(X + r[:, None] * u, lo, hi)
        FX, FY = problem.f_batch(X), problem.f_batch(Y)
        GX, GY = problem.g_batch(X), problem.g_batch(Y)
        ok = np.all(np.isfinite(FX), axis=1) & np.all(np.isfinite(FY), axis=1)
        ok &= np.all(GX <= tol_act, axis=1) & np.all(GY <= tol_act, axis=1)
        dominated = ok & np.all(FY <= FX, axis=1) & np.any(FY < FX - MARGIN, axis=1)
        for k in range(n):
            attempts += 1
            if not dominated[k]:
                if attempts >= max_attempts:
                    break
                continue
            checked += 1
            try:
                w = check_problem_pair(problem, X[k], Y[k], tol_act)
            except _CurvatureFailed:
                skipped["curvature-failed"] += 1
                w = None
            if w is not None:
                return ProbeResult(
                    "problem-2kt-pseudoconvex", checked, "counterexample", w, skipped, notes=[f"attempts={attempts}"]
                )
            if checked >= trials or attempts >= max_attempts:
                break
    notes = [f"attempts={attempts}"]
    if checked == 0:
        notes.append("no dominated feasible pairs sampled")
    return ProbeResult("problem-2kt-pseudoconvex", checked, "none-found", None, skipped, notes=notes)


# --------------------------------------------------------------------------


def reverify(result: ProbeResult, subject) -> bool:
    """Re-evaluate a reported counterexample from its witness data alone."""
    if not result.refuted:
        return False
    w = result.witness
    prop = result.property
    if prop == "quasiconvex-on":
        again = check_quasiconvex_triple(subject, w["x"], w["y"], w["t"])
    elif prop == "semistrict-quasiconvex":
        again = check_semistrict_triple(subject, w["x"], w["y"], w["t"])
    elif prop == "pseudoconvex":
        again = check_pseudoconvex_pair(subject, w["x"], w["y"])
    elif prop == "two-pseudoconvex":
        again = check_2pseudoconvex_pair(subject, w["x"], w["y"])
    elif prop == "problem-2kt-pseudoconvex":
        again = check_problem_pair(subject, w["x"], w["y"])
    else:
        raise ValueError(prop)
    if again is None:
        return False
    if "margin" in again:
        return again["margin"] > MARGIN / 2 and again["margin"] == w["margin"]
    return again.get("consequent") == w.get("consequent")
