"""Gradients and second-order directional derivatives of parsed expressions.

First derivatives come from a forward-mode pass that propagates one-sided
directional derivatives, so functions such as ``x*abs(x)`` are handled at their
kinks.  The second-order directional derivative

    f''(x, d) = lim_{t->0+} 2 t^-2 [f(x + t d) - f(x) - t f'(x; d)]

is computed analytically from a second-order Taylor jet when the ray does not
start on a kink, and otherwise by Richardson extrapolation of the quotient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import Const, DomainError, Expr, Node, Unary, Var, evaluate, real_pow, to_text

__all__ = [
    "NonDifferentiableError",
    "SecondDerivative",
    "DerivativeBundle",
    "directional_derivative",
    "gradient",
    "taylor2",
    "second_dir_deriv",
    "derivative_bundle",
    "directional_derivative_batch",
    "DIVERGENCE_THRESHOLD",
    "CONVERGENCE_TOL",
]

DIVERGENCE_THRESHOLD = 1e12
CONVERGENCE_TOL = 1e-7


class NonDifferentiableError(ArithmeticError):
    """The expression has no (finite, two-sided) derivative at the requested point."""

    def __init__(self, message: str, node: Node):
        super().__init__(f"{message}: {to_text(node)}")
        self.node = node


class _NotSmooth(Exception):
    """Internal signal: the ray starts on a kink, so the Taylor jet does not apply."""

    def __init__(self, node: Node):
        self.node = node


# --------------------------------------------------------------------------
# first order, one-sided
# --------------------------------------------------------------------------


def _fwd(node: Node, x: Sequence[float], d: Sequence[float], kinks: list) -> tuple[float, float]:
    if isinstance(node, Const):
        return node.value, 0.0
    if isinstance(node, Var):
        return float(x[node.index]), float(d[node.index])
    if isinstance(node, Unary):
        a, da = _fwd(node.arg, x, d, kinks)
        op = node.op
        if op == "neg":
            return -a, -da
        if op == "abs":
            if a > 0.0:
                return a, da
            if a < 0.0:
                return -a, -da
            kinks.append(node)
            return 0.0, abs(da)
        if op == "sqrt":
            if a < 0.0:
                raise DomainError("sqrt of a negative number", node)
            if a == 0.0:
                raise NonDifferentiableError("sqrt at zero", node)
            r = math.sqrt(a)
            return r, da / (2.0 * r)
        if op == "exp":
            v = math.exp(a)
            return v, v * da
        if op == "log":
            if a <= 0.0:
                raise DomainError("log of a non-positive number", node)
            return math.log(a), da / a
        if op == "sin":
            return math.sin(a), math.cos(a) * da
        if op == "cos":
            return math.cos(a), -math.sin(a) * da
        raise ValueError(op)

    a, da = _fwd(node.left, x, d, kinks)
    b, db = _fwd(node.right, x, d, kinks)
    op = node.op
    if op == "add":
        return a + b, da + db
    if op == "sub":
        return a - b, da - db
    if op == "mul":
        return a * b, da * b + a * db
    if op == "div":
        if b == 0.0:
            raise DomainError("division by zero", node)
        q = a / b
        return q, (da - q * db) / b
    if op in ("min2", "max2"):
        pick = min if op == "min2" else max
        if a != b:
            return (a, da) if pick(a, b) == a else (b, db)
        kinks.append(node)
        return a, pick(da, db)
    # pow
    value = real_pow(a, b, node)
    if db == 0.0:
        return value, _power_slope(a, b, da, node)
    if a <= 0.0:
        raise NonDifferentiableError("variable exponent on a non-positive base", node)
    return value, value * (db * math.log(a) + b * da / a)


def _power_slope(a: float, p: float, da: float, node: Node) -> float:
    if p == math.floor(p):
        n = int(p)
        if n == 0:
            return 0.0
        if n == 1:
            return da
        return n * a ** (n - 1) * da
    if a > 0.0:
        return p * a ** (p - 1.0) * da
    # a == 0 here (negative bases already rejected by real_pow)
    if p > 1.0 and da >= 0.0:
        return 0.0
    raise NonDifferentiableError("fractional power at zero", node)


def directional_derivative(e: Expr, x: Sequence[float], d: Sequence[float]) -> tuple[float, float]:
    """Return ``(e(x), e'(x; d))`` from a single forward pass seeded with ``d``."""
    value, slope = _fwd(e.root, x, d, [])
    if not (math.isfinite(value) and math.isfinite(slope)):
        raise DomainError("non-finite value or slope", e.root)
    return value, slope


def gradient(e: Expr, x: Sequence[float]) -> np.ndarray:
    """Gradient of ``e`` at ``x`` from forward passes along the coordinate axes.

    A kink that makes the one-sided derivatives along +e_k and -e_k disagree
    raises :class:`NonDifferentiableError` naming the kink node.
    """
    s = e.arity
    grad = np.empty(s)
    for k in range(s):
        basis = np.zeros(s)
        basis[k] = 1.0
        kinks: list = []
        _, up = _fwd(e.root, x, basis, kinks)
        if kinks:
            _, down = _fwd(e.root, x, -basis, [])
            if abs(up + down) > 1e-12 * (1.0 + abs(up) + abs(down)):
                raise NonDifferentiableError("one-sided derivatives disagree", kinks[0])
        grad[k] = up
    if not np.all(np.isfinite(grad)):
        raise DomainError("non-finite gradient", e.root)
    return grad


# --------------------------------------------------------------------------
# second-order Taylor jets along a ray
# --------------------------------------------------------------------------

Jet = tuple[float, float, float]


def _compose(phi0: float, phi1: float, phi2: float, u: Jet) -> Jet:
    return phi0, phi1 * u[1], phi1 * u[2] + 0.5 * phi2 * u[1] * u[1]


def _mul(a: Jet, b: Jet) -> Jet:
    return a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[0] * b[2] + a[1] * b[1] + a[2] * b[0]


def _jet(node: Node, x: Sequence[float], d: Sequence[float]) -> Jet:
    if isinstance(node, Const):
        return node.value, 0.0, 0.0
    if isinstance(node, Var):
        return float(x[node.index]), float(d[node.index]), 0.0
    if isinstance(node, Unary):
        u = _jet(node.arg, x, d)
        a = u[0]
        op = node.op
        if op == "neg":
            return -u[0], -u[1], -u[2]
        if op == "abs":
            if a == 0.0:
                raise _NotSmooth(node)
            s = 1.0 if a > 0.0 else -1.0
            return s * u[0], s * u[1], s * u[2]
        if op == "sqrt":
            if a < 0.0:
                raise DomainError("sqrt of a negative number", node)
            if a == 0.0:
                raise _NotSmooth(node)
            r = math.sqrt(a)
            return _compose(r, 0.5 / r, -0.25 / (a * r), u)
        if op == "exp":
            v = math.exp(a)
            return _compose(v, v, v, u)
        if op == "log":
            if a <= 0.0:
                raise DomainError("log of a non-positive number", node)
            return _compose(math.log(a), 1.0 / a, -1.0 / (a * a), u)
        if op == "sin":
            return _compose(math.sin(a), math.cos(a), -math.sin(a), u)
        if op == "cos":
            return _compose(math.cos(a), -math.sin(a), -math.cos(a), u)
        raise ValueError(op)

    a = _jet(node.left, x, d)
    b = _jet(node.right, x, d)
    op = node.op
    if op == "add":
        return a[0] + b[0], a[1] + b[1], a[2] + b[2]
    if op == "sub":
        return a[0] - b[0], a[1] - b[1], a[2] - b[2]
    if op == "mul":
        return _mul(a, b)
    if op == "div":
        if b[0] == 0.0:
            raise DomainError("division by zero", node)
        q0 = a[0] / b[0]
        q1 = (a[1] - q0 * b[1]) / b[0]
        q2 = (a[2] - q0 * b[2] - q1 * b[1]) / b[0]
        return q0, q1, q2
    if op in ("min2", "max2"):
        if a[0] == b[0]:
            raise _NotSmooth(node)
        take_a = (a[0] < b[0]) == (op == "min2")
        return a if take_a else b
    # pow
    base, p = a[0], b[0]
    value = real_pow(base, p, node)
    if b[1] == 0.0 and b[2] == 0.0:
        if p == math.floor(p):
            n = int(p)
            if n == 0:
                return value, 0.0, 0.0
            if n == 1:
                return a
            phi1 = n * base ** (n - 1)
            phi2 = n * (n - 1) * base ** (n - 2) if (n >= 2 or base != 0.0) else 0.0
            return _compose(value, phi1, phi2, a)
        if base == 0.0:
            raise _NotSmooth(node)
        return _compose(value, p * base ** (p - 1.0), p * (p - 1.0) * base ** (p - 2.0), a)
    if base <= 0.0:
        if base == 0.0:
            raise _NotSmooth(node)
        raise DomainError("variable exponent on a negative base", node)
    la = _compose(math.log(base), 1.0 / base, -1.0 / (base * base), a)
    m = _mul(la, b)
    ev = math.exp(m[0])
    return _compose(ev, ev, ev, m)


def taylor2(e: Expr, x: Sequence[float], d: Sequence[float]) -> Jet | None:
    """Coefficients ``(c0, c1, c2)`` of ``e(x + t d) = c0 + c1 t + c2 t^2 + o(t^2)``.

    Returns None when the ray starts on a kink (abs/min/max argument tie, or a
    root/fractional power at zero).
    """
    try:
        return _jet(e.root, x, d)
    except _NotSmooth:
        return None


# --------------------------------------------------------------------------
# second-order directional derivative
# --------------------------------------------------------------------------


@dataclass
class SecondDerivative:
    """An extended-real value of f''(x, d) with how it was obtained.

    ``status`` is one of ``exact`` (Taylor jet), ``estimated`` (extrapolated
    limit; ``confidence`` holds the final spread and contraction ratio),
    ``nonfinite`` (value is +inf or -inf) or ``failed`` (value is NaN).
    """

    value: float
    status: str
    confidence: dict = field(default_factory=dict)
    table: list = field(default_factory=list)

    @property
    def finite(self) -> bool:
        return self.status in ("exact", "estimated")

    def to_dict(self) -> dict:
        out = {"value": self.value, "status": self.status}
        if self.confidence:
            out["confidence"] = self.confidence
        return out


def _richardson(qs: list[float], ratio: float, max_order: int) -> list[list[float]]:
    rows: list[list[float]] = []
    for k, q in enumerate(qs):
        row = [q]
        for j in range(1, min(k, max_order) + 1):
            w = ratio ** (-j)
            row.append((w * row[j - 1] - rows[k - 1][j - 1]) / (w - 1.0))
        rows.append(row)
    return rows


def _limit_estimate(
    e: Expr,
    x: np.ndarray,
    d: np.ndarray,
    t0: float,
    ratio: float,
    steps: int,
    max_order: int,
) -> SecondDerivative:
    f0, slope = directional_derivative(e, x, d)
    qs: list[float] = []
    table = []
    estimates: list[float] = []
    for k in range(steps + 1):
        t = t0 * ratio**k
        ft = evaluate(e, x + t * d)
        q = 2.0 * (ft - f0 - t * slope) / (t * t)
        qs.append(q)
        rows = _richardson(qs, ratio, max_order)
        est = rows[-1][-1]
        estimates.append(est)
        table.append({"t": t, "q": q, "extrapolated": est})
        if k >= 2:
            last = estimates[-3:]
            spread = max(last) - min(last)
            if spread <= CONVERGENCE_TOL * max(1.0, abs(est)):
                prev = abs(estimates[-2] - estimates[-3])
                contraction = abs(estimates[-1] - estimates[-2]) / prev if prev > 0 else 0.0
                return SecondDerivative(
                    est, "estimated", {"spread": spread, "ratio": contraction, "steps": k + 1}, table
                )
    if _diverges(qs):
        return SecondDerivative(math.copysign(math.inf, qs[-1]), "nonfinite", {"steps": len(qs)}, table)
    return SecondDerivative(math.nan, "failed", {"steps": len(qs)}, table)


def _diverges(qs: list[float], tail: int = 8) -> bool:
    q = np.asarray(qs[-tail:])
    if not np.all(np.isfinite(q)) or np.any(q == 0.0):
        return abs(qs[-1]) > DIVERGENCE_THRESHOLD
    same_sign = np.all(np.sign(q) == np.sign(q[-1]))
    mags = np.abs(q)
    growth = mags[1:] / mags[:-1]
    if same_sign and abs(qs[-1]) > DIVERGENCE_THRESHOLD and np.all(growth >= 1.0):
        return True
    # steady power-law blow-up t^-a shows up as a constant growth factor per step
    return bool(same_sign and np.all(growth > 1.02) and np.ptp(growth) < 0.05 * growth.mean())


def second_dir_deriv(
    e: Expr,
    x: Sequence[float],
    d: Sequence[float],
    *,
    t0: float = 1e-2,
    ratio: float = 0.5,
    steps: int = 20,
    max_order: int = 4,
    force_limit: bool = False,
) -> SecondDerivative:
    """Second-order directional derivative ``e''(x, d)`` as an extended real.

    The Taylor jet is used whenever the ray ``x + t d`` does not start on a
    kink; otherwise (or with ``force_limit``) the difference quotient is
    sampled at ``t = t0 * ratio**k`` and Richardson-extrapolated.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    if not force_limit:
        jet = taylor2(e, x, d)
        if jet is not None:
            value = 2.0 * jet[2]
            if not math.isfinite(value):
                raise DomainError("non-finite curvature", e.root)
            return SecondDerivative(value, "exact")
    gradient(e, x)  # precondition: e is differentiable at x
    if not np.any(d):
        return SecondDerivative(0.0, "exact")
    return _limit_estimate(e, x, d, t0, ratio, steps, max_order)


# --------------------------------------------------------------------------


@dataclass
class DerivativeBundle:
    """First- and second-order data of a problem's functions at ``(x, d)``.

    Gradient rows of functions that are not differentiable at ``x`` are NaN;
    second derivatives are only present for the requested indices.
    """

    x: np.ndarray
    d: np.ndarray
    grads_f: np.ndarray
    grads_g: np.ndarray
    d2f: dict[int, SecondDerivative]
    d2g: dict[int, SecondDerivative]


def _safe_gradient(e: Expr, x: np.ndarray) -> np.ndarray:
    try:
        return gradient(e, x)
    except (NonDifferentiableError, DomainError):
        return np.full(e.arity, np.nan)


def derivative_bundle(
    problem,
    x: Sequence[float],
    d: Sequence[float],
    f_indices: Sequence[int] | None = None,
    g_indices: Sequence[int] | None = None,
) -> DerivativeBundle:
    """Collect gradients of all functions and f'', g'' for the given indices."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    n, m = len(problem.objectives), len(problem.constraints)
    f_indices = range(n) if f_indices is None else f_indices
    g_indices = range(m) if g_indices is None else g_indices
    grads_f = np.array([_safe_gradient(f, x) for f in problem.objectives]).reshape(n, len(x))
    grads_g = np.array([_safe_gradient(g, x) for g in problem.constraints]).reshape(m, len(x))
    d2f = {i: second_dir_deriv(problem.objectives[i], x, d) for i in f_indices}
    d2g = {j: second_dir_deriv(problem.constraints[j], x, d) for j in g_indices}
    return DerivativeBundle(x, d, grads_f, grads_g, d2f, d2g)


# --------------------------------------------------------------------------
# vectorised first-order pass (used by sampling probes)
# --------------------------------------------------------------------------


def _fwd_batch(node: Node, X: np.ndarray, D: np.ndarray, flag: np.ndarray):
    if isinstance(node, Const):
        return np.full(X.shape[0], node.value), np.zeros(X.shape[0])
    if isinstance(node, Var):
        return X[:, node.index].copy(), D[:, node.index].copy()
    if isinstance(node, Unary):
        a, da = _fwd_batch(node.arg, X, D, flag)
        op = node.op
        if op == "neg":
            return -a, -da
        if op == "abs":
            flag |= a == 0.0
            s = np.sign(a)
            return np.abs(a), s * da
        if op == "sqrt":
            flag |= a <= 0.0
            r = np.sqrt(np.abs(a))
            return r, da / (2.0 * np.where(r > 0, r, 1.0))
        if op == "exp":
            v = np.exp(a)
            return v, v * da
        if op == "log":
            flag |= a <= 0.0
            safe = np.where(a > 0, a, 1.0)
            return np.log(safe), da / safe
        if op == "sin":
            return np.sin(a), np.cos(a) * da
        return np.cos(a), -np.sin(a) * da
    a, da = _fwd_batch(node.left, X, D, flag)
    b, db = _fwd_batch(node.right, X, D, flag)
    op = node.op
    if op == "add":
        return a + b, da + db
    if op == "sub":
        return a - b, da - db
    if op == "mul":
        return a * b, da * b + a * db
    if op == "div":
        flag |= b == 0.0
        safe = np.where(b != 0.0, b, 1.0)
        q = a / safe
        return q, (da - q * db) / safe
    if op in ("min2", "max2"):
        flag |= a == b
        take_a = (a < b) if op == "min2" else (a > b)
        return np.where(take_a, a, b), np.where(take_a, da, db)
    # pow: anything but a positive base or a constant integer exponent goes to the scalar path
    integral = (db == 0.0) & (b == np.floor(b))
    flag |= ~((a > 0.0) | (integral & (a != 0.0)))
    safe_a = np.where(flag, 1.0, a)
    safe_b = np.where(flag, 1.0, b)
    v = np.power(safe_a, safe_b)
    slope_const = safe_b * np.power(safe_a, safe_b - 1.0) * da
    log_a = np.log(np.abs(safe_a))
    slope_var = v * (db * log_a + safe_b * da / safe_a)
    return v, np.where(db == 0.0, slope_const, slope_var)


def directional_derivative_batch(e: Expr, X: np.ndarray, D: np.ndarray):
    """Values and one-sided slopes along the rows of ``D`` at the rows of ``X``.

    Returns ``(values, slopes, flagged)``; flagged rows (kinks, domain edges,
    non-finite results) must be recomputed with :func:`directional_derivative`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    flag = np.zeros(X.shape[0], dtype=bool)
    with np.errstate(all="ignore"):
        v, dv = _fwd_batch(e.root, X, D, flag)
    flag |= ~(np.isfinite(v) & np.isfinite(dv))
    return v, dv, flag
