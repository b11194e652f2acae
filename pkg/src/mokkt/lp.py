"""Dense two-phase simplex with Bland's rule for small linear programs.

Problems have the form::

    maximize    c @ x
    subject to  A_eq @ x == b_eq
                A_ge @ x >= b_ge
                lo <= x <= hi          (entries of lo/hi may be infinite)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearProgram",
    "LPResult",
    "LPSizeError",
    "LPNumericalError",
    "solve",
    "MAX_VARIABLES",
    "MAX_ROWS",
]

MAX_VARIABLES = 64
MAX_ROWS = 256
PIVOT_TOL = 1e-10
RESIDUAL_TOL = 1e-9
MAX_PIVOTS = 50_000


class LPSizeError(ValueError):
    pass


class LPNumericalError(ArithmeticError):
    pass


def _as_matrix(a, k: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, k))
    return np.asarray(a, dtype=float).reshape(-1, k)


@dataclass
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ge: np.ndarray | None = None
    b_ge: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        k = self.c.size
        self.A_eq = _as_matrix(self.A_eq, k)
        self.A_ge = _as_matrix(self.A_ge, k)
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        self.b_ge = np.zeros(0) if self.b_ge is None else np.asarray(self.b_ge, dtype=float).ravel()
        self.lo = np.zeros(k) if self.lo is None else np.asarray(self.lo, dtype=float).ravel()
        self.hi = np.full(k, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).ravel()
        if self.b_eq.size != self.A_eq.shape[0] or self.b_ge.size != self.A_ge.shape[0]:
            raise ValueError("right-hand side length does not match the constraint rows")
        if self.lo.size != k or self.hi.size != k:
            raise ValueError("bounds must have one entry per variable")
        if np.any(self.lo > self.hi):
            raise ValueError("every lower bound must not exceed its upper bound")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A_eq.shape[0] + self.A_ge.shape[0]

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation of ``x`` (0 when feasible)."""
        parts = [0.0]
        if self.A_eq.size:
            parts.append(np.max(np.abs(self.A_eq @ x - self.b_eq)))
        if self.A_ge.size:
            parts.append(np.max(self.b_ge - self.A_ge @ x))
        parts.append(np.max(self.lo - x))
        parts.append(np.max(x - self.hi))
        return float(max(parts))


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None = None
    value: float | None = None
    pivots: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Rows 0..m-1 are constraints ``T[i, :-1] @ z = T[i, -1]``; the last row holds
    reduced costs (negative entries improve a maximization) and minus the objective."""

    def __init__(self, T: np.ndarray, basis: list[int]):
        self.T = T
        self.basis = basis
        self.pivots = 0

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.pivots += 1
        if self.pivots > MAX_PIVOTS:
            raise LPNumericalError("pivot limit exceeded")

    def run(self, allowed: int) -> str:
        """Bland's rule over columns < allowed; returns 'optimal' or 'unbounded'."""
        T = self.T
        while True:
            costs = T[-1, :allowed]
            entering = np.flatnonzero(costs < -PIVOT_TOL)
            if entering.size == 0:
                return "optimal"
            j = int(entering[0])
            col = T[:-1, j]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)


def _standard_form(lp: LinearProgram):
    """Substitute x = shift + M @ y with y >= 0; bounded variables add a <= row."""
    k = lp.n_vars
    cols = []
    shift = np.zeros(k)
    upper_rows = []
    for i in range(k):
        lo, hi = lp.lo[i], lp.hi[i]
        e = np.zeros(k)
        e[i] = 1.0
        if np.isfinite(lo):
            shift[i] = lo
            cols.append(e)
            if np.isfinite(hi):
                upper_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[i] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    M = np.array(cols).T.reshape(k, len(cols))
    return shift, M, upper_rows


def solve(lp: LinearProgram) -> LPResult:
    """Solve ``lp`` exactly up to floating point; see the module docstring for the form."""
    if lp.n_vars > MAX_VARIABLES or lp.n_rows > MAX_ROWS:
        raise LPSizeError(
            f"LP has {lp.n_vars} variables and {lp.n_rows} rows; limits are {MAX_VARIABLES} and {MAX_ROWS}"
        )
    shift, M, upper_rows = _standard_form(lp)
    ny = M.shape[1]

    # rows as (coefficients over y, sense, rhs); sense +1 for >=, -1 for <=, 0 for ==
    rows = []
    for a, b in zip(lp.A_eq, lp.b_eq):
        rows.append((a @ M, 0, b - a @ shift))
    for a, b in zip(lp.A_ge, lp.b_ge):
        rows.append((a @ M, 1, b - a @ shift))
    for col, width in upper_rows:
        a = np.zeros(ny)
        a[col] = 1.0
        rows.append((a, -1, width))

    m = len(rows)
    n_slack = sum(1 for _, sense, _ in rows if sense != 0)
    n_struct = ny + n_slack
    T = np.zeros((m + 1, n_struct + m + 1))
    slack = ny
    for i, (a, sense, b) in enumerate(rows):
        T[i, :ny] = a
        if sense == 1:
            T[i, slack] = -1.0
            slack += 1
        elif sense == -1:
            T[i, slack] = 1.0
            slack += 1
        T[i, -1] = b
        if b < 0:
            T[i, :-1] *= -1.0
            T[i, -1] *= -1.0
        T[i, n_struct + i] = 1.0
    c_y = lp.c @ M

    tab = _Tableau(T, [n_struct + i for i in range(m)])
    # phase I: maximize -sum(artificials)
    T[-1, :] = 0.0
    T[-1, n_struct : n_struct + m] = 1.0
    for i in range(m):
        T[-1] -= T[i]
    tab.run(n_struct + m)
    infeasibility = -T[-1, -1]
    rhs_scale = max(1.0, max((abs(b) for _, _, b in rows), default=0.0))
    if infeasibility > RESIDUAL_TOL * rhs_scale:
        return LPResult("infeasible", pivots=tab.pivots, info={"phase1": float(infeasibility)})

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if tab.basis[i] >= n_struct:
            candidates = np.flatnonzero(np.abs(T[i, :n_struct]) > PIVOT_TOL)
            if candidates.size:
                tab.pivot(i, int(candidates[0]))
                keep.append(i)
        else:
            keep.append(i)
    T2 = np.vstack([T[keep][:, list(range(n_struct)) + [-1]], np.zeros(n_struct + 1)])
    phase1_pivots = tab.pivots
    tab = _Tableau(T2, [tab.basis[i] for i in keep])
    tab.pivots = phase1_pivots
    T2[-1, :n_struct] = -np.concatenate([c_y, np.zeros(n_slack)])
    for i, j in enumerate(tab.basis):
        if T2[-1, j] != 0.0:
            T2[-1] -= T2[-1, j] * T2[i]
    status = tab.run(n_struct)
    if status == "unbounded":
        return LPResult("unbounded", pivots=tab.pivots)

    z = np.zeros(n_struct)
    for i, j in enumerate(tab.basis):
        z[j] = T2[i, -1]
    x = shift + M @ z[:ny]
    scale = 1.0 + float(np.max(np.abs(x), initial=0.0)) * max(
        1.0, float(np.max(np.abs(np.vstack([lp.A_eq, lp.A_ge])), initial=0.0))
    )
    residual = lp.violation(x)
    if residual > RESIDUAL_TOL * scale:
        raise LPNumericalError(f"basic solution violates constraints by {residual:.3g}")
    return LPResult("optimal", x, float(lp.c @ x), tab.pivots, {"residual": residual})
