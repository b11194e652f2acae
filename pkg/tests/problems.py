"""Random smooth test problems whose candidate point is first-order stationary by construction."""

from __future__ import annotations

import numpy as np

from mokkt.problem import Problem


def _vec(v) -> str:
    return "(" + " + ".join(f"({float(c)!r})*y{k + 1}" for k, c in enumerate(v)) + ")"


def _quad(rng: np.random.Generator, s: int, scale: float, psd: bool) -> str:
    B = rng.normal(size=(s, s)) * scale
    Q = B @ B.T if psd else (B + B.T) / 2
    terms = [f"({Q[i, j]:.6g})*y{i + 1}*y{j + 1}" for i in range(s) for j in range(s)]
    return " + ".join(terms)


def stationary_problem(rng: np.random.Generator, s: int | None = None, degenerate: bool = False) -> Problem:
    """A problem with n objectives, m constraints all active at x0 and (lambda, mu) >= 0 balancing the gradients.

    Written in shifted variables y = x - x0, which the expressions expand inline.
    With ``degenerate`` the constraints have zero gradient and negative definite
    curvature at x0, so the first-order MF condition fails there while the
    second-order one holds.
    """
    s = s or int(rng.integers(2, 4))
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, s + 1))
    x0 = np.round(rng.uniform(-1, 1, s) * 4) / 4
    grads_g = np.zeros((m, s)) if degenerate else rng.normal(size=(m, s)).round(3)
    grads_f = rng.normal(size=(n, s)).round(3)
    lam = rng.uniform(0.2, 1.0, n)
    mu = rng.uniform(0.0, 1.0, m) * (rng.random(m) < 0.7)
    # make the last objective restore stationarity
    rest = lam[:-1] @ grads_f[:-1] + mu @ grads_g
    grads_f[-1] = -rest / lam[-1]
    objectives = [f"{_vec(a)} + {_quad(rng, s, 0.7, rng.random() < 0.6)}" for a in grads_f]
    if degenerate:
        constraints = [f"-({_quad(rng, s, 0.5, True)}) - 0.1*({' + '.join(f'y{k + 1}^2' for k in range(s))})" for _ in grads_g]
    else:
        constraints = [f"{_vec(a)} + {_quad(rng, s, 0.5, rng.random() < 0.5)}" for a in grads_g]
    names = [f"x{k + 1}" for k in range(s)]

    def shift(text: str) -> str:
        for k in range(s):
            text = text.replace(f"y{k + 1}", f"(x{k + 1} - ({float(x0[k])!r}))")
        return text

    return Problem.build(
        names,
        [shift(t) for t in objectives],
        [shift(t) for t in constraints],
        [[c - 2.0, c + 2.0] for c in x0],
        x0.tolist(),
        name="random-stationary",
    )
