"""Random polynomial expressions shared by several test modules."""

from __future__ import annotations

import numpy as np


def random_polynomial(rng: np.random.Generator, s: int, degree: int = 4, terms: int = 5) -> str:
    """A random polynomial in x1..xs of total degree <= ``degree`` as expression text."""
    parts = []
    for _ in range(terms):
        coef = round(float(rng.uniform(-3, 3)), 3)
        total = int(rng.integers(0, degree + 1))
        powers = np.zeros(s, dtype=int)
        for _ in range(total):
            powers[rng.integers(0, s)] += 1
        factors = [f"x{k + 1}^{p}" if p > 1 else f"x{k + 1}" for k, p in enumerate(powers) if p > 0]
        parts.append("*".join([f"({coef})"] + factors))
    return " + ".join(parts)
