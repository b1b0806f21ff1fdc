"""Small dense linear solves in exact rational or float arithmetic."""

from __future__ import annotations

from fractions import Fraction
from typing import List

import numpy as np


class SingularSystemError(ArithmeticError):
    pass


def solve_exact(a: List[List[Fraction]], b: List[Fraction]) -> List[Fraction]:
    """Gaussian elimination over Fractions; raises on singular systems."""
    n = len(a)
    aug = [list(map(Fraction, row)) + [Fraction(b[i])] for i, row in enumerate(a)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise SingularSystemError(f"singular at column {col}")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        prow = aug[col]
        inv = Fraction(1) / prow[col]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col] * inv
                aug[r] = [v - factor * p for v, p in zip(aug[r], prow)]
    return [aug[i][n] / aug[i][i] for i in range(n)]


def solve_dense(a, b, mode: str = "rational"):
    """Solve ``a x = b`` in the requested arithmetic mode."""
    if mode == "rational":
        return solve_exact(a, b)
    arr = np.array([[float(v) for v in row] for row in a], dtype=float)
    rhs = np.array([float(v) for v in b], dtype=float)
    try:
        return list(np.linalg.solve(arr, rhs))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from None
