"""Dense two-phase simplex for maximization over nonnegative variables.

Problems carry equality rows and >= rows; variables are implicitly >= 0.
Two arithmetic modes share one implementation: exact Fractions (tolerances
zero, Bland's rule guarantees termination) and floats with a pivot threshold
and a feasibility threshold.

Every outcome ships a certificate that :func:`check_certificate` re-verifies
by plain arithmetic, with no pivoting:

  optimal    - primal vector and dual vector (duals of >= rows are <= 0,
               A^T y >= c componentwise, objectives equal),
  unbounded  - a feasible point plus an improving ray that preserves
               feasibility,
  infeasible - a Farkas vector (free on equality rows, >= 0 on >= rows)
               with y^T A <= 0 and y^T b > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

try:  # exact-mode pivoting runs on gmpy2 rationals when available
    from gmpy2 import mpq as _mpq
except ImportError:  # pragma: no cover - gmpy2 is an optional accelerator
    _mpq = None

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


def _as_fraction(v):
    return v if isinstance(v, Fraction) else Fraction(int(v.numerator), int(v.denominator))


@dataclass
class LpProblem:
    """max objective . x  s.t.  eq rows hold with equality, ge rows with >=, x >= 0."""

    objective: Sequence
    eq_rows: List[Tuple[Sequence, object]] = field(default_factory=list)
    ge_rows: List[Tuple[Sequence, object]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.objective)

    def validate(self) -> None:
        for label, rows in (("eq", self.eq_rows), ("ge", self.ge_rows)):
            for i, (coeffs, _rhs) in enumerate(rows):
                if len(coeffs) != self.n:
                    raise ValueError(
                        f"{label} row {i} has {len(coeffs)} coefficients, expected {self.n}"
                    )


@dataclass
class LpSolution:
    status: str
    x: Optional[List] = None
    value: Optional[object] = None
    duals_eq: Optional[List] = None
    duals_ge: Optional[List] = None
    certificate: dict = field(default_factory=dict)
    iterations: int = 0


class PivotLimitError(RuntimeError):
    pass


def _dot(u, v):
    total = None
    for a, b in zip(u, v):
        term = a * b
        total = term if total is None else total + term
    return total if total is not None else 0


def solve_lp(
    prob: LpProblem,
    exact: bool = True,
    pivot_tol: float = 1e-12,
    feas_tol: float = 1e-9,
    iteration_limit: int = 200000,
) -> LpSolution:
    """Two-phase simplex with Bland's lowest-index rule in both phases."""
    prob.validate()
    if exact:
        num = _mpq if _mpq is not None else Fraction
    else:
        num = float
    zero = num(0)
    ptol = zero if exact else pivot_tol
    ftol = zero if exact else feas_tol

    n = prob.n
    G = len(prob.ge_rows)
    E = len(prob.eq_rows)
    m = E + G
    c = [num(v) for v in prob.objective]

    # Standard form: columns = [x (n) | surplus (G) | artificial (m)], rhs last.
    ncols = n + G + m
    rows: List[List] = []
    sigma: List[int] = []
    for i, (coeffs, rhs) in enumerate(list(prob.eq_rows) + list(prob.ge_rows)):
        row = [num(v) for v in coeffs] + [zero] * (G + m) + [num(rhs)]
        if i >= E:
            row[n + (i - E)] = -num(1)
        flip = -1 if row[-1] < zero else 1
        if flip < 0:
            row = [-v for v in row]
        row[n + G + i] = num(1)
        sigma.append(flip)
        rows.append(row)
    basis = [n + G + i for i in range(m)]

    # Reduced objective rows; last entry holds minus the current objective value.
    obj2 = [-v for v in c] + [zero] * (G + m) + [zero]
    obj1 = [zero] * (ncols + 1)
    for row in rows:
        for j in range(ncols + 1):
            obj1[j] -= row[j]
    for i in range(m):
        obj1[n + G + i] = zero

    iterations = 0

    def pivot(r: int, col: int) -> None:
        prow = rows[r]
        inv = num(1) / prow[col]
        if inv != 1:
            rows[r] = prow = [v * inv for v in prow]
        nonzero = [j for j, v in enumerate(prow) if v != zero]
        for other in rows:
            if other is not prow and other[col] != zero:
                f = other[col]
                for j in nonzero:
                    other[j] -= f * prow[j]
        for objrow in (obj1, obj2):
            if objrow[col] != zero:
                f = objrow[col]
                for j in nonzero:
                    objrow[j] -= f * prow[j]
        basis[r] = col

    def run_phase(objrow: List, allowed_cols: int) -> Optional[int]:
        """Pivot to optimality; returns an entering column on unboundedness."""
        nonlocal iterations
        while True:
            enter = None
            for j in range(allowed_cols):
                if objrow[j] < -ptol:
                    enter = j
                    break
            if enter is None:
                return None
            leave = None
            best = None
            for i, row in enumerate(rows):
                coef = row[enter]
                if coef > ptol:
                    ratio = row[-1] / coef
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                        best = ratio
                        leave = i
            if leave is None:
                return enter
            pivot(leave, enter)
            iterations += 1
            if iterations > iteration_limit:
                raise PivotLimitError(f"simplex exceeded {iteration_limit} pivots")

    out = _as_fraction if (exact and num is not Fraction) else (lambda v: v)

    # Phase 1: minimize the sum of artificials (their columns may re-enter).
    ray_col = run_phase(obj1, ncols)
    assert ray_col is None, "phase-1 objective is bounded below by zero"
    phase1_value = -obj1[-1]
    if phase1_value > ftol:
        cert = [out(sigma[i] * (num(1) - obj1[n + G + i])) for i in range(m)]
        return LpSolution(
            status=INFEASIBLE,
            certificate={"farkas_eq": cert[:E], "farkas_ge": cert[E:]},
            iterations=iterations,
        )

    # Drive artificials out of the basis; rows that cannot pivot are redundant.
    drop: List[int] = []
    for i in range(len(rows)):
        if basis[i] >= n + G:
            col = next((j for j in range(n + G) if abs(rows[i][j]) > ptol), None)
            if col is None:
                drop.append(i)
            else:
                pivot(i, col)
    for i in reversed(drop):
        del rows[i], basis[i]

    # Phase 2 on the real objective; artificial columns are barred from entering.
    ray_col = run_phase(obj2, n + G)

    def current_x() -> List:
        full = [zero] * ncols
        for i, b in enumerate(basis):
            full[b] = rows[i][-1]
        return full

    if ray_col is not None:
        full = current_x()
        ray = [zero] * ncols
        ray[ray_col] = num(1)
        for i, b in enumerate(basis):
            ray[b] = -rows[i][ray_col]
        x = [out(v) for v in full[:n]]
        return LpSolution(
            status=UNBOUNDED,
            x=x,
            certificate={"x": x, "ray": [out(v) for v in ray[:n]]},
            iterations=iterations,
        )

    full = current_x()
    x = [out(v) for v in full[:n]]
    value = out(_dot(c, full[:n])) if x else out(zero)
    # The objective row keeps the invariant obj2 = cost - lambda^T (rows), so the
    # artificial entries encode valid multipliers even for dropped redundant rows.
    duals = [out(sigma[i] * obj2[n + G + i]) for i in range(m)]
    return LpSolution(
        status=OPTIMAL,
        x=x,
        value=value,
        duals_eq=duals[:E],
        duals_ge=duals[E:],
        certificate={"x": x, "duals_eq": duals[:E], "duals_ge": duals[E:]},
        iterations=iterations,
    )


def check_certificate(prob: LpProblem, sol: LpSolution, feas_tol=Fraction(0)) -> bool:
    """Re-verify a solution's certificate by arithmetic only (no pivoting)."""
    prob.validate()
    tol = feas_tol
    n = prob.n

    def feasible(x) -> bool:
        if len(x) != n or any(v < -tol for v in x):
            return False
        for coeffs, rhs in prob.eq_rows:
            if abs(_dot(coeffs, x) - rhs) > tol:
                return False
        for coeffs, rhs in prob.ge_rows:
            if _dot(coeffs, x) < rhs - tol:
                return False
        return True

    if sol.status == OPTIMAL:
        x = sol.certificate.get("x")
        ue = sol.certificate.get("duals_eq")
        ug = sol.certificate.get("duals_ge")
        if x is None or ue is None or ug is None or not feasible(x):
            return False
        if any(v > tol for v in ug):
            return False
        for j in range(n):
            lhs = _dot([row[0][j] for row in prob.eq_rows], ue) + _dot(
                [row[0][j] for row in prob.ge_rows], ug
            )
            if lhs < prob.objective[j] - tol:
                return False
        dual_value = _dot([r for (_c, r) in prob.eq_rows], ue) + _dot(
            [r for (_c, r) in prob.ge_rows], ug
        )
        primal_value = _dot(prob.objective, x)
        if abs(dual_value - primal_value) > tol:
            return False
        return sol.value is None or abs(sol.value - primal_value) <= tol

    if sol.status == UNBOUNDED:
        x = sol.certificate.get("x")
        ray = sol.certificate.get("ray")
        if x is None or ray is None or not feasible(x):
            return False
        if any(v < -tol for v in ray):
            return False
        for coeffs, _rhs in prob.eq_rows:
            if abs(_dot(coeffs, ray)) > tol:
                return False
        for coeffs, _rhs in prob.ge_rows:
            if _dot(coeffs, ray) < -tol:
                return False
        return _dot(prob.objective, ray) > tol

    if sol.status == INFEASIBLE:
        ye = sol.certificate.get("farkas_eq")
        yg = sol.certificate.get("farkas_ge")
        if ye is None or yg is None:
            return False
        if any(v < -tol for v in yg):
            return False
        for j in range(n):
            lhs = _dot([row[0][j] for row in prob.eq_rows], ye) + _dot(
                [row[0][j] for row in prob.ge_rows], yg
            )
            if lhs > tol:
                return False
        gain = _dot([r for (_c, r) in prob.eq_rows], ye) + _dot(
            [r for (_c, r) in prob.ge_rows], yg
        )
        return gain > tol

    return False


def dump_lp(prob: LpProblem, names: Optional[List[str]] = None) -> str:
    """Plain-text equation form for external cross-checks."""
    names = names or [f"x{j}" for j in range(prob.n)]

    def side(coeffs) -> str:
        terms = [f"{coeffs[j]} {names[j]}" for j in range(len(coeffs)) if coeffs[j] != 0]
        return " + ".join(terms) if terms else "0"

    lines = [f"max {side(prob.objective)}", "s.t."]
    for i, (coeffs, rhs) in enumerate(prob.eq_rows):
        lines.append(f"  eq[{i}]: {side(coeffs)} = {rhs}")
    for i, (coeffs, rhs) in enumerate(prob.ge_rows):
        lines.append(f"  ge[{i}]: {side(coeffs)} >= {rhs}")
    lines.append("  all variables >= 0")
    return "\n".join(lines) + "\n"
