"""Executable standing hypotheses and side programs.

Finiteness check (positive parts): the program's supremum of every positive
part must be finite.  Any sustainable-structure pair with a positive reward
or constraint value can carry infinite mass in some feasible variable, and
the finite masses with balance relaxed at the sustainable states form the
largest finite part any variable can have, so the check is (a) no positive
value on a sustainable pair and (b) boundedness of the relaxed positive-part
LPs.

Finiteness check (negative parts) is a sufficient surrogate: every policy's
occupation measure is feasible for the same relaxed program, so boundedness
of the negative-part LPs certifies that no policy accumulates -inf.  A
failure is conservative (the ray need not be realizable by a policy) and is
labeled as such.

The naive balance program drops the base-measure restriction entirely; a
strictly larger value (or unboundedness) is a phantom verdict: the balance
equation admits solutions that are not occupation measures.

The Lagrangian dual evaluates L(lambda) = sup{measure(r - <lambda, c>)} +
<lambda, theta> for lambda <= 0 through exact inner solves, minimized by the
exact dual multiplier (one constraint, rational mode), golden section (one
constraint, float mode), or projected subgradient steps (several
constraints).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import lp
from .extreal import ExtReal, NEG_INF, POS_INF, ZERO, ext_margin, fmt_ext, fmt_scalar
from .model import FiniteMdp, Pair
from .program import STATUS_INFEASIBLE, STATUS_OPTIMAL, assemble_program, solve_constrained
from .reference import BaseMeasure, compute_base_measure, construct_reference_kernel
from .structure import InfiniteStructure, max_sustainable_structure, zero_value_structure

__all__ = [
    "AssumptionPart",
    "AssumptionReport",
    "assumption_report",
    "SlaterPart",
    "NaiveReport",
    "DualReport",
    "DualInnerUnboundedError",
    "check_assumption_b1",
    "check_assumption_b2",
    "check_slater",
    "solve_naive_program",
    "lagrangian_dual",
    "run_diagnostics",
]


@dataclass
class AssumptionPart:
    name: str
    passed: bool
    witness_pair: Optional[Pair] = None
    ray: Optional[Dict[Pair, object]] = None
    note: str = ""

    def as_dict(self) -> dict:
        doc = {"passed": self.passed}
        if self.witness_pair is not None:
            doc["witness_pair"] = [str(self.witness_pair[0]), self.witness_pair[1]]
        if self.ray:
            doc["ray"] = {f"{x}|{a}": fmt_scalar(w) for (x, a), w in sorted(self.ray.items(), key=str)}
        if self.note:
            doc["note"] = self.note
        return doc


@dataclass
class AssumptionReport:
    b1: AssumptionPart
    b2: AssumptionPart

    @property
    def b1_pass(self) -> bool:
        return self.b1.passed

    @property
    def b2_pass(self) -> bool:
        return self.b2.passed

    def as_dict(self) -> dict:
        return {"b1": self.b1.as_dict(), "b2": self.b2.as_dict()}


def assumption_report(
    m: FiniteMdp,
    base: BaseMeasure,
    s_max: InfiniteStructure,
    mode: str = "rational",
    pivot_tol: float = 1e-12,
    feas_tol: float = 1e-9,
) -> AssumptionReport:
    """Run both finiteness checks and bundle the parts."""
    return AssumptionReport(
        b1=check_assumption_b1(m, base, s_max, mode=mode, pivot_tol=pivot_tol, feas_tol=feas_tol),
        b2=check_assumption_b2(m, base, s_max, mode=mode, pivot_tol=pivot_tol, feas_tol=feas_tol),
    )


def _positive_part(h: Dict[Pair, Fraction]) -> Dict[Pair, Fraction]:
    return {pair: v for pair, v in h.items() if v > 0}


def _negative_part(h: Dict[Pair, Fraction]) -> Dict[Pair, Fraction]:
    return {pair: -v for pair, v in h.items() if v < 0}


def _value_functions(m: FiniteMdp) -> List[Tuple[str, Dict[Pair, Fraction]]]:
    return [("reward", m.reward)] + [(c.name, c.values) for c in m.constraints]


def _relaxed_sup(m, base, s_max, coeffs, mode, pivot_tol, feas_tol):
    assembly = assemble_program(
        m,
        base,
        s_max,
        objective=coeffs,
        include_constraints=False,
        require_zero_valued=False,
    )
    sol = lp.solve_lp(
        assembly.problem, exact=(mode == "rational"), pivot_tol=pivot_tol, feas_tol=feas_tol
    )
    return assembly, sol


def check_assumption_b1(
    m: FiniteMdp,
    base: BaseMeasure,
    s_max: InfiniteStructure,
    mode: str = "rational",
    pivot_tol: float = 1e-12,
    feas_tol: float = 1e-9,
) -> AssumptionPart:
    """Finiteness of every positive-part supremum over the feasible variables."""
    for pair in sorted(s_max.pairs, key=str):
        for name, h in _value_functions(m):
            if h[pair] > 0:
                return AssumptionPart(
                    name="b1",
                    passed=False,
                    witness_pair=pair,
                    note=f"sustainable pair carries positive {name} value {fmt_scalar(h[pair])}; "
                    "infinite mass there makes the positive part infinite",
                )
    for name, h in _value_functions(m):
        coeffs = _positive_part(h)
        assembly, sol = _relaxed_sup(m, base, s_max, coeffs, mode, pivot_tol, feas_tol)
        if sol.status == lp.UNBOUNDED:
            ray = {
                pair: w for pair, w in zip(assembly.pairs, sol.certificate["ray"]) if w != 0
            }
            return AssumptionPart(
                name="b1",
                passed=False,
                ray=ray,
                note=f"positive part of {name} is unbounded over the relaxed feasible set",
            )
    return AssumptionPart(name="b1", passed=True)


def check_assumption_b2(
    m: FiniteMdp,
    base: BaseMeasure,
    s_max: InfiniteStructure,
    mode: str = "rational",
    pivot_tol: float = 1e-12,
    feas_tol: float = 1e-9,
) -> AssumptionPart:
    """Sufficient check that no occupation measure has an infinite negative part.

    The relaxed LP feasible set dominates the occupation measures, so
    boundedness here is sound; a failure is conservative and says so.
    """
    for name, h in _value_functions(m):
        coeffs = _negative_part(h)
        assembly, sol = _relaxed_sup(m, base, s_max, coeffs, mode, pivot_tol, feas_tol)
        if sol.status == lp.UNBOUNDED:
            ray = {
                pair: w for pair, w in zip(assembly.pairs, sol.certificate["ray"]) if w != 0
            }
            return AssumptionPart(
                name="b2",
                passed=False,
                ray=ray,
                note=f"negative part of {name} is unbounded over the surrogate set; "
                "conservative: the ray may not be realizable by any policy",
            )
    return AssumptionPart(name="b2", passed=True)


@dataclass
class SlaterPart:
    slack: Optional[ExtReal]
    passed: bool
    status: str = "ok"
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "slack": fmt_ext(self.slack) if self.slack is not None else None,
            "passed": self.passed,
            "status": self.status,
            **({"note": self.note} if self.note else {}),
        }


def check_slater(
    m: FiniteMdp,
    base: BaseMeasure,
    s_zero: InfiniteStructure,
    mode: str = "rational",
    pivot_tol: float = 1e-12,
    feas_tol: float = 1e-9,
) -> SlaterPart:
    """Maximal uniform slack over the feasible set: max t with values >= limits + t.

    Positive slack certifies an interior feasible variable (and by the
    stationary reduction, an interior policy); zero slack means the limits
    are attainable but not strictly; negative slack means the program is
    infeasible.
    """
    if not m.constraints:
        return SlaterPart(slack=POS_INF, passed=True, note="no constraints")
    assembly = assemble_program(m, base, s_zero, include_constraints=True)
    n = len(assembly.pairs)
    zero = Fraction(0)
    obj = [zero] * n + [Fraction(1), Fraction(-1)]
    eq_rows = [(row + [zero, zero], rhs) for row, rhs in assembly.problem.eq_rows]
    ge_rows = [(row + [Fraction(-1), Fraction(1)], rhs) for row, rhs in assembly.problem.ge_rows]
    prob = lp.LpProblem(objective=obj, eq_rows=eq_rows, ge_rows=ge_rows)
    sol = lp.solve_lp(prob, exact=(mode == "rational"), pivot_tol=pivot_tol, feas_tol=feas_tol)
    if sol.status == lp.INFEASIBLE:
        return SlaterPart(
            slack=NEG_INF,
            passed=False,
            status="balance_infeasible",
            note="balance equations admit no feasible mass at all",
        )
    if sol.status == lp.UNBOUNDED:
        return SlaterPart(
            slack=POS_INF,
            passed=True,
            status="unbounded_slack",
            note="slack unbounded; finiteness assumption should have caught this",
        )
    slack = sol.value
    threshold = 0 if mode == "rational" else feas_tol
    return SlaterPart(slack=ExtReal.finite(slack), passed=slack > threshold)


@dataclass
class NaiveReport:
    naive_status: str
    naive_value: ExtReal
    program_value: Optional[ExtReal]
    verdict: str  # "phantom" | "no_gap" | "undetermined"
    notes: List[str] = field(default_factory=list)
    naive_solution: Optional[lp.LpSolution] = None

    def as_dict(self) -> dict:
        return {
            "naive_status": self.naive_status,
            "naive_value": fmt_ext(self.naive_value),
            "kp_value": fmt_ext(self.program_value) if self.program_value is not None else None,
            "phantom_verdict": self.verdict,
            "notes": list(self.notes),
        }


_TRUNCATION_NOTE = (
    "finite models admit only finitely many balance-equation rays; a no-gap verdict "
    "on a truncated model does not rule out phantom solutions of an infinite-state original"
)


def solve_naive_program(
    m: FiniteMdp,
    mode: str = "rational",
    kernel: str = "uniform",
    kernel_rows=None,
    pivot_tol: float = 1e-12,
    feas_tol: float = 1e-9,
) -> NaiveReport:
    """Balance program over all states (no base-measure restriction) vs the
    restricted program; strict excess is a phantom verdict."""
    ref = construct_reference_kernel(m, weights=kernel, user_rows=kernel_rows)
    base = compute_base_measure(m, ref, mode=mode)
    s_naive = zero_value_structure(m, m.states)
    assembly = assemble_program(
        m, base, s_naive, include_constraints=True, support=m.states
    )
    sol = lp.solve_lp(assembly.problem, exact=(mode == "rational"), pivot_tol=pivot_tol, feas_tol=feas_tol)
    if sol.status == lp.OPTIMAL:
        naive_value = ExtReal.finite(sol.value)
    elif sol.status == lp.UNBOUNDED:
        naive_value = POS_INF
    else:
        naive_value = NEG_INF

    report = solve_constrained(
        m, mode=mode, kernel=kernel, kernel_rows=kernel_rows,
        pivot_tol=pivot_tol, feas_tol=feas_tol,
    )
    notes = [_TRUNCATION_NOTE]
    if report.status == STATUS_OPTIMAL:
        program_value: Optional[ExtReal] = report.value
    elif report.status == STATUS_INFEASIBLE:
        program_value = NEG_INF
    else:
        program_value = None
        notes.append("restricted program value unavailable (assumption failure)")
        return NaiveReport(sol.status, naive_value, None, "undetermined", notes, sol)

    verdict = "phantom" if naive_value > program_value else "no_gap"
    return NaiveReport(sol.status, naive_value, program_value, verdict, notes, sol)


class DualInnerUnboundedError(RuntimeError):
    """Inner maximization unbounded for some multiplier (finiteness interplay)."""


@dataclass
class DualReport:
    lambda_star: Optional[List]
    dual_value: ExtReal
    primal_value: ExtReal
    gap: ExtReal
    theta: List
    trace: List[Tuple[List, float]] = field(default_factory=list)
    method: str = ""
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "lambda_star": [fmt_scalar(v) for v in self.lambda_star] if self.lambda_star is not None else None,
            "dual_value": fmt_ext(self.dual_value),
            "primal_value": fmt_ext(self.primal_value),
            "gap": fmt_ext(self.gap),
            "theta": [fmt_scalar(v) for v in self.theta],
            "method": self.method,
            "trace": [
                [[fmt_scalar(v) for v in lam], fmt_scalar(val)] for lam, val in self.trace
            ],
            **({"note": self.note} if self.note else {}),
        }


def lagrangian_dual(
    m: FiniteMdp,
    mode: str = "rational",
    kernel: str = "uniform",
    kernel_rows=None,
    method: str = "auto",
    tol: float = 1e-8,
    max_iter: int = 5000,
    pivot_tol: float = 1e-12,
    feas_tol: float = 1e-9,
) -> DualReport:
    """Minimize L(lambda) over lambda <= 0 with exact inner maximizations."""
    exact = mode == "rational"
    ref = construct_reference_kernel(m, weights=kernel, user_rows=kernel_rows)
    base = compute_base_measure(m, ref, mode=mode)
    s_zero = zero_value_structure(m, base.support)
    theta = [c.limit for c in m.constraints]
    q = len(theta)

    unconstrained = assemble_program(m, base, s_zero, include_constraints=False)
    pairs = unconstrained.pairs

    def inner(lam: List) -> Tuple[object, List]:
        coeffs = {}
        for pair in pairs:
            v = m.reward[pair]
            for li, c in zip(lam, m.constraints):
                v = v - li * c.values[pair]
            coeffs[pair] = v
        prob = lp.LpProblem(
            objective=[coeffs[pair] for pair in pairs],
            eq_rows=unconstrained.problem.eq_rows,
        )
        sol = lp.solve_lp(prob, exact=exact, pivot_tol=pivot_tol, feas_tol=feas_tol)
        if sol.status == lp.UNBOUNDED:
            raise DualInnerUnboundedError(
                f"inner maximization unbounded at lambda = {[fmt_scalar(v) for v in lam]}"
            )
        if sol.status == lp.INFEASIBLE:
            raise DualInnerUnboundedError("balance equations infeasible; no dual defined")
        cvals = [
            sum(c.values[pair] * x for pair, x in zip(pairs, sol.x))
            for c in m.constraints
        ]
        lvalue = sol.value + sum(li * th for li, th in zip(lam, theta))
        return lvalue, cvals

    constrained = assemble_program(m, base, s_zero, include_constraints=True)
    psol = lp.solve_lp(constrained.problem, exact=exact, pivot_tol=pivot_tol, feas_tol=feas_tol)
    if psol.status == lp.UNBOUNDED:
        raise DualInnerUnboundedError("primal program unbounded; check finiteness assumptions")
    primal = ExtReal.finite(psol.value) if psol.status == lp.OPTIMAL else NEG_INF

    if q == 0:
        lvalue, _ = inner([])
        dual = ExtReal.finite(lvalue)
        return DualReport([], dual, primal, ext_margin(dual, primal), [], [([], lvalue)], "trivial")

    if psol.status == lp.INFEASIBLE:
        return DualReport(
            None,
            NEG_INF,
            NEG_INF,
            ZERO,
            theta,
            [],
            method="none",
            note="primal infeasible: the dual is unbounded below",
        )

    if method == "auto":
        method = ("exact" if exact else "golden") if q == 1 else "subgradient"

    trace: List[Tuple[List, float]] = []

    if method == "exact":
        lam = [min(v, type(v)(0)) for v in psol.duals_ge]
        lvalue, _ = inner(lam)
        trace.append((list(lam), lvalue))
        dual = ExtReal.finite(lvalue)
        return DualReport(list(lam), dual, primal, ext_margin(dual, primal), theta, trace, "exact")

    if method == "golden":
        if q != 1:
            raise ValueError("golden-section minimization needs exactly one constraint")

        def L(lam1: float) -> float:
            val, _ = inner([lam1])
            val = float(val)
            trace.append(([lam1], val))
            return val

        lo, hi = -1.0, 0.0
        L(hi)
        f_lo = L(lo)
        # Expand until the left end rises (convexity makes the bracket valid).
        while f_lo <= L(lo / 2) and abs(lo) < 1e12:
            lo *= 2
            f_lo = L(lo)
        if abs(lo) >= 1e12:
            return DualReport(
                None, NEG_INF, primal, ext_margin(NEG_INF, primal), theta, trace, "golden",
                note="dual appears unbounded below",
            )
        invphi = (math.sqrt(5) - 1) / 2
        a, b = lo, hi
        c1 = b - invphi * (b - a)
        c2 = a + invphi * (b - a)
        f1, f2 = L(c1), L(c2)
        while b - a > tol:
            if f1 <= f2:
                b, c2, f2 = c2, c1, f1
                c1 = b - invphi * (b - a)
                f1 = L(c1)
            else:
                a, c1, f1 = c1, c2, f2
                c2 = a + invphi * (b - a)
                f2 = L(c2)
        lam_star = (a + b) / 2
        lvalue = L(lam_star)
        dual = ExtReal.finite(lvalue)
        return DualReport([lam_star], dual, primal, ext_margin(dual, primal), theta, trace, "golden")

    if method == "subgradient":
        lam = [0.0] * q
        best = None
        best_lam = list(lam)
        target = float(psol.value)
        for _ in range(max_iter):
            lvalue, cvals = inner(lam)
            lvalue = float(lvalue)
            trace.append((list(lam), lvalue))
            if best is None or lvalue < best:
                best, best_lam = lvalue, list(lam)
            g = [float(th) - float(cv) for th, cv in zip(theta, cvals)]
            gnorm2 = sum(gi * gi for gi in g)
            if gnorm2 == 0 or best - target <= tol:
                break
            # Polyak step toward the primal value (a valid lower bound).
            step = (lvalue - target) / gnorm2
            if step <= 0:
                break
            lam = [min(0.0, li - step * gi) for li, gi in zip(lam, g)]
        dual = ExtReal.finite(best)
        return DualReport(best_lam, dual, primal, ext_margin(dual, primal), theta, trace, "subgradient")

    raise ValueError(f"unknown dual method {method!r}")


def run_diagnostics(
    m: FiniteMdp,
    mode: str = "rational",
    kernel: str = "uniform",
    kernel_rows=None,
    with_dual: bool = False,
    pivot_tol: float = 1e-12,
    feas_tol: float = 1e-9,
) -> dict:
    """Bundle for the `check` command; keys are part of the wire format."""
    ref = construct_reference_kernel(m, weights=kernel, user_rows=kernel_rows)
    base = compute_base_measure(m, ref, mode=mode)
    s_max = max_sustainable_structure(m, base.support)
    s_zero = zero_value_structure(m, base.support)
    b1 = check_assumption_b1(m, base, s_max, mode=mode, pivot_tol=pivot_tol, feas_tol=feas_tol)
    b2 = check_assumption_b2(m, base, s_max, mode=mode, pivot_tol=pivot_tol, feas_tol=feas_tol)
    doc = {
        "b1": b1.as_dict(),
        "b2": b2.as_dict(),
        "base_measure": {
            str(x): fmt_scalar(base.p[x]) for x in m.states if x in base.support
        },
        "infinite_states": sorted(str(x) for x in s_zero.states),
        "infinite_pairs": sorted([[str(x), a] for (x, a) in s_zero.pairs]),
        "slater_slack": None,
        "naive_value": None,
        "kp_value": None,
        "phantom_verdict": None,
        "dual": None,
    }
    if b1.passed:
        slater = check_slater(m, base, s_zero, mode=mode, pivot_tol=pivot_tol, feas_tol=feas_tol)
        doc["slater_slack"] = slater.as_dict()["slack"]
        doc["slater_passed"] = slater.passed
        naive = solve_naive_program(
            m, mode=mode, kernel=kernel, kernel_rows=kernel_rows,
            pivot_tol=pivot_tol, feas_tol=feas_tol,
        )
        doc["naive_value"] = fmt_ext(naive.naive_value)
        doc["kp_value"] = fmt_ext(naive.program_value) if naive.program_value is not None else None
        doc["phantom_verdict"] = naive.verdict
        doc["phantom_notes"] = naive.notes
        if with_dual and m.constraints:
            try:
                dual = lagrangian_dual(
                    m, mode=mode, kernel=kernel, kernel_rows=kernel_rows,
                    pivot_tol=pivot_tol, feas_tol=feas_tol,
                )
                doc["dual"] = dual.as_dict()
            except DualInnerUnboundedError as exc:
                doc["dual"] = {"error": str(exc)}
    return doc
