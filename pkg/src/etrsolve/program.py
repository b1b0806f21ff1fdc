"""The constrained occupation-mass program over the base-measure support.

Variables are finite masses on admissible pairs whose state carries positive
base measure.  Balance equalities hold at every support state outside the
zero-value infinite structure; the structure's states have their balance
relaxed because their marginal is infinite there, and its pairs (all with
zero reward and zero constraint values) carry the infinite mass.  Constraint
rows are >= inequalities against the limits, the objective is the expected
reward.  An optimal mass vector, together with the structure and per-state
weights, induces a stationary randomized policy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from . import lp
from .extreal import ExtReal, NEG_INF, fmt_ext
from .model import FiniteMdp, Pair, State, StationaryPolicy, require_valid
from .reference import (
    BaseMeasure,
    check_support_closure,
    compute_base_measure,
    construct_reference_kernel,
)
from .structure import InfiniteStructure, max_sustainable_structure, zero_value_structure
from .variables import (
    FeasibleVariable,
    constraint_values,
    extract_policy,
    measure_value,
    uniform_weights,
)

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_ASSUMPTION_FAILED = "assumption_failed"


@dataclass
class ProgramAssembly:
    problem: lp.LpProblem
    pairs: List[Pair]
    balance_states: List[State]


def assemble_program(
    m: FiniteMdp,
    base: BaseMeasure,
    structure: InfiniteStructure,
    objective: Optional[Dict[Pair, object]] = None,
    include_constraints: bool = True,
    support: Optional[Sequence[State]] = None,
    require_zero_valued: bool = True,
) -> ProgramAssembly:
    """Build the finite LP for a given support set and infinite structure.

    ``support`` defaults to the base-measure support; passing all states gives
    the naive balance program.  The structure must be zero-valued unless the
    caller explicitly opts out (the relaxed programs used by the assumption
    checks do so: they probe boundedness, not the optimum).
    """
    supp = list(support) if support is not None else [x for x in m.states if x in base.support]
    supp_set = set(supp)
    if require_zero_valued:
        for pair in structure.pairs:
            bad = m.reward[pair] != 0 or any(c.values[pair] != 0 for c in m.constraints)
            if bad:
                raise ValueError(
                    f"structure pair {pair!r} carries a nonzero value; "
                    "the program requires a zero-valued structure"
                )
    pairs = [(x, a) for x in m.states if x in supp_set for a in m.admissible[x]]
    col = {pair: j for j, pair in enumerate(pairs)}
    n = len(pairs)
    zero = Fraction(0)

    obj_map = objective if objective is not None else m.reward
    obj = [obj_map.get(pair, zero) for pair in pairs]

    balance_states = [x for x in m.states if x in supp_set and x not in structure.states]
    eq_rows = []
    for x in balance_states:
        row = [zero] * n
        for a in m.admissible[x]:
            row[col[(x, a)]] += Fraction(1)
        for (y, b) in pairs:
            pr = m.transition[(y, b)].get(x)
            if pr:
                row[col[(y, b)]] -= pr
        eq_rows.append((row, m.initial_of(x)))

    ge_rows = []
    if include_constraints:
        for c in m.constraints:
            ge_rows.append(([c.values.get(pair, zero) for pair in pairs], c.limit))

    return ProgramAssembly(
        problem=lp.LpProblem(objective=obj, eq_rows=eq_rows, ge_rows=ge_rows),
        pairs=pairs,
        balance_states=balance_states,
    )


@dataclass
class SolveReport:
    status: str
    mode: str
    value: Optional[ExtReal]
    variable: Optional[FeasibleVariable]
    policy: Optional[StationaryPolicy]
    constraint_values: List[ExtReal]
    base: Optional[BaseMeasure]
    structure: Optional[InfiniteStructure]
    checks: dict = field(default_factory=dict)
    dual: Optional[object] = None
    notes: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    lp_solution: Optional[lp.LpSolution] = None


def solve_constrained(
    m: FiniteMdp,
    mode: str = "rational",
    kernel: str = "uniform",
    kernel_rows=None,
    with_dual: bool = False,
    pivot_tol: float = 1e-12,
    feas_tol: float = 1e-9,
) -> SolveReport:
    """Full pipeline: reference kernel, base measure, structures, checks,
    LP solve, policy extraction and the dominance verification.

    An unbounded assembled LP is reported as a failed finiteness assumption,
    never as a program value of +inf.
    """
    from . import diagnostics  # deferred: diagnostics builds on this module

    if mode not in ("rational", "float"):
        raise ValueError(f"unknown mode {mode!r}")
    exact = mode == "rational"
    tol = 0 if exact else feas_tol
    timings: Dict[str, float] = {}
    notes: List[str] = []
    checks: dict = {}

    t0 = time.perf_counter()
    require_valid(m)
    checks["validation"] = True
    timings["validate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ref = construct_reference_kernel(m, weights=kernel, user_rows=kernel_rows)
    base = compute_base_measure(m, ref, mode=mode)
    closure = check_support_closure(m, base)
    if not closure.ok:
        raise RuntimeError(
            "base-measure support is not forward closed (domination bug): "
            + "; ".join(closure.violations)
        )
    checks["support_closure"] = True
    timings["base_measure"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    s_max = max_sustainable_structure(m, base.support)
    s_zero = zero_value_structure(m, base.support)
    timings["structures"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    b1 = diagnostics.check_assumption_b1(m, base, s_max, mode=mode, pivot_tol=pivot_tol, feas_tol=feas_tol)
    b2 = diagnostics.check_assumption_b2(m, base, s_max, mode=mode, pivot_tol=pivot_tol, feas_tol=feas_tol)
    checks["b1"] = b1.as_dict()
    checks["b2"] = b2.as_dict()
    if not b2.passed:
        notes.append(
            "finiteness of negative parts could not be certified (conservative check); "
            "some policies may have value -inf"
        )
    timings["assumptions"] = time.perf_counter() - t0

    base_report = dict(
        mode=mode,
        base=base,
        structure=s_zero,
        checks=checks,
        notes=notes,
        timings=timings,
    )

    if not b1.passed:
        notes.append("program value is not finite; solve aborted (finiteness assumption failed)")
        return SolveReport(
            status=STATUS_ASSUMPTION_FAILED,
            value=None,
            variable=None,
            policy=None,
            constraint_values=[],
            **base_report,
        )

    t0 = time.perf_counter()
    slater = diagnostics.check_slater(m, base, s_zero, mode=mode, pivot_tol=pivot_tol, feas_tol=feas_tol)
    checks["slater"] = slater.as_dict()
    if slater.status == "ok" and not slater.passed:
        notes.append("interior-point condition fails: only weak duality is asserted")
    timings["slater"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    assembly = assemble_program(m, base, s_zero)
    sol = lp.solve_lp(assembly.problem, exact=exact, pivot_tol=pivot_tol, feas_tol=feas_tol)
    timings["lp"] = time.perf_counter() - t0

    if sol.status == lp.INFEASIBLE:
        return SolveReport(
            status=STATUS_INFEASIBLE,
            value=NEG_INF,
            variable=None,
            policy=None,
            constraint_values=[],
            lp_solution=sol,
            **base_report,
        )
    if sol.status == lp.UNBOUNDED:
        notes.append(
            "assembled program is unbounded although the finiteness pre-check passed; "
            "treated as a finiteness assumption failure"
        )
        checks["b1"]["passed"] = False
        return SolveReport(
            status=STATUS_ASSUMPTION_FAILED,
            value=None,
            variable=None,
            policy=None,
            constraint_values=[],
            lp_solution=sol,
            **base_report,
        )

    t0 = time.perf_counter()
    mass: Dict[Pair, object] = {}
    for pair, v in zip(assembly.pairs, sol.x):
        if not exact and -feas_tol < v < 0:
            v = 0.0
        if v != 0:
            mass[pair] = v
    variable = FeasibleVariable(
        finite_mass=mass,
        structure=s_zero,
        infinite_weights=uniform_weights(s_zero),
    )
    policy = extract_policy(m, variable)
    cons_vals = constraint_values(m, variable)
    value = measure_value(variable, m.reward)
    timings["extract"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    from .evaluation import check_dominance

    dom = check_dominance(m, variable, mode=mode, tol=tol)
    checks["dominance"] = {
        "ok": dom.ok,
        "margins": {k: fmt_ext(v) for k, v in dom.margins.items()},
    }
    if not dom.ok:
        notes.append("dominance verification failed: extracted policy underperforms the measure")
    timings["dominance"] = time.perf_counter() - t0

    dual = None
    if with_dual:
        t0 = time.perf_counter()
        dual = diagnostics.lagrangian_dual(
            m, mode=mode, kernel=kernel, kernel_rows=kernel_rows,
            pivot_tol=pivot_tol, feas_tol=feas_tol,
        )
        timings["dual"] = time.perf_counter() - t0

    return SolveReport(
        status=STATUS_OPTIMAL,
        value=value,
        variable=variable,
        policy=policy,
        constraint_values=cons_vals,
        dual=dual,
        lp_solution=sol,
        **base_report,
    )


def report_to_dict(report: SolveReport, include_timings: bool = False) -> dict:
    """JSON-ready view of a solve report; stable across runs unless timings
    are requested."""
    from .extreal import fmt_scalar

    doc = {
        "status": report.status,
        "mode": report.mode,
        "value": fmt_ext(report.value) if report.value is not None else None,
        "constraint_values": [fmt_ext(v) for v in report.constraint_values],
        "policy": (
            {
                str(x): {a: fmt_scalar(pr) for a, pr in sorted(row.items())}
                for x, row in sorted(report.policy.rows.items(), key=lambda kv: str(kv[0]))
            }
            if report.policy is not None
            else None
        ),
        "infinite_states": sorted((str(x) for x in report.structure.states)) if report.structure else [],
        "infinite_pairs": sorted(
            [[str(x), a] for (x, a) in report.structure.pairs]
        ) if report.structure else [],
        "checks": report.checks,
        "notes": list(report.notes),
        "dual": report.dual.as_dict() if report.dual is not None else None,
    }
    if include_timings:
        doc["timings"] = {k: round(v, 6) for k, v in report.timings.items()}
    return doc
