"""Constrained total-reward MDP solver toolkit.

Builds a dominating reference kernel and its base probability measure,
assembles the occupation-mass linear program with explicit infinite-mass
bookkeeping, extracts the induced stationary randomized policy, and verifies
the solution against exact policy evaluation, assumption checks, phantom
detection for the naive balance program, and a Lagrangian dual.
"""

from .extreal import ExtReal, NEG_INF, POS_INF, ext_combine
from .model import (
    Constraint,
    FiniteMdp,
    ModelFormatError,
    ModelValidationError,
    OccupationMeasure,
    StationaryPolicy,
    build_example_model,
    build_phantom_demo,
    deterministic_policy,
    load_model,
    parse_model_document,
    serialize_model,
    validate_model,
)
from .reference import (
    BaseMeasure,
    DominationError,
    ReferenceKernel,
    check_support_closure,
    compute_base_measure,
    construct_reference_kernel,
)
from .structure import InfiniteStructure, max_sustainable_structure, zero_value_structure
from .lp import LpProblem, LpSolution, check_certificate, dump_lp, solve_lp
from .variables import FeasibleVariable, extract_policy, measure_value
from .evaluation import (
    EvaluationResult,
    SimulationEstimate,
    SimulationReport,
    check_dominance,
    evaluate_policy,
    occupation_of_policy,
    simulate_policy,
    variable_from_policy,
)
from .program import SolveReport, assemble_program, report_to_dict, solve_constrained
from .diagnostics import (
    AssumptionPart,
    AssumptionReport,
    assumption_report,
    DualReport,
    NaiveReport,
    SlaterPart,
    check_assumption_b1,
    check_assumption_b2,
    check_slater,
    lagrangian_dual,
    run_diagnostics,
    solve_naive_program,
)

__version__ = "0.1.0"
