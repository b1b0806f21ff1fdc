import random
from fractions import Fraction as F

import pytest

from etrsolve.extreal import NEG_INF, ZERO, ExtReal
from etrsolve.model import FiniteMdp, build_example_model, build_phantom_demo, load_model
from etrsolve.program import (
    STATUS_ASSUMPTION_FAILED,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    assemble_program,
    report_to_dict,
    solve_constrained,
)
from etrsolve.reference import compute_base_measure, construct_reference_kernel
from etrsolve.structure import zero_value_structure
from etrsolve.variables import (
    FeasibleVariable,
    balance_residuals,
    combine_variables,
    measure_value,
    uniform_weights,
    variable_violations,
)
from randmodels import enumerate_vertices, random_mdp

TRUNC = F(1, 2) ** 50


def close(value, target, tol=TRUNC):
    assert value.is_finite
    return abs(value.finite_value - target) <= tol


def _pipeline(m, kernel=None):
    ref = construct_reference_kernel(m, user_rows=kernel)
    base = compute_base_measure(m, ref)
    return base, zero_value_structure(m, base.support)


def test_assembly_counts_on_example(ex60):
    m, kernel = ex60
    base, s = _pipeline(m, kernel)
    asm = assemble_program(m, base, s)
    assert len(asm.pairs) == 62  # (1,a),(1,b),(2..60,a),(delta,a)
    assert len(asm.balance_states) == 60  # every support state except delta
    assert "delta" not in asm.balance_states
    assert len(asm.problem.ge_rows) == 1


def test_assembly_rejects_valued_structure():
    m, _ = build_example_model(6, F(1, 4))
    # A variant whose terminal state pays reward: the structure keeps delta
    # only when values are ignored, and the assembly must refuse it.
    reward = dict(m.reward)
    reward[("delta", "a")] = F(1)
    m2 = FiniteMdp(
        states=m.states, actions=m.actions, admissible=m.admissible,
        transition=m.transition, reward=reward, constraints=m.constraints,
        initial=m.initial, fallback_action=m.fallback_action,
    )
    from etrsolve.structure import max_sustainable_structure
    base2, _ = _pipeline(m2)
    s_max = max_sustainable_structure(m2, base2.support)
    with pytest.raises(ValueError, match="zero-valued"):
        assemble_program(m2, base2, s_max)


def test_feasible_interval_parametrization(ex60):
    # The feasible region projects to one segment: mass at (1,a) plus mass at
    # (1,b) equals 1/2; the unconstrained optimum pushes everything to (1,a).
    m, kernel = ex60
    m_free, _ = build_example_model(60, F(-1), include_paper_p=True)
    r = solve_constrained(m_free, kernel_rows=kernel)
    za = r.variable.finite_mass.get((1, "a"), F(0))
    zb = r.variable.finite_mass.get((1, "b"), F(0))
    assert za + zb == F(1, 2)
    assert zb == 0
    assert close(r.value, F(2, 5))


def test_solve_values_for_three_limits(ex60_solved, ex60_half):
    assert ex60_solved.status == STATUS_OPTIMAL
    assert close(ex60_solved.value, F(13, 40))
    _m, _k, half = ex60_half
    assert half.status == STATUS_OPTIMAL
    assert half.value.finite_value == F(1, 4)  # exact: optimum sits at mass 0


def test_constraint_value_binds_at_limit(ex60_solved):
    assert ex60_solved.constraint_values[0] == ExtReal.finite(F(1, 4))
    assert ex60_solved.checks["slater"]["slack"] == "1/4"


def test_policy_extraction_at_both_limits(ex60_solved, ex60_half):
    row = ex60_solved.policy.rows[1]
    assert close(ExtReal.finite(row["a"]), F(1, 2))
    assert close(ExtReal.finite(row["b"]), F(1, 2))
    assert ex60_solved.policy.rows["delta"] == {"a": F(1)}
    _m, _k, half = ex60_half
    assert half.policy.rows[1] == {"b": F(1)}  # exact
    assert half.checks["slater"]["slack"] == "0"
    assert half.checks["slater"]["passed"] is False


def test_infeasible_limit(ex60):
    m, kernel = build_example_model(60, F(3, 5), include_paper_p=True)
    r = solve_constrained(m, kernel_rows=kernel)
    assert r.status == STATUS_INFEASIBLE
    assert r.value == NEG_INF
    assert r.checks["slater"]["slack"] == "-1/10"


def test_negative_terminal_reward_makes_balance_infeasible():
    m, _ = build_example_model(10, F(1, 4))
    reward = dict(m.reward)
    reward[("delta", "a")] = F(-1)
    m2 = FiniteMdp(
        states=m.states, actions=m.actions, admissible=m.admissible,
        transition=m.transition, reward=reward, constraints=m.constraints,
        initial=m.initial, fallback_action=m.fallback_action,
    )
    r = solve_constrained(m2)
    # the zero-value structure is empty, the terminal balance row reads 0 = 1/2
    assert r.status == STATUS_INFEASIBLE
    assert r.checks["b1"]["passed"] is True
    assert r.checks["b2"]["passed"] is False


def test_positive_terminal_reward_fails_finiteness():
    m, _ = build_example_model(10, F(1, 4))
    reward = dict(m.reward)
    reward[("delta", "a")] = F(1, 10)
    m2 = FiniteMdp(
        states=m.states, actions=m.actions, admissible=m.admissible,
        transition=m.transition, reward=reward, constraints=m.constraints,
        initial=m.initial, fallback_action=m.fallback_action,
    )
    r = solve_constrained(m2)
    assert r.status == STATUS_ASSUMPTION_FAILED
    assert r.checks["b1"]["passed"] is False
    assert r.checks["b1"]["witness_pair"] == ["delta", "a"]


def test_measure_value_examples(ex60_solved):
    v = ex60_solved.variable
    m, _ = build_example_model(60, F(1, 4), include_paper_p=True)
    assert close(measure_value(v, m.reward), F(13, 40))
    assert measure_value(v, m.constraints[0].values) == ExtReal.finite(F(1, 4))
    zero_h = {pair: F(0) for pair in m.pairs()}
    assert measure_value(v, zero_h) == ZERO  # 0 * inf = 0 on the terminal pair
    assert ("delta", "a") in v.structure.pairs


def test_balance_residuals_vanish_at_solution(ex60_solved, ex60):
    m, kernel = ex60
    base, _ = _pipeline(m, kernel)
    res = balance_residuals(m, base, ex60_solved.variable)
    assert set(res) == {x for x in base.support if x != "delta"}
    assert all(r == 0 for r in res.values())
    assert variable_violations(m, base, ex60_solved.variable) == []


def test_zero_mass_state_gets_fallback_action():
    # State "skip" is in the base support (the kernel mixes both actions of
    # "top") but optimal flow avoids it; extraction must still give a row.
    text = """
    {"states": ["top", "skip", "sink"], "actions": ["a", "b"],
     "admissible": {"top": ["a", "b"], "skip": ["a", "b"], "sink": ["a"]},
     "transitions": [
        {"from": "top", "action": "a", "to": "sink", "prob": "1"},
        {"from": "top", "action": "b", "to": "skip", "prob": "1"},
        {"from": "skip", "action": "a", "to": "sink", "prob": "1"},
        {"from": "skip", "action": "b", "to": "sink", "prob": "1"},
        {"from": "sink", "action": "a", "to": "sink", "prob": "1"}],
     "reward": {"top": {"a": "1", "b": "0"}, "skip": {"a": "-1", "b": "-2"}, "sink": {"a": "0"}},
     "initial": {"top": "1"}}
    """
    m = load_model(text)
    r = solve_constrained(m)
    assert r.status == STATUS_OPTIMAL
    assert r.value.finite_value == 1
    base, _ = _pipeline(m)
    assert "skip" in base.support
    assert r.policy.rows["skip"] == {"a": F(1)}  # fallback = first admissible


def test_value_agrees_across_reference_kernels(ex60):
    m, kernel = ex60
    r_paper = solve_constrained(m, kernel_rows=kernel, mode="float")
    r_unif = solve_constrained(m, kernel="uniform", mode="float")
    r_dyad = solve_constrained(m, kernel="dyadic", mode="float")
    assert abs(r_paper.value.finite_value - r_unif.value.finite_value) < 1e-9
    assert abs(r_paper.value.finite_value - r_dyad.value.finite_value) < 1e-9


def test_float_mode_matches_rational_value(ex60, ex60_solved):
    m, kernel = ex60
    rf = solve_constrained(m, kernel_rows=kernel, mode="float")
    assert rf.status == STATUS_OPTIMAL
    assert abs(rf.value.finite_value - float(ex60_solved.value.finite_value)) < 1e-9


def test_convex_combinations_stay_feasible():
    rng = random.Random(13)
    hits = 0
    for _ in range(12):
        m = random_mdp(rng, max_states=3, max_actions=2)
        ref = construct_reference_kernel(m)
        base = compute_base_measure(m, ref)
        s = zero_value_structure(m, base.support)
        asm = assemble_program(m, base, s)
        vertices = enumerate_vertices(asm.problem)
        if len(vertices) < 2:
            continue
        hits += 1
        w = uniform_weights(s)
        v1 = FeasibleVariable(dict(zip(asm.pairs, vertices[0])), s, w)
        v2 = FeasibleVariable(dict(zip(asm.pairs, vertices[-1])), s, w)
        for alpha in (F(0), F(1, 3), F(1, 2), F(1)):
            mix = combine_variables(v1, v2, alpha)
            assert variable_violations(m, base, mix) == []
            got = measure_value(mix, m.reward)
            want = alpha * measure_value(v1, m.reward).finite_value + (1 - alpha) * measure_value(
                v2, m.reward
            ).finite_value
            assert got == ExtReal.finite(want)
    assert hits >= 4


def test_phantom_demo_program_value_zero():
    m = build_phantom_demo()
    r = solve_constrained(m)
    assert r.status == STATUS_OPTIMAL
    assert r.value == ExtReal.finite(F(0))
    assert r.structure.states == {"s"}
    assert r.policy.rows["u"] == {"a": F(1)}  # outside support: fallback row


def test_report_dict_shape(ex60_solved):
    doc = report_to_dict(ex60_solved)
    assert doc["status"] == "optimal"
    assert doc["infinite_states"] == ["delta"]
    assert doc["infinite_pairs"] == [["delta", "a"]]
    assert doc["checks"]["dominance"]["ok"] is True
    assert "timings" not in doc
    timed = report_to_dict(ex60_solved, include_timings=True)
    assert "timings" in timed and timed["timings"]


def test_float_and_rational_pipelines_agree_on_random_models():
    rng = random.Random(99)
    statuses = set()
    for _ in range(20):
        m = random_mdp(rng, with_cycle=rng.random() < 0.4)
        exact = solve_constrained(m, mode="rational")
        approx = solve_constrained(m, mode="float")
        statuses.add(exact.status)
        assert approx.status == exact.status
        if exact.status == STATUS_OPTIMAL:
            assert abs(float(exact.value.finite_value) - approx.value.finite_value) < 1e-9
    assert STATUS_OPTIMAL in statuses


def test_solver_variables_satisfy_all_invariants_on_random_models():
    rng = random.Random(123)
    checked = 0
    for _ in range(15):
        m = random_mdp(rng, with_cycle=rng.random() < 0.5)
        report = solve_constrained(m, mode="rational")
        if report.status != STATUS_OPTIMAL:
            continue
        assert variable_violations(m, report.base, report.variable) == []
        checked += 1
    assert checked >= 8
