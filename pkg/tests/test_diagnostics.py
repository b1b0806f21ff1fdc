import random
from fractions import Fraction as F

import pytest

from etrsolve import lp
from etrsolve.diagnostics import (
    check_assumption_b1,
    check_assumption_b2,
    check_slater,
    lagrangian_dual,
    run_diagnostics,
    solve_naive_program,
)
from etrsolve.extreal import NEG_INF, POS_INF, ExtReal
from etrsolve.model import (
    Constraint,
    FiniteMdp,
    build_example_model,
    build_phantom_demo,
    load_model,
)
from etrsolve.program import assemble_program, solve_constrained
from etrsolve.reference import compute_base_measure, construct_reference_kernel
from etrsolve.structure import max_sustainable_structure, zero_value_structure
from randmodels import random_mdp

TRUNC = F(1, 2) ** 50


def _base_and_structures(m, kernel=None):
    ref = construct_reference_kernel(m, user_rows=kernel)
    base = compute_base_measure(m, ref)
    return base, max_sustainable_structure(m, base.support), zero_value_structure(m, base.support)


def _reward_variant(m, pair, value):
    reward = dict(m.reward)
    reward[pair] = value
    return FiniteMdp(
        states=m.states, actions=m.actions, admissible=m.admissible,
        transition=m.transition, reward=reward, constraints=m.constraints,
        initial=m.initial, fallback_action=m.fallback_action,
    )


def test_b1_passes_on_example(ex60):
    m, kernel = ex60
    base, s_max, _ = _base_and_structures(m, kernel)
    part = check_assumption_b1(m, base, s_max)
    assert part.passed


def test_b1_fails_with_positive_terminal_reward(ex8):
    m, kernel = ex8
    m2 = _reward_variant(m, ("delta", "a"), F(1, 10))
    base, s_max, _ = _base_and_structures(m2, kernel)
    part = check_assumption_b1(m2, base, s_max)
    assert not part.passed
    assert part.witness_pair == ("delta", "a")
    # witness soundness: the pair is sustainable and strictly positive-valued
    assert part.witness_pair in s_max.pairs
    assert m2.reward[part.witness_pair] > 0


def test_b1_bounded_whenever_sustainable_pairs_are_unpriced():
    # In the maximal structure every pair at a structure state keeps all its
    # successors inside (otherwise the structure plus that pair's forward
    # orbit would be larger), so the relaxed positive-part program can only
    # blow up through a priced sustainable pair.  The boundedness subcheck is
    # a safety net; verify it never fires alone.
    rng = random.Random(29)
    for _ in range(25):
        m = random_mdp(rng)
        base, s_max, _ = _base_and_structures(m)
        for x in s_max.states:
            for a in m.admissible[x]:
                assert (x, a) in s_max.pairs
        part = check_assumption_b1(m, base, s_max)
        priced = any(
            h[pair] > 0
            for pair in s_max.pairs
            for h in [m.reward] + [c.values for c in m.constraints]
        )
        assert part.passed == (not priced)
        if not part.passed:
            assert part.witness_pair is not None


def test_b1_trivial_pass_without_sustainable_mass():
    text = """
    {"states": ["x", "end"], "actions": ["a"], "admissible": {"x": ["a"], "end": ["a"]},
     "transitions": [{"from": "x", "action": "a", "to": "end", "prob": "1"},
                     {"from": "end", "action": "a", "to": "end", "prob": "1"}],
     "reward": {"x": {"a": "5"}, "end": {"a": "0"}}, "initial": {"x": "1"}}
    """
    m = load_model(text)
    base, s_max, _ = _base_and_structures(m)
    assert check_assumption_b1(m, base, s_max).passed


def test_b2_passes_on_example(ex60):
    m, kernel = ex60
    base, s_max, _ = _base_and_structures(m, kernel)
    assert check_assumption_b2(m, base, s_max).passed


def test_b2_fails_on_priced_fed_cycle():
    rng = random.Random(17)
    m = random_mdp(rng, with_cycle=True, nonzero_cycle_constraint=True)
    base, s_max, _ = _base_and_structures(m)
    assert ("c0", "a") in s_max.pairs
    part = check_assumption_b2(m, base, s_max)
    assert not part.passed
    assert part.ray and any(pair[0] in ("c0", "c1") for pair in part.ray)
    assert "conservative" in part.note


def test_b2_trivial_pass_on_nonnegative_values(ex60):
    m, kernel = ex60
    all_nonneg = FiniteMdp(
        states=m.states, actions=m.actions, admissible=m.admissible,
        transition=m.transition, reward={k: abs(v) for k, v in m.reward.items()},
        constraints=[Constraint("c1", {k: abs(v) for k, v in m.constraints[0].values.items()}, F(0))],
        initial=m.initial, fallback_action=m.fallback_action,
    )
    base, s_max, _ = _base_and_structures(all_nonneg, kernel)
    assert check_assumption_b2(all_nonneg, base, s_max).passed


def test_slater_slack_across_limits():
    for theta, want_slack, want_pass in (
        (F(1, 4), F(1, 4), True),
        (F(1, 2), F(0), False),
    ):
        m, kernel = build_example_model(30, theta, include_paper_p=True)
        base, _s_max, s_zero = _base_and_structures(m, kernel)
        part = check_slater(m, base, s_zero)
        assert part.slack.is_finite
        assert abs(part.slack.finite_value - want_slack) <= TRUNC
        assert part.passed is want_pass
    m, kernel = build_example_model(30, F(3, 5), include_paper_p=True)
    base, _s_max, s_zero = _base_and_structures(m, kernel)
    part = check_slater(m, base, s_zero)
    assert part.slack < ExtReal.finite(F(0))
    assert not part.passed


def test_slater_trivial_without_constraints():
    m = build_phantom_demo()
    base, _s_max, s_zero = _base_and_structures(m)
    part = check_slater(m, base, s_zero)
    assert part.passed and part.slack == POS_INF


def test_phantom_demo_naive_program_unbounded():
    m = build_phantom_demo()
    rep = solve_naive_program(m)
    assert rep.naive_status == lp.UNBOUNDED
    assert rep.naive_value == POS_INF
    assert rep.program_value == ExtReal.finite(F(0))
    assert rep.verdict == "phantom"
    ray = rep.naive_solution.certificate["ray"]
    assert any(r > 0 for r in ray)


def test_truncated_example_has_no_gap(ex8):
    m, kernel = ex8
    rep = solve_naive_program(m, kernel_rows=kernel)
    assert rep.verdict == "no_gap"
    assert rep.naive_value == rep.program_value
    assert any("truncated" in note for note in rep.notes)


def test_truncated_example_with_negative_states_no_gap():
    m, kernel = build_example_model(8, F(1, 4), include_paper_p=True, include_negative=3)
    rep = solve_naive_program(m, kernel_rows=kernel)
    assert rep.verdict == "no_gap"


def test_single_absorbing_state_no_gap():
    text = """
    {"states": ["x"], "actions": ["a"], "admissible": {"x": ["a"]},
     "transitions": [{"from": "x", "action": "a", "to": "x", "prob": "1"}],
     "reward": {"x": {"a": "0"}}, "initial": {"x": "1"}}
    """
    rep = solve_naive_program(load_model(text))
    assert rep.verdict == "no_gap"
    assert rep.naive_value == ExtReal.finite(F(0))


def _grid_oracle(m, kernel, lo=-1.0, hi=0.0, step=1e-4):
    """Independent dense-grid minimization of the dual function."""
    ref = construct_reference_kernel(m, user_rows=kernel)
    base = compute_base_measure(m, ref)
    s_zero = zero_value_structure(m, base.support)
    asm = assemble_program(m, base, s_zero, include_constraints=False)
    c = m.constraints[0]
    theta = float(c.limit)
    best = (None, float("inf"))
    lam = lo
    while lam <= hi + 1e-12:
        obj = [float(m.reward[p]) - lam * float(c.values[p]) for p in asm.pairs]
        prob = lp.LpProblem(objective=obj, eq_rows=[
            ([float(v) for v in row], float(r)) for row, r in asm.problem.eq_rows
        ])
        sol = lp.solve_lp(prob, exact=False)
        val = sol.value + lam * theta
        if val < best[1]:
            best = (lam, val)
        lam += step
    return best


@pytest.mark.slow
def test_dual_matches_grid_oracle_small_example():
    m, kernel = build_example_model(12, F(1, 4), include_paper_p=True)
    lam_grid, val_grid = _grid_oracle(m, kernel, step=1e-3)
    rep = lagrangian_dual(m, kernel_rows=kernel)
    assert rep.method == "exact"
    assert abs(float(rep.lambda_star[0]) - lam_grid) <= 2e-3
    assert abs(float(rep.dual_value.finite_value) - val_grid) <= 1e-3
    assert rep.gap == ExtReal.finite(F(0))


def test_dual_exact_mode_on_example(ex60):
    m, kernel = ex60
    rep = lagrangian_dual(m, kernel_rows=kernel)
    assert abs(rep.lambda_star[0] - F(-3, 10)) <= TRUNC
    assert abs(rep.dual_value.finite_value - F(13, 40)) <= TRUNC
    assert rep.gap == ExtReal.finite(F(0))
    assert rep.theta == [F(1, 4)]


def test_dual_golden_section_matches_exact(ex60):
    m, kernel = ex60
    exact = lagrangian_dual(m, kernel_rows=kernel)
    golden = lagrangian_dual(m, kernel_rows=kernel, mode="float", method="golden", tol=1e-8)
    assert abs(float(exact.lambda_star[0]) - golden.lambda_star[0]) < 1e-6
    assert abs(float(exact.dual_value.finite_value) - golden.dual_value.finite_value) < 1e-6
    assert len(golden.trace) > 5


def test_dual_inactive_constraint():
    m, kernel = build_example_model(60, F(-1), include_paper_p=True)
    rep = lagrangian_dual(m, kernel_rows=kernel)
    assert rep.lambda_star == [F(0)]
    assert abs(rep.dual_value.finite_value - F(2, 5)) <= TRUNC
    assert rep.gap == ExtReal.finite(F(0))


def test_dual_infeasible_primal():
    m, kernel = build_example_model(20, F(3, 5), include_paper_p=True)
    rep = lagrangian_dual(m, kernel_rows=kernel)
    assert rep.dual_value == NEG_INF
    assert rep.lambda_star is None


def test_dual_weak_duality_on_random_models():
    rng = random.Random(51)
    for _ in range(15):
        m = random_mdp(rng, n_constraints=1)
        report = solve_constrained(m)
        if report.status != "optimal":
            continue
        rep = lagrangian_dual(m)
        assert rep.dual_value >= report.value
        assert rep.gap >= ExtReal.finite(F(0))
        assert rep.gap == ExtReal.finite(F(0))  # LP partial dualization is tight


def test_dual_subgradient_two_constraints():
    rng = random.Random(77)
    done = 0
    for _ in range(10):
        m = random_mdp(rng, n_constraints=2)
        report = solve_constrained(m)
        if report.status != "optimal":
            continue
        slater = report.checks["slater"]
        rep = lagrangian_dual(m, mode="float", method="subgradient", tol=1e-8)
        assert all(l <= 0 for l in rep.lambda_star)
        assert rep.dual_value.finite_value >= float(report.value.finite_value) - 1e-9
        if slater["passed"]:
            gap = rep.dual_value.finite_value - float(report.value.finite_value)
            assert gap <= 1e-6, gap
            done += 1
    assert done >= 3


def test_dual_function_is_convex_along_samples(ex8):
    m, kernel = ex8
    ref = construct_reference_kernel(m, user_rows=kernel)
    base = compute_base_measure(m, ref)
    s_zero = zero_value_structure(m, base.support)
    asm = assemble_program(m, base, s_zero, include_constraints=False)
    c = m.constraints[0]

    def L(lam):
        obj = {p: m.reward[p] - lam * c.values[p] for p in asm.pairs}
        prob = lp.LpProblem(
            objective=[obj[p] for p in asm.pairs], eq_rows=asm.problem.eq_rows
        )
        sol = lp.solve_lp(prob)
        return sol.value + lam * c.limit

    pts = [F(-2), F(-1), F(-1, 2), F(-1, 4), F(0)]
    for a, b in zip(pts, pts[2:]):
        mid = (a + b) / 2
        assert L(mid) <= (L(a) + L(b)) / 2


def test_run_diagnostics_wire_keys(ex8):
    m, kernel = ex8
    doc = run_diagnostics(m, kernel_rows=kernel, with_dual=True)
    for key in ("b1", "b2", "slater_slack", "naive_value", "kp_value", "phantom_verdict", "dual"):
        assert key in doc
    assert doc["b1"]["passed"] and doc["b2"]["passed"]
    assert doc["slater_slack"] == "1/4"
    assert doc["phantom_verdict"] == "no_gap"
    assert doc["dual"]["lambda_star"] is not None
    assert doc["infinite_pairs"] == [["delta", "a"]]


def test_phantom_gap_can_be_finite():
    # Pricing the phantom cycle through a constraint caps the spurious mass:
    # the naive program stays feasible with a strictly larger finite value.
    m = build_phantom_demo()
    priced = FiniteMdp(
        states=m.states, actions=m.actions, admissible=m.admissible,
        transition=m.transition, reward=m.reward,
        constraints=[Constraint(
            "budget",
            {("s", "a"): F(0), ("u", "a"): F(-1), ("v", "a"): F(0)},
            F(-5),
        )],
        initial=m.initial, fallback_action=m.fallback_action,
    )
    rep = solve_naive_program(priced)
    assert rep.naive_status == lp.OPTIMAL
    assert rep.naive_value == ExtReal.finite(F(5))
    assert rep.program_value == ExtReal.finite(F(0))
    assert rep.verdict == "phantom"


def test_dual_gap_vanishes_even_without_interior_slack(ex60_half):
    # At the tight limit the interior condition fails, yet the finite program
    # still has a zero duality gap; only the assertion is downgraded.
    m, kernel, solved = ex60_half
    assert solved.checks["slater"]["passed"] is False
    rep = lagrangian_dual(m, kernel_rows=kernel)
    assert rep.gap == ExtReal.finite(F(0))
    assert rep.dual_value == solved.value


def test_slater_float_mode_treats_tiny_slack_as_zero():
    m, kernel = build_example_model(40, F(1, 2), include_paper_p=True)
    base, _s_max, s_zero = _base_and_structures(m, kernel)
    part = check_slater(m, base, s_zero, mode="float")
    assert abs(part.slack.finite_value) < 1e-12
    assert part.passed is False


def test_dual_golden_detects_unbounded_below():
    m, kernel = build_example_model(20, F(3, 5), include_paper_p=True)
    rep = lagrangian_dual(m, kernel_rows=kernel, mode="float", method="golden")
    assert rep.dual_value == NEG_INF


def test_assumption_report_bundle(ex8):
    from etrsolve.diagnostics import assumption_report

    m, kernel = ex8
    base, s_max, _ = _base_and_structures(m, kernel)
    rep = assumption_report(m, base, s_max)
    assert rep.b1_pass and rep.b2_pass
    assert rep.as_dict()["b1"]["passed"] is True
