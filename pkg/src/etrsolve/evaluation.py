"""Ground-truth policy evaluation: exact occupation measures and simulation.

Exact evaluation classifies states under the policy-induced chain.  States in
a closed communicating class that is reachable from the initial distribution
are visited infinitely often in expectation; the remaining reachable states
are transient and their expected visit counts solve a small linear system,
exactly in rational mode.  Values recombine positive and negative parts with
the extended-real conventions, so infinite masses on zero-valued pairs
contribute nothing.

Simulation samples trajectories of a fixed horizon.  Stationary policies run
through the batch stepping kernel (compiled or numpy); arbitrary
history-dependent policy programs run through a plain Python loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Set, Union

import numpy as np

from . import simkernel
from .extreal import ExtReal, POS_INF, ext_combine, ext_margin, ext_sum
from .linsolve import solve_dense
from .model import (
    FiniteMdp,
    OccupationMeasure,
    Pair,
    State,
    StationaryPolicy,
    validate_policy,
)
from .reference import BaseMeasure
from .structure import InfiniteStructure
from .variables import FeasibleVariable, extract_policy, measure_value


@dataclass
class EvaluationResult:
    occupation: OccupationMeasure
    reward_value: ExtReal
    constraint_values: List[ExtReal]
    divergent_states: Set[State]


def policy_chain(m: FiniteMdp, policy: StationaryPolicy) -> Dict[State, Dict[State, Fraction]]:
    rows: Dict[State, Dict[State, Fraction]] = {}
    for x in m.states:
        row: Dict[State, Fraction] = {}
        for a, pa in policy.rows[x].items():
            if pa == 0:
                continue
            for y, pr in m.transition[(x, a)].items():
                if pr:
                    row[y] = row.get(y, Fraction(0)) + pa * pr
        rows[x] = row
    return rows


def _reachable(chain, sources) -> Set[State]:
    seen = set(sources)
    frontier = list(seen)
    while frontier:
        x = frontier.pop()
        for y, pr in chain[x].items():
            if pr > 0 and y not in seen:
                seen.add(y)
                frontier.append(y)
    return seen


def _strongly_connected_components(states, chain):
    """Iterative Tarjan over the positive-probability digraph."""
    index: Dict[State, int] = {}
    low: Dict[State, int] = {}
    on_stack: Set[State] = set()
    stack: List[State] = []
    components: List[List[State]] = []
    counter = [0]

    for root in states:
        if root in index:
            continue
        work = [(root, iter([y for y, pr in chain[root].items() if pr > 0]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            x, it = work[-1]
            advanced = False
            for y in it:
                if y not in index:
                    index[y] = low[y] = counter[0]
                    counter[0] += 1
                    stack.append(y)
                    on_stack.add(y)
                    work.append((y, iter([z for z, pr in chain[y].items() if pr > 0])))
                    advanced = True
                    break
                if y in on_stack:
                    low[x] = min(low[x], index[y])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[x])
            if low[x] == index[x]:
                comp = []
                while True:
                    y = stack.pop()
                    on_stack.discard(y)
                    comp.append(y)
                    if y == x:
                        break
                components.append(comp)
    return components


def divergent_states_of(m: FiniteMdp, policy: StationaryPolicy) -> Set[State]:
    """States with infinite expected visits: reachable closed classes."""
    chain = policy_chain(m, policy)
    reachable = _reachable(chain, [x for x, pr in m.initial.items() if pr > 0])
    divergent: Set[State] = set()
    for comp in _strongly_connected_components(m.states, chain):
        members = set(comp)
        closed = all(y in members for x in comp for y, pr in chain[x].items() if pr > 0)
        # A singleton without a self-loop is not a recurrent class.
        if len(comp) == 1:
            x = comp[0]
            if chain[x].get(x, Fraction(0)) == 0:
                closed = False
        if closed and members & reachable:
            divergent |= members
    return divergent


def occupation_of_policy(m: FiniteMdp, policy: StationaryPolicy, mode: str = "rational") -> OccupationMeasure:
    """Expected visits of every admissible pair, +inf on divergent ones.

    The finite part is the minimal solution of the balance equation restricted
    to the transient states, computed by a direct linear solve.
    """
    problems = validate_policy(m, policy)
    if problems:
        raise ValueError("invalid policy: " + "; ".join(problems))
    chain = policy_chain(m, policy)
    reachable = _reachable(chain, [x for x, pr in m.initial.items() if pr > 0])
    divergent = divergent_states_of(m, policy)
    transient = [x for x in m.states if x in reachable and x not in divergent]
    idx = {x: i for i, x in enumerate(transient)}
    n = len(transient)
    if n:
        one = Fraction(1)
        a = [[one if i == j else Fraction(0) for j in range(n)] for i in range(n)]
        for y in transient:
            for x, pr in chain[y].items():
                if x in idx and pr:
                    a[idx[x]][idx[y]] -= pr
        b = [m.initial_of(x) for x in transient]
        visits = solve_dense(a, b, mode=mode)
    else:
        visits = []

    mass: Dict[Pair, ExtReal] = {}
    for x in m.states:
        for act in m.admissible[x]:
            pa = policy.prob(x, act)
            if x in divergent and pa > 0:
                mass[(x, act)] = POS_INF
            elif x in idx and pa > 0:
                v = visits[idx[x]]
                mass[(x, act)] = ExtReal.finite(v * pa if mode == "rational" else float(v) * float(pa))
            else:
                mass[(x, act)] = ExtReal.finite(Fraction(0) if mode == "rational" else 0.0)
    return OccupationMeasure(mass)


def occupation_value(occ: OccupationMeasure, h: Dict[Pair, object]) -> ExtReal:
    """Evaluate h against an occupation measure (0 * inf = 0 per pair)."""
    pos: List[ExtReal] = []
    neg: List[ExtReal] = []
    for pair, mass in occ.mass.items():
        val = h.get(pair, 0)
        if val == 0:
            continue
        part = mass if mass.is_pos_inf else ExtReal.finite(mass.finite_value * abs(val))
        (pos if val > 0 else neg).append(part)
    return ext_combine(ext_sum(pos), ext_sum(neg))


def evaluate_policy(m: FiniteMdp, policy: StationaryPolicy, mode: str = "rational") -> EvaluationResult:
    occ = occupation_of_policy(m, policy, mode=mode)
    divergent = {pair[0] for pair, mass in occ.mass.items() if mass.is_pos_inf}
    return EvaluationResult(
        occupation=occ,
        reward_value=occupation_value(occ, m.reward),
        constraint_values=[occupation_value(occ, c.values) for c in m.constraints],
        divergent_states=divergent,
    )


def variable_from_policy(
    m: FiniteMdp, base: BaseMeasure, policy: StationaryPolicy
) -> FeasibleVariable:
    """Feasible variable whose induced measure equals the policy's occupation.

    The divergent states and their policy-supported pairs form the infinite
    structure (they always satisfy cover, feed and closure); finite visit
    masses become the finite part, and the policy row itself provides the
    per-state infinite weights.
    """
    occ = occupation_of_policy(m, policy, mode="rational")
    inf_pairs = frozenset(pair for pair, mass in occ.mass.items() if mass.is_pos_inf)
    inf_states = frozenset(pair[0] for pair in inf_pairs)
    finite_mass = {
        pair: mass.finite_value
        for pair, mass in occ.mass.items()
        if mass.is_finite and mass.finite_value != 0
    }
    weights = {
        (x, a): policy.prob(x, a) for (x, a) in inf_pairs
    }
    return FeasibleVariable(
        finite_mass=finite_mass,
        structure=InfiniteStructure(inf_states, inf_pairs),
        infinite_weights=weights,
    )


@dataclass
class DominanceReport:
    ok: bool
    margins: Dict[str, ExtReal]


def _ext_ge(a: ExtReal, b: ExtReal, tol) -> bool:
    if a.is_finite and b.is_finite:
        return a.finite_value >= b.finite_value - tol
    return a >= b


def check_dominance(m: FiniteMdp, v: FeasibleVariable, mode: str = "rational", tol=0) -> DominanceReport:
    """Check that the induced policy achieves at least the measure values.

    Compares the policy's total values J(h) against the variable's measure
    values for h = reward and every constraint; returns per-criterion margins
    (J - measure value, equal infinities counting as a tied zero margin).
    Exact in rational mode; ``tol`` loosens the float-mode comparison.
    """
    policy = extract_policy(m, v)
    result = evaluate_policy(m, policy, mode=mode)
    margins: Dict[str, ExtReal] = {}
    ok = True
    target = measure_value(v, m.reward)
    margins["reward"] = ext_margin(result.reward_value, target)
    ok &= _ext_ge(result.reward_value, target, tol)
    for c, achieved in zip(m.constraints, result.constraint_values):
        target = measure_value(v, c.values)
        margins[c.name] = ext_margin(achieved, target)
        ok &= _ext_ge(achieved, target, tol)
    return DominanceReport(ok=bool(ok), margins=margins)


# ---------------------------------------------------------------------------
# Simulation

PolicyProgram = Union[StationaryPolicy, Callable[[tuple], Dict[str, object]]]


@dataclass(frozen=True)
class SimulationEstimate:
    name: str
    mean: float
    half_width: float
    horizon: int
    truncation_bound: Optional[float]
    samples: int
    seed: int


@dataclass(frozen=True)
class SimulationReport:
    reward: SimulationEstimate
    constraints: List[SimulationEstimate]
    compiled_kernel: bool


def _policy_arrays(m: FiniteMdp, policy: StationaryPolicy):
    S = len(m.states)
    idx = m.state_index()
    A = max(len(m.admissible[x]) for x in m.states)
    policy_cum = np.ones((S, A))
    trans_cum = np.ones((S, A, S))
    K = 1 + len(m.constraints)
    values = np.zeros((K, S, A))
    for x in m.states:
        i = idx[x]
        acts = m.admissible[x]
        acc = 0.0
        for slot, a in enumerate(acts):
            acc += float(policy.prob(x, a))
            policy_cum[i, slot] = acc
            row = np.zeros(S)
            for y, pr in m.transition[(x, a)].items():
                row[idx[y]] = float(pr)
            trans_cum[i, slot] = np.cumsum(row)
            trans_cum[i, slot, -1] = 1.0
            values[0, i, slot] = float(m.reward[(x, a)])
            for k, c in enumerate(m.constraints):
                values[1 + k, i, slot] = float(c.values[(x, a)])
        policy_cum[i, len(acts) - 1] = 1.0
    return policy_cum, trans_cum, values


def _initial_states(m: FiniteMdp, rng, n: int):
    S = len(m.states)
    idx = m.state_index()
    nu = np.zeros(S)
    for x, pr in m.initial.items():
        nu[idx[x]] = float(pr)
    nu_cum = np.cumsum(nu)
    nu_cum[-1] = 1.0
    return np.searchsorted(nu_cum, rng.random(n), side="right").astype(np.int64)


def _tail_bound(m: FiniteMdp, policy: StationaryPolicy, horizon: int, h: Dict[Pair, object]) -> Optional[float]:
    """Exact expected total |h| collected after the horizon, or None if infinite."""
    chain = policy_chain(m, policy)
    reachable = _reachable(chain, [x for x, pr in m.initial.items() if pr > 0])
    divergent = divergent_states_of(m, policy)
    for x in divergent:
        for a in m.admissible[x]:
            if policy.prob(x, a) > 0 and h.get((x, a), 0) != 0:
                return None
    transient = [x for x in m.states if x in reachable and x not in divergent]
    idx = {x: i for i, x in enumerate(transient)}
    n = len(transient)
    if n == 0:
        return 0.0
    a = np.eye(n)
    for y in transient:
        for x, pr in chain[y].items():
            if x in idx:
                a[idx[y], idx[x]] -= float(pr)  # w(y) = habs(y) + sum_x P(x|y) w(x)
    habs = np.array(
        [
            sum(float(policy.prob(x, act)) * abs(float(h.get((x, act), 0))) for act in m.admissible[x])
            for x in transient
        ]
    )
    w = np.linalg.solve(a, habs)
    sidx = m.state_index()
    full_chain = np.zeros((len(m.states), len(m.states)))
    for x in m.states:
        for y, pr in chain[x].items():
            full_chain[sidx[x], sidx[y]] = float(pr)
    dist = np.zeros(len(m.states))
    for x, pr in m.initial.items():
        dist[sidx[x]] = float(pr)
    for _ in range(horizon):
        dist = dist @ full_chain
    return float(sum(dist[sidx[x]] * w[idx[x]] for x in transient))


def simulate_policy(
    m: FiniteMdp,
    policy: PolicyProgram,
    horizon: int,
    samples: int,
    seed: int,
) -> SimulationReport:
    """Estimate total values over a fixed horizon from independent trajectories.

    Deterministic given the seed.  For stationary policies the per-criterion
    truncation bound is the exact expected mass collected after the horizon
    (None when some visited pair would accumulate unboundedly).
    """
    if horizon < 1 or samples < 1:
        raise ValueError("horizon and samples must both be at least 1")
    K = 1 + len(m.constraints)
    rng = np.random.default_rng(seed)
    acc = np.zeros((K, samples))

    if isinstance(policy, StationaryPolicy):
        problems = validate_policy(m, policy)
        if problems:
            raise ValueError("invalid policy: " + "; ".join(problems))
        policy_cum, trans_cum, values = _policy_arrays(m, policy)
        states = _initial_states(m, rng, samples)
        step = simkernel.step_batch
        for _ in range(horizon):
            u_action = rng.random(samples)
            u_next = rng.random(samples)
            step(states, acc, u_action, u_next, policy_cum, trans_cum, values)
        bounds = [_tail_bound(m, policy, horizon, m.reward)] + [
            _tail_bound(m, policy, horizon, c.values) for c in m.constraints
        ]
    else:
        idx = m.state_index()
        states_list = m.states
        trans = {
            pair: (list(row.keys()), np.cumsum([float(p) for p in row.values()]))
            for pair, row in m.transition.items()
        }
        for j in range(samples):
            x = states_list[_initial_states(m, rng, 1)[0]]
            history: tuple = (x,)
            for _ in range(horizon):
                row = policy(history)
                acts = list(row.keys())
                cum = np.cumsum([float(p) for p in row.values()])
                cum[-1] = 1.0
                a = acts[int(np.searchsorted(cum, rng.random(), side="right"))]
                acc[0, j] += float(m.reward[(x, a)])
                for k, c in enumerate(m.constraints):
                    acc[1 + k, j] += float(c.values[(x, a)])
                targets, tcum = trans[(x, a)]
                tcum = tcum / tcum[-1]
                x = targets[int(np.searchsorted(tcum, rng.random(), side="right"))]
                history = history + (a, x)
        bounds = [None] * K

    def estimate(k: int, name: str) -> SimulationEstimate:
        mean = float(acc[k].mean())
        if samples > 1:
            half = 1.96 * float(acc[k].std(ddof=1)) / math.sqrt(samples)
        else:
            half = 0.0
        return SimulationEstimate(
            name=name,
            mean=mean,
            half_width=half,
            horizon=horizon,
            truncation_bound=bounds[k],
            samples=samples,
            seed=seed,
        )

    return SimulationReport(
        reward=estimate(0, "reward"),
        constraints=[estimate(1 + k, c.name) for k, c in enumerate(m.constraints)],
        compiled_kernel=simkernel.COMPILED,
    )
