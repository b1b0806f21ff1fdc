"""Finite encodings of feasible variables and their induced measures.

A feasible variable pairs a finite nonnegative mass per admissible pair with
an infinite-mass structure: the structure's pairs carry mass +inf (split per
state by strictly positive weights), everything else carries its finite mass.
The induced measure evaluates a signed pair function through positive and
negative parts with the 0 * inf = 0 absorption and the (+inf) - (+inf) = -inf
recombination.

The induced stationary policy normalizes the infinite weights where the
infinite marginal lives, the finite masses where those are positive, and
falls back to the model's designated action at zero-mass states so that
extraction is total and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List

from .extreal import ExtReal, POS_INF, ext_combine, ext_sum
from .model import FiniteMdp, Pair, State, StationaryPolicy
from .reference import BaseMeasure
from .structure import InfiniteStructure, structure_violations


@dataclass(frozen=True)
class FeasibleVariable:
    """Finite masses plus an infinite-mass structure with per-state weights."""

    finite_mass: Dict[Pair, Fraction]
    structure: InfiniteStructure
    infinite_weights: Dict[Pair, Fraction] = field(default_factory=dict)

    def mass_of(self, pair: Pair) -> ExtReal:
        if pair in self.structure.pairs:
            return POS_INF
        v = self.finite_mass.get(pair, Fraction(0))
        return ExtReal.finite(v)


def uniform_weights(s: InfiniteStructure) -> Dict[Pair, Fraction]:
    counts: Dict[State, int] = {}
    for (x, _a) in s.pairs:
        counts[x] = counts.get(x, 0) + 1
    return {(x, a): Fraction(1, counts[x]) for (x, a) in s.pairs}


def measure_value(v: FeasibleVariable, h: Dict[Pair, object]) -> ExtReal:
    """Evaluate the induced measure against a signed pair function.

    Contributions are per pair: finite mass times value, infinite mass times
    value with 0 * inf = 0; the positive and negative totals recombine with
    the (+inf) - (+inf) = -inf convention.
    """
    pos_terms: List[ExtReal] = []
    neg_terms: List[ExtReal] = []
    for pair, mass in v.finite_mass.items():
        if pair in v.structure.pairs:
            continue
        val = h.get(pair, 0)
        if val > 0:
            pos_terms.append(ExtReal.finite(mass * val))
        elif val < 0:
            neg_terms.append(ExtReal.finite(mass * (-val)))
    for pair in v.structure.pairs:
        val = h.get(pair, 0)
        if val > 0:
            pos_terms.append(POS_INF)
        elif val < 0:
            neg_terms.append(POS_INF)
    return ext_combine(ext_sum(pos_terms), ext_sum(neg_terms))


def reward_value(m: FiniteMdp, v: FeasibleVariable) -> ExtReal:
    return measure_value(v, m.reward)


def constraint_values(m: FiniteMdp, v: FeasibleVariable) -> List[ExtReal]:
    return [measure_value(v, c.values) for c in m.constraints]


def state_marginal(v: FeasibleVariable, x: State) -> ExtReal:
    if x in v.structure.states:
        return POS_INF
    total = Fraction(0)
    for (y, _a), mass in v.finite_mass.items():
        if y == x:
            total += mass
    return ExtReal.finite(total)


def extract_policy(m: FiniteMdp, v: FeasibleVariable) -> StationaryPolicy:
    """Induced stationary randomized policy, total on every state."""
    rows: Dict[State, Dict[str, Fraction]] = {}
    for x in m.states:
        if x in v.structure.states:
            row = {a: w for (y, a), w in v.infinite_weights.items() if y == x}
            total = sum(row.values())
            if total == 0:
                # Positive weights are part of the variable contract; fall
                # back to uniform over the structure pairs if none given.
                pairs_here = [a for (y, a) in v.structure.pairs if y == x]
                row = {a: Fraction(1, len(pairs_here)) for a in pairs_here}
                total = Fraction(1)
            rows[x] = {a: w / total for a, w in row.items()}
            continue
        masses = {
            a: v.finite_mass.get((x, a), Fraction(0))
            for a in m.admissible[x]
            if v.finite_mass.get((x, a), Fraction(0)) > 0
        }
        total = sum(masses.values(), Fraction(0))
        if total > 0:
            rows[x] = {a: w / total for a, w in masses.items()}
        else:
            rows[x] = {m.fallback_action[x]: Fraction(1)}
    return StationaryPolicy(rows)


def variable_violations(
    m: FiniteMdp, base: BaseMeasure, v: FeasibleVariable
) -> List[str]:
    """Feasibility audit: support, structure, weights, and balance residuals."""
    problems: List[str] = []
    problems.extend(structure_violations(m, v.structure, base.support))
    pair_set = set(m.pairs())
    for pair, mass in v.finite_mass.items():
        if pair not in pair_set:
            problems.append(f"finite mass on inadmissible pair {pair!r}")
        elif mass < 0:
            problems.append(f"negative finite mass on {pair!r}")
        elif mass > 0 and pair[0] not in base.support:
            problems.append(f"finite mass at {pair[0]!r} outside the base support")
    per_state: Dict[State, Fraction] = {}
    for (x, a), w in v.infinite_weights.items():
        if (x, a) not in v.structure.pairs:
            problems.append(f"infinite weight on pair ({x!r},{a!r}) outside the structure")
            continue
        if w <= 0:
            problems.append(f"non-positive infinite weight on ({x!r},{a!r})")
        per_state[x] = per_state.get(x, Fraction(0)) + w
    for x in v.structure.states:
        if v.infinite_weights and per_state.get(x, Fraction(0)) != 1:
            problems.append(f"infinite weights at state {x!r} sum to {per_state.get(x, 0)}, not 1")
    residuals = balance_residuals(m, base, v)
    for x, r in residuals.items():
        if r != 0:
            problems.append(f"balance residual {r} at state {x!r}")
    return problems


def balance_residuals(m: FiniteMdp, base: BaseMeasure, v: FeasibleVariable) -> Dict[State, Fraction]:
    """Balance-equation residuals at finite-marginal support states.

    For x outside the infinite structure:  sum_a mass(x,a) - nu(x)
    - sum_{(y,b)} Q(x|y,b) mass(y,b).  Structure pairs must not reach such x
    (that would be an infinite inflow); a violation shows up as +inf marker
    via :func:`variable_violations`' structure checks, so only finite masses
    enter here.
    """
    residuals: Dict[State, Fraction] = {}
    for x in base.support:
        if x in v.structure.states:
            continue
        total = Fraction(0)
        for a in m.admissible[x]:
            if (x, a) not in v.structure.pairs:
                total += v.finite_mass.get((x, a), Fraction(0))
        inflow = Fraction(0)
        for (y, b), mass in v.finite_mass.items():
            if (y, b) in v.structure.pairs or mass == 0:
                continue
            pr = m.transition[(y, b)].get(x, Fraction(0))
            if pr:
                inflow += pr * mass
        residuals[x] = total - m.initial_of(x) - inflow
    return residuals


def combine_variables(
    v1: FeasibleVariable, v2: FeasibleVariable, alpha: Fraction
) -> FeasibleVariable:
    """Convex combination; the feasible set is convex under union structures."""
    if alpha == 1:
        return v1
    if alpha == 0:
        return v2
    states = v1.structure.states | v2.structure.states
    pairs = v1.structure.pairs | v2.structure.pairs
    s = InfiniteStructure(states, pairs)
    mass: Dict[Pair, Fraction] = {}
    for pair, w in v1.finite_mass.items():
        mass[pair] = mass.get(pair, Fraction(0)) + alpha * w
    for pair, w in v2.finite_mass.items():
        mass[pair] = mass.get(pair, Fraction(0)) + (1 - alpha) * w
    weights: Dict[Pair, Fraction] = {}
    for pair in pairs:
        w = alpha * v1.infinite_weights.get(pair, Fraction(0)) + (1 - alpha) * v2.infinite_weights.get(
            pair, Fraction(0)
        )
        if w > 0:
            weights[pair] = w
    # Renormalize per structure state (any positive choice induces the same measure).
    totals: Dict[State, Fraction] = {}
    for (x, _a), w in weights.items():
        totals[x] = totals.get(x, Fraction(0)) + w
    weights = {(x, a): w / totals[x] for (x, a), w in weights.items()}
    return FeasibleVariable(finite_mass=mass, structure=s, infinite_weights=weights)
