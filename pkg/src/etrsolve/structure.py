"""Structures of states and pairs that can sustain infinite occupation mass.

A pair set C over a state set I can carry infinite mass consistently with the
balance equation exactly when three local conditions hold:

  cover   : every state of I supports at least one pair of C,
  feed    : every state of I receives positive transition probability from
            some pair of C (infinite marginals must be fed each step),
  closure : every pair of C sends all its transition mass into I.

The functions here compute the greatest such structure by pruning, either
over all admissible pairs (maximal sustainable structure) or restricted to
pairs whose reward and constraint values are exactly zero (the structure the
solver uses: only value-free pairs may carry infinite mass at a finite-value
optimum).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, FrozenSet, Iterable, List

from .model import FiniteMdp, Pair, State


@dataclass(frozen=True)
class InfiniteStructure:
    states: FrozenSet[State]
    pairs: FrozenSet[Pair]

    @property
    def is_empty(self) -> bool:
        return not self.states

    def covers(self, x: State) -> bool:
        return any(p[0] == x for p in self.pairs)


def _prune(m: FiniteMdp, supp: FrozenSet[State], pair_ok: Callable[[Pair], bool]) -> InfiniteStructure:
    states = set(supp)
    pairs = {
        (x, a)
        for x in states
        for a in m.admissible[x]
        if pair_ok((x, a)) and all(y in states for y, pr in m.transition[(x, a)].items() if pr > 0)
    }
    while True:
        feeders = set()
        for (y, b) in pairs:
            for x, pr in m.transition[(y, b)].items():
                if pr > 0:
                    feeders.add(x)
        covered = {x for (x, _a) in pairs}
        keep = {x for x in states if x in covered and x in feeders}
        new_pairs = {
            (x, a)
            for (x, a) in pairs
            if x in keep and all(y in keep for y, pr in m.transition[(x, a)].items() if pr > 0)
        }
        if keep == states and new_pairs == pairs:
            return InfiniteStructure(frozenset(states), frozenset(pairs))
        states, pairs = keep, new_pairs


def max_sustainable_structure(m: FiniteMdp, supp_p: Iterable[State]) -> InfiniteStructure:
    """Greatest structure over supp_p, ignoring reward/constraint values."""
    return _prune(m, frozenset(supp_p), lambda pair: True)


def zero_value_structure(m: FiniteMdp, supp_p: Iterable[State]) -> InfiniteStructure:
    """Greatest structure whose pairs have reward 0 and every constraint 0."""

    def zero_valued(pair: Pair) -> bool:
        if m.reward[pair] != 0:
            return False
        return all(c.values[pair] == 0 for c in m.constraints)

    return _prune(m, frozenset(supp_p), zero_valued)


def structure_violations(m: FiniteMdp, s: InfiniteStructure, supp_p: Iterable[State]) -> List[str]:
    """Check cover, feed, closure and support containment; empty list = valid."""
    problems = []
    supp = set(supp_p)
    for x in s.states:
        if x not in supp:
            problems.append(f"state {x!r} outside the base-measure support")
        if not any(p[0] == x for p in s.pairs):
            problems.append(f"cover fails at state {x!r}")
        fed = any(
            m.transition[(y, b)].get(x, 0) > 0 for (y, b) in s.pairs
        )
        if not fed:
            problems.append(f"feed fails at state {x!r}")
    for (y, b) in s.pairs:
        if y not in s.states:
            problems.append(f"pair ({y!r},{b!r}) at a state outside the structure")
        for x, pr in m.transition[(y, b)].items():
            if pr > 0 and x not in s.states:
                problems.append(f"closure fails: ({y!r},{b!r}) reaches {x!r} outside the structure")
    return problems
