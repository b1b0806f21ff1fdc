"""Dominating reference kernel and the base probability measure it induces.

Every transition row of the model must be absolutely continuous with respect
to the reference kernel's row at the same state; on finite models this is the
exact support inclusion supp Q(.|x,a) <= supp P(.|x).  The base measure is
the geometric resolvent p = sum_k 2^{-(k+1)} nu P^k, computed in closed form
as the unique solution of p = nu/2 + (1/2) p P.

Occupation-measure marginals of every policy live inside supp p; the support
analysis here is what shrinks the feasible-variable program below the naive
balance-equation program.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional

from .linsolve import solve_dense
from .model import FiniteMdp, State

KernelRows = Dict[State, Dict[State, Fraction]]


class DominationError(ValueError):
    """Reference kernel fails to dominate some transition row."""


@dataclass(frozen=True)
class ReferenceKernel:
    rows: KernelRows

    def prob(self, x: State, y: State) -> Fraction:
        return self.rows[x].get(y, Fraction(0))


@dataclass(frozen=True)
class BaseMeasure:
    """Base probability vector; values are Fractions (rational mode) or floats."""

    p: Dict[State, object]
    support: FrozenSet[State]

    def of(self, x: State):
        return self.p.get(x, Fraction(0))


def _dyadic_weights(k: int) -> List[Fraction]:
    # 2^-1, 2^-2, ... renormalized to sum to one over the finite action list.
    raw = [Fraction(1, 2 ** (i + 1)) for i in range(k)]
    total = sum(raw)
    return [w / total for w in raw]


def construct_reference_kernel(
    m: FiniteMdp,
    weights: str = "uniform",
    user_rows: Optional[KernelRows] = None,
) -> ReferenceKernel:
    """Build or validate a kernel dominating every transition row.

    With ``weights="uniform"`` the row at x is the uniform mixture of the
    admissible transition rows; ``"dyadic"`` mixes with renormalized weights
    2^-k in declaration order.  Any strictly positive mixture dominates.  A
    user-supplied kernel is validated instead of constructed.
    """
    if user_rows is not None:
        for x in m.states:
            if x not in user_rows:
                raise DominationError(f"user kernel has no row for state {x!r}")
            row = user_rows[x]
            total = sum(row.values())
            if total != 1:
                raise DominationError(f"user kernel row at {x!r} sums to {total}, not 1")
            if any(pr < 0 for pr in row.values()):
                raise DominationError(f"user kernel row at {x!r} has a negative entry")
            for y in row:
                if y not in set(m.states):
                    raise DominationError(f"user kernel row at {x!r} targets unknown state {y!r}")
        for x in m.states:
            for a in m.admissible[x]:
                for y, pr in m.transition[(x, a)].items():
                    if pr > 0 and user_rows[x].get(y, 0) == 0:
                        raise DominationError(
                            f"domination fails: Q({y!r}|{x!r},{a!r}) = {pr} > 0 "
                            f"but P({y!r}|{x!r}) = 0"
                        )
        return ReferenceKernel({x: dict(user_rows[x]) for x in m.states})

    if weights not in ("uniform", "dyadic"):
        raise ValueError(f"unknown weight rule {weights!r}")
    rows: KernelRows = {}
    for x in m.states:
        acts = m.admissible[x]
        ws = (
            [Fraction(1, len(acts))] * len(acts)
            if weights == "uniform"
            else _dyadic_weights(len(acts))
        )
        row: Dict[State, Fraction] = {}
        for w, a in zip(ws, acts):
            for y, pr in m.transition[(x, a)].items():
                if pr > 0:
                    row[y] = row.get(y, Fraction(0)) + w * pr
        rows[x] = row
    return ReferenceKernel(rows)


def compute_base_measure(m: FiniteMdp, kernel: ReferenceKernel, mode: str = "rational") -> BaseMeasure:
    """Solve p = nu/2 + (1/2) p P (the resolvent series has ratio 1/2).

    The support is determined combinatorially (states reachable from supp nu
    along kernel support edges): p(x) > 0 holds exactly for reachable x, so
    the support is exact in float mode too.
    """
    states = m.states
    n = len(states)
    idx = m.state_index()
    one, half = Fraction(1), Fraction(1, 2)
    # (I - P^T / 2) p = nu / 2, solved columnwise over states.
    a = [[one if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    for y in states:
        for x, pr in kernel.rows[y].items():
            a[idx[x]][idx[y]] -= half * pr
    b = [half * m.initial_of(x) for x in states]
    sol = solve_dense(a, b, mode=mode)
    p = {x: sol[idx[x]] for x in states}

    reachable = {x for x, pr in m.initial.items() if pr > 0}
    frontier = list(reachable)
    while frontier:
        y = frontier.pop()
        for x, pr in kernel.rows[y].items():
            if pr > 0 and x not in reachable:
                reachable.add(x)
                frontier.append(x)
    if mode == "rational":
        assert sum(p.values()) == 1
        assert reachable == {x for x in states if p[x] > 0}
    return BaseMeasure(p=p, support=frozenset(reachable))


@dataclass
class ClosureReport:
    violations: List[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_support_closure(m: FiniteMdp, base: BaseMeasure) -> ClosureReport:
    """Verify supp nu <= supp p and that supp p is closed under transitions.

    A nonempty violation list signals a domination bug upstream, never a
    property of a valid kernel.
    """
    violations = []
    for x, pr in m.initial.items():
        if pr > 0 and x not in base.support:
            violations.append(f"initial state {x!r} carries mass but p({x!r}) = 0")
    for y in base.support:
        for a in m.admissible[y]:
            for x, pr in m.transition[(y, a)].items():
                if pr > 0 and x not in base.support:
                    violations.append(
                        f"support not closed: p({y!r}) > 0, Q({x!r}|{y!r},{a!r}) > 0, p({x!r}) = 0"
                    )
    return ClosureReport(violations)
