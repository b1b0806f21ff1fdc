"""Finite constrained-MDP model: types, validation, and a JSON file format.

A model is the tuple of finite tables (states, actions, admissible action
sets, transition rows, one-step reward, one-step constraint functions with
their limits, initial distribution) plus a deterministic fallback action per
state.  All numeric data is held as exact :class:`fractions.Fraction`; float
computations convert at the boundary.

State ids may be ints or strings.  In the JSON file, map keys are the string
form of the id; the ``states`` list preserves the original type.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

from .extreal import ExtReal, fmt_scalar

State = Union[int, str]
Action = str
Pair = Tuple[State, Action]


class ModelFormatError(ValueError):
    """Malformed model document; ``location`` points at the offending field."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ModelValidationError(ValueError):
    """A structurally parseable model that violates invariants."""

    def __init__(self, violations: List[str]):
        self.violations = violations
        super().__init__("invalid model:\n" + "\n".join(f"  - {v}" for v in violations))


@dataclass(frozen=True)
class Constraint:
    name: str
    values: Dict[Pair, Fraction]
    limit: Fraction


@dataclass(frozen=True)
class FiniteMdp:
    """Immutable finite constrained MDP.  Treat all members as read-only."""

    states: List[State]
    actions: List[Action]
    admissible: Dict[State, List[Action]]
    transition: Dict[Pair, Dict[State, Fraction]]
    reward: Dict[Pair, Fraction]
    constraints: List[Constraint]
    initial: Dict[State, Fraction]
    fallback_action: Dict[State, Action]

    def pairs(self) -> List[Pair]:
        return [(x, a) for x in self.states for a in self.admissible.get(x, ())]

    def state_index(self) -> Dict[State, int]:
        return {x: i for i, x in enumerate(self.states)}

    def initial_of(self, x: State) -> Fraction:
        return self.initial.get(x, Fraction(0))

    def prob(self, x: State, a: Action, y: State) -> Fraction:
        return self.transition[(x, a)].get(y, Fraction(0))


@dataclass(frozen=True)
class StationaryPolicy:
    """Stationary randomized policy: one probability row per state."""

    rows: Dict[State, Dict[Action, Fraction]]

    def prob(self, x: State, a: Action) -> Fraction:
        return self.rows[x].get(a, Fraction(0))


@dataclass(frozen=True)
class OccupationMeasure:
    """Expected visit counts per admissible pair; +inf entries permitted."""

    mass: Dict[Pair, ExtReal]

    def of(self, pair: Pair) -> ExtReal:
        from .extreal import ZERO

        return self.mass.get(pair, ZERO)


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations


def deterministic_policy(m: FiniteMdp, choice: Dict[State, Action]) -> StationaryPolicy:
    return StationaryPolicy({x: {choice[x]: Fraction(1)} for x in m.states})


def validate_policy(m: FiniteMdp, policy: StationaryPolicy) -> List[str]:
    problems = []
    for x in m.states:
        row = policy.rows.get(x)
        if row is None:
            problems.append(f"policy missing row for state {x!r}")
            continue
        allowed = set(m.admissible.get(x, ()))
        for a, pr in row.items():
            if a not in allowed:
                problems.append(f"policy at state {x!r} puts mass on inadmissible action {a!r}")
            if pr < 0:
                problems.append(f"policy at state {x!r} has negative probability for {a!r}")
        total = sum(row.values())
        # Exact rows must sum to exactly 1; float rows (from a float-mode
        # solve) only up to roundoff.
        exact_row = all(not isinstance(pr, float) for pr in row.values())
        bad = total != 1 if exact_row else abs(total - 1) > 1e-9
        if bad:
            problems.append(f"policy row at state {x!r} sums to {total}, not 1")
    return problems


# ---------------------------------------------------------------------------
# Validation

_WS_NOTE = (
    "finite model: weak/strong continuity-compactness conditions hold trivially "
    "(finite state and action sets)"
)


def validate_model(m: FiniteMdp) -> ValidationReport:
    """List every violated invariant; an empty list means the model is valid."""
    rep = ValidationReport(notes=[_WS_NOTE])
    v = rep.violations

    if not m.states:
        v.append("states list is empty")
    if len(set(m.states)) != len(m.states):
        v.append("duplicate state ids")
    if len({str(x) for x in m.states}) != len(m.states):
        v.append("state ids collide in string form (file keys would be ambiguous)")
    if len(set(m.actions)) != len(m.actions):
        v.append("duplicate action ids")

    states = set(m.states)
    actions = set(m.actions)
    pairs = []
    for x in m.states:
        adm = m.admissible.get(x)
        if not adm:
            v.append(f"admissible[{x!r}] is missing or empty")
            continue
        if len(set(adm)) != len(adm):
            v.append(f"admissible[{x!r}] has duplicate actions")
        for a in adm:
            if a not in actions:
                v.append(f"admissible[{x!r}] lists unknown action {a!r}")
            pairs.append((x, a))
    for x in m.admissible:
        if x not in states:
            v.append(f"admissible defined for unknown state {x!r}")
    pair_set = set(pairs)

    def check_pair_table(table, label):
        for pair in pair_set:
            if pair not in table:
                v.append(f"{label} missing for pair {pair!r}")
        for pair in table:
            if pair not in pair_set:
                v.append(f"{label} defined for inadmissible pair {pair!r}")

    check_pair_table(m.transition, "transition row")
    check_pair_table(m.reward, "reward")
    for c in m.constraints:
        check_pair_table(c.values, f"constraint {c.name!r} value")

    for pair, row in m.transition.items():
        total = Fraction(0)
        for y, pr in row.items():
            if y not in states:
                v.append(f"transition row {pair!r} targets unknown state {y!r}")
            if pr < 0:
                v.append(f"transition row {pair!r} has negative probability at {y!r}")
            total += pr
        if total != 1:
            v.append(f"transition row {pair!r} sums to {fmt_scalar(total)}, not 1")

    total = Fraction(0)
    for x, pr in m.initial.items():
        if x not in states:
            v.append(f"initial distribution puts mass on unknown state {x!r}")
        if pr < 0:
            v.append(f"initial probability of {x!r} is negative")
        total += pr
    if total != 1:
        v.append(f"initial distribution sums to {fmt_scalar(total)}, not 1")

    for x in m.states:
        fb = m.fallback_action.get(x)
        if fb is None:
            v.append(f"fallback action missing for state {x!r}")
        elif fb not in m.admissible.get(x, ()):
            v.append(f"fallback action {fb!r} at state {x!r} is not admissible")

    return rep


def require_valid(m: FiniteMdp) -> FiniteMdp:
    rep = validate_model(m)
    if not rep.is_valid:
        raise ModelValidationError(rep.violations)
    return m


# ---------------------------------------------------------------------------
# File format

_RATIONAL, _DECIMAL = "rational", "decimal"


class _ValueParser:
    """Parses value strings, tracking rational vs decimal spellings."""

    def __init__(self):
        self.kinds = set()

    def __call__(self, raw, where: str) -> Fraction:
        if isinstance(raw, bool):
            raise ModelFormatError("expected a number, got a boolean", where)
        if isinstance(raw, int):
            self.kinds.add(_RATIONAL)
            return Fraction(raw)
        if isinstance(raw, float):  # only if a caller bypassed parse_float=str
            raw = repr(raw)
        if not isinstance(raw, str):
            raise ModelFormatError(f"expected a number string, got {type(raw).__name__}", where)
        s = raw.strip()
        self.kinds.add(_DECIMAL if ("." in s or "e" in s or "E" in s) else _RATIONAL)
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelFormatError(f"cannot parse value {raw!r}: {exc}", where) from None


def _state_lookup(states: List[State]) -> Dict[str, State]:
    return {str(x): x for x in states}


def parse_model_document(text: str, mode: str = "rational"):
    """Parse a model document.

    Returns ``(model, kernel_rows_or_None)`` where the optional reference
    kernel is returned as plain nested dicts (state -> state -> Fraction).
    Raises :class:`ModelFormatError` on malformed input and
    :class:`ModelValidationError` listing every violated invariant otherwise.
    """
    if mode not in ("rational", "float"):
        raise ValueError(f"unknown mode {mode!r}")
    try:
        doc = json.loads(text, parse_float=str)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("top level must be a JSON object")

    val = _ValueParser()

    def need(key, typ, where="document"):
        if key not in doc:
            raise ModelFormatError(f"missing required field {key!r}", where)
        got = doc[key]
        if not isinstance(got, typ):
            raise ModelFormatError(f"field {key!r} must be {typ.__name__}", where)
        return got

    states_raw = need("states", list)
    states: List[State] = []
    for i, s in enumerate(states_raw):
        if isinstance(s, bool) or not isinstance(s, (int, str)):
            raise ModelFormatError("state ids must be ints or strings", f"states[{i}]")
        states.append(s)
    lookup = _state_lookup(states)

    def resolve_state(key, where) -> State:
        if key in lookup:
            return lookup[key]
        raise ModelFormatError(f"unknown state {key!r}", where)

    actions_raw = need("actions", list)
    actions: List[Action] = []
    for i, a in enumerate(actions_raw):
        if not isinstance(a, str):
            raise ModelFormatError("action ids must be strings", f"actions[{i}]")
        actions.append(a)

    admissible: Dict[State, List[Action]] = {}
    for key, acts in need("admissible", dict).items():
        x = resolve_state(key, f"admissible[{key}]")
        if not isinstance(acts, list):
            raise ModelFormatError("admissible entry must be a list", f"admissible[{key}]")
        admissible[x] = list(acts)

    transition: Dict[Pair, Dict[State, Fraction]] = {}
    for i, rec in enumerate(need("transitions", list)):
        where = f"transitions[{i}]"
        if not isinstance(rec, dict):
            raise ModelFormatError("transition record must be an object", where)
        for fieldname in ("from", "action", "to", "prob"):
            if fieldname not in rec:
                raise ModelFormatError(f"missing {fieldname!r}", where)
        x = resolve_state(str(rec["from"]), where)
        y = resolve_state(str(rec["to"]), where)
        a = rec["action"]
        pr = val(rec["prob"], f"{where}.prob")
        row = transition.setdefault((x, a), {})
        if y in row:
            raise ModelFormatError(f"duplicate transition to {y!r}", where)
        row[y] = pr

    reward: Dict[Pair, Fraction] = {}
    for key, by_action in need("reward", dict).items():
        x = resolve_state(key, f"reward[{key}]")
        if not isinstance(by_action, dict):
            raise ModelFormatError("reward entry must map actions to values", f"reward[{key}]")
        for a, raw in by_action.items():
            reward[(x, a)] = val(raw, f"reward[{key}][{a}]")

    constraints: List[Constraint] = []
    for i, rec in enumerate(doc.get("constraints", [])):
        where = f"constraints[{i}]"
        if not isinstance(rec, dict) or "values" not in rec or "limit" not in rec:
            raise ModelFormatError("constraint needs 'name', 'values' and 'limit'", where)
        values: Dict[Pair, Fraction] = {}
        for key, by_action in rec["values"].items():
            x = resolve_state(key, f"{where}.values[{key}]")
            for a, raw in by_action.items():
                values[(x, a)] = val(raw, f"{where}.values[{key}][{a}]")
        constraints.append(
            Constraint(
                name=str(rec.get("name", f"c{i + 1}")),
                values=values,
                limit=val(rec["limit"], f"{where}.limit"),
            )
        )

    initial: Dict[State, Fraction] = {}
    for key, raw in need("initial", dict).items():
        x = resolve_state(key, f"initial[{key}]")
        initial[x] = val(raw, f"initial[{key}]")

    fallback: Dict[State, Action] = {}
    if "fallback" in doc:
        for key, a in doc["fallback"].items():
            fallback[resolve_state(key, f"fallback[{key}]")] = a
    for x in states:
        if x not in fallback and admissible.get(x):
            fallback[x] = admissible[x][0]

    kernel_rows = None
    if "reference_kernel" in doc:
        kernel_rows = {}
        for key, row_raw in doc["reference_kernel"].items():
            x = resolve_state(key, f"reference_kernel[{key}]")
            row = {}
            for key2, raw in row_raw.items():
                y = resolve_state(key2, f"reference_kernel[{key}][{key2}]")
                row[y] = val(raw, f"reference_kernel[{key}][{key2}]")
            kernel_rows[x] = row

    if mode == "rational" and val.kinds == {_RATIONAL, _DECIMAL}:
        raise ModelFormatError(
            "file mixes exact rational strings and decimal floats; "
            "rational mode requires a homogeneous file"
        )

    m = FiniteMdp(
        states=states,
        actions=actions,
        admissible=admissible,
        transition=transition,
        reward=reward,
        constraints=constraints,
        initial=initial,
        fallback_action=fallback,
    )
    require_valid(m)
    return m, kernel_rows


def load_model(text: str, mode: str = "rational") -> FiniteMdp:
    """Parse and validate a model document, discarding any reference kernel."""
    return parse_model_document(text, mode)[0]


def serialize_model(m: FiniteMdp, kernel_rows=None) -> str:
    """Canonical JSON form; deterministic byte-for-byte for a given model."""
    doc = {
        "states": m.states,
        "actions": m.actions,
        "admissible": {str(x): list(m.admissible[x]) for x in m.states},
        "transitions": [
            {"from": str(x), "action": a, "to": str(y), "prob": fmt_scalar(m.transition[(x, a)][y])}
            for x in m.states
            for a in m.admissible[x]
            for y in m.states
            if y in m.transition[(x, a)]
        ],
        "reward": {
            str(x): {a: fmt_scalar(m.reward[(x, a)]) for a in m.admissible[x]} for x in m.states
        },
        "constraints": [
            {
                "name": c.name,
                "values": {
                    str(x): {a: fmt_scalar(c.values[(x, a)]) for a in m.admissible[x]}
                    for x in m.states
                },
                "limit": fmt_scalar(c.limit),
            }
            for c in m.constraints
        ],
        "initial": {str(x): fmt_scalar(pr) for x, pr in sorted(m.initial.items(), key=lambda kv: str(kv[0])) if pr != 0},
        "fallback": {str(x): m.fallback_action[x] for x in m.states},
    }
    if kernel_rows is not None:
        doc["reference_kernel"] = {
            str(x): {str(y): fmt_scalar(pr) for y, pr in row.items() if pr != 0}
            for x, row in ((x, kernel_rows[x]) for x in m.states if x in kernel_rows)
        }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Generators

HALF = Fraction(1, 2)


def build_example_model(
    N: int,
    theta1: Fraction,
    include_paper_p: bool = False,
    include_negative: int = 0,
) -> Tuple[FiniteMdp, Optional[Dict[State, Dict[State, Fraction]]]]:
    """Truncated birth-chain model with an extra escape action at state 1.

    States are 1..N plus an absorbing terminal state ``delta``.  From any
    chain state the single action moves up one or two steps with probability
    1/2 each; flows that would leave 1..N are redirected to ``delta``.  State
    1 additionally offers action "b" jumping straight to ``delta``.  Rewards
    decay geometrically along the chain; the single constraint function
    alternates in sign.  ``include_negative`` adds states -M..0 walking
    deterministically up to 1 (they receive no initial mass, so their base
    measure vanishes; useful to exercise support pruning).

    Returns the model and, when ``include_paper_p`` is set, a hand-specified
    reference kernel whose row at state 1 spreads mass 1/3 over {2, 3, delta}.
    """
    if N < 3:
        raise ValueError("N must be at least 3")
    delta: State = "delta"
    first = -include_negative if include_negative > 0 else 1
    chain = list(range(first, N + 1))
    states: List[State] = chain + [delta]

    admissible: Dict[State, List[Action]] = {x: ["a"] for x in states}
    admissible[1] = ["a", "b"]

    def chain_row(x: int) -> Dict[State, Fraction]:
        if x <= 0:
            return {x + 1: Fraction(1)}
        row: Dict[State, Fraction] = {}
        for step in (1, 2):
            target: State = x + step if x + step <= N else delta
            row[target] = row.get(target, Fraction(0)) + HALF
        return row

    transition: Dict[Pair, Dict[State, Fraction]] = {(x, "a"): chain_row(x) for x in chain}
    transition[(1, "b")] = {delta: Fraction(1)}
    transition[(delta, "a")] = {delta: Fraction(1)}

    reward: Dict[Pair, Fraction] = {(delta, "a"): Fraction(0)}
    cvals: Dict[Pair, Fraction] = {(delta, "a"): Fraction(0)}
    for x in chain:
        if x == 1:
            reward[(1, "a")] = HALF
            reward[(1, "b")] = HALF
            cvals[(1, "a")] = Fraction(-1, 18)
            cvals[(1, "b")] = Fraction(1)
        else:
            reward[(x, "a")] = HALF ** abs(x)
            cvals[(x, "a")] = (-HALF) ** abs(x)

    m = FiniteMdp(
        states=states,
        actions=["a", "b"],
        admissible=admissible,
        transition=transition,
        reward=reward,
        constraints=[Constraint("c1", cvals, Fraction(theta1))],
        initial={1: HALF, delta: HALF},
        fallback_action={x: admissible[x][0] for x in states},
    )

    kernel = None
    if include_paper_p:
        kernel = {x: dict(transition[(x, "a")]) for x in states if x != 1}
        kernel[1] = {2: Fraction(1, 3), 3: Fraction(1, 3), delta: Fraction(1, 3)}
    return m, kernel


def build_phantom_demo() -> FiniteMdp:
    """Three-state model whose naive balance program has a spurious ray.

    The start state ``s`` is absorbing with zero reward and carries all the
    initial mass.  A two-cycle u <-> v, unreachable from ``s``, pays reward 1
    at ``u``; the balance equations alone admit the unbounded family
    m(u) = m(v) = t, but no policy ever visits the cycle.
    """
    one = Fraction(1)
    states: List[State] = ["s", "u", "v"]
    transition = {
        ("s", "a"): {"s": one},
        ("u", "a"): {"v": one},
        ("v", "a"): {"u": one},
    }
    reward = {("s", "a"): Fraction(0), ("u", "a"): one, ("v", "a"): Fraction(0)}
    return FiniteMdp(
        states=states,
        actions=["a"],
        admissible={x: ["a"] for x in states},
        transition=transition,
        reward=reward,
        constraints=[],
        initial={"s": one},
        fallback_action={x: "a" for x in states},
    )
