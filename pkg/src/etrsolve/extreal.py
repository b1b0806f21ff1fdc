"""Extended-real arithmetic for total-reward values.

Total-reward criteria evaluate signed functions against measures that may put
infinite mass on some state-action pairs.  Every evaluation is split into a
nonnegative positive part and a nonnegative negative part and recombined with
:func:`ext_combine`, whose convention is (+inf) - (+inf) = -inf.  Products of
a value with an infinite mass absorb zero: 0 * inf = 0.

NaN-like states are unrepresentable: the only ways to build an ``ExtReal``
are finite values, the two infinity singletons, and the total operations
below.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Scalar = Union[Fraction, int, float]

_NEG, _FIN, _POS = -1, 0, 1


@dataclass(frozen=True)
class ExtReal:
    """An element of the extended real line: -inf, a finite value, or +inf."""

    kind: int
    finite_value: Scalar = 0

    @staticmethod
    def finite(value: Scalar) -> "ExtReal":
        if isinstance(value, float) and (value != value or value in (float("inf"), float("-inf"))):
            raise ValueError("finite ExtReal requires a finite float")
        return ExtReal(_FIN, value)

    @property
    def is_finite(self) -> bool:
        return self.kind == _FIN

    @property
    def is_pos_inf(self) -> bool:
        return self.kind == _POS

    @property
    def is_neg_inf(self) -> bool:
        return self.kind == _NEG

    @property
    def value(self) -> Scalar:
        if self.kind != _FIN:
            raise ValueError("infinite ExtReal has no finite value")
        return self.finite_value

    def __add__(self, other: "ExtReal") -> "ExtReal":
        """Sum, defined only when the infinities do not clash."""
        if self.kind == _FIN and other.kind == _FIN:
            return ExtReal(_FIN, self.finite_value + other.finite_value)
        if self.kind == -other.kind and self.kind != _FIN:
            raise ValueError("inf + (-inf) is undefined; combine parts with ext_combine")
        return self if self.kind != _FIN else other

    def scale(self, h: Scalar) -> "ExtReal":
        """Multiply by a finite scalar with the 0 * inf = 0 absorption."""
        if self.kind == _FIN:
            return ExtReal(_FIN, self.finite_value * h)
        if h == 0:
            return ExtReal(_FIN, 0 * h)
        return ExtReal(self.kind if h > 0 else -self.kind)

    def _order_key(self):
        return (self.kind, self.finite_value if self.kind == _FIN else 0)

    def __lt__(self, other: "ExtReal") -> bool:
        if self.kind != other.kind:
            return self.kind < other.kind
        return self.kind == _FIN and self.finite_value < other.finite_value

    def __le__(self, other: "ExtReal") -> bool:
        return self < other or self == other

    def __gt__(self, other: "ExtReal") -> bool:
        return other < self

    def __ge__(self, other: "ExtReal") -> bool:
        return other <= self

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExtReal):
            return NotImplemented
        if self.kind != other.kind:
            return False
        return self.kind != _FIN or self.finite_value == other.finite_value

    def __hash__(self):
        return hash(self._order_key())

    def __repr__(self) -> str:
        if self.kind == _POS:
            return "ExtReal(+inf)"
        if self.kind == _NEG:
            return "ExtReal(-inf)"
        return f"ExtReal({self.finite_value!r})"


POS_INF = ExtReal(_POS)
NEG_INF = ExtReal(_NEG)
ZERO = ExtReal.finite(Fraction(0))


def ext_combine(pos: ExtReal, neg: ExtReal) -> ExtReal:
    """Recombine a positive and a negative part: pos - neg.

    Both arguments must be nonnegative.  When both are +inf the result is
    -inf; this is the convention that makes total-reward evaluations total.
    """
    for part in (pos, neg):
        if part.is_neg_inf or (part.is_finite and part.finite_value < 0):
            raise ValueError("ext_combine expects nonnegative parts")
    if pos.is_pos_inf and neg.is_pos_inf:
        return NEG_INF
    if pos.is_pos_inf:
        return POS_INF
    if neg.is_pos_inf:
        return NEG_INF
    return ExtReal.finite(pos.finite_value - neg.finite_value)


def ext_sum(terms) -> ExtReal:
    """Sum of nonnegative extended reals (any +inf term dominates)."""
    total: Scalar = Fraction(0)
    saw_finite = False
    for t in terms:
        if t.is_pos_inf:
            return POS_INF
        if t.is_neg_inf or t.finite_value < 0:
            raise ValueError("ext_sum expects nonnegative terms")
        total = t.finite_value if not saw_finite else total + t.finite_value
        saw_finite = True
    return ExtReal.finite(total) if saw_finite else ZERO


def ext_margin(achieved: ExtReal, required: ExtReal) -> ExtReal:
    """Reporting margin achieved - required.

    Equal infinities count as a zero margin (a tied comparison); otherwise an
    infinite side dominates.  Used only for diagnostics output, never for the
    measure arithmetic itself.
    """
    if achieved.is_finite and required.is_finite:
        return ExtReal.finite(achieved.finite_value - required.finite_value)
    if achieved == required:
        return ZERO
    return POS_INF if achieved > required else NEG_INF


def fmt_ext(x: ExtReal) -> str:
    if x.is_pos_inf:
        return "inf"
    if x.is_neg_inf:
        return "-inf"
    return fmt_scalar(x.finite_value)


def fmt_scalar(v: Scalar) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return repr(v)
