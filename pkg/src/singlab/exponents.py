"""Exact exponent algebra and regime classification for the coupled system.

Everything in this module is computed with `fractions.Fraction`: the regime
boundaries are knife-edge equalities (m = d/2, m = d/(3+gamma), conjugate
thresholds) that floating point would smear.  Two extended exponent values are
needed because conjugation maps endpoints to endpoints: ``INF`` (the exponent
infinity) and ``ANY_FINITE``, meaning "every finite exponent in [1, oo)".
``ANY_FINITE`` compares above every rational and below ``INF``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple, Union

__all__ = [
    "ANY_FINITE",
    "INF",
    "Exponent",
    "Params",
    "PositivityResult",
    "Regime",
    "RegimeError",
    "RegimeTag",
    "classify",
    "double_sobolev",
    "holder_conjugate",
    "sobolev_conjugate",
    "strict_positivity",
    "two_star",
    "u_integrability",
    "v_integrability",
]

RationalLike = Union[int, str, Fraction]


class RegimeError(ValueError):
    """An operation was invoked outside the parameter regime it requires."""


_FINITE, _ANY, _INF = 0, 1, 2
_KIND_NAMES = {_ANY: "any-finite", _INF: "inf"}


class Exponent:
    """A Lebesgue exponent: an exact rational, ``any-finite``, or ``inf``.

    Total order: every rational < ``ANY_FINITE`` < ``INF``.  Multiplication
    and division by positive rationals preserve the extended values.
    """

    __slots__ = ("_kind", "_q")

    def __init__(self, value: Union["Exponent", RationalLike]):
        if isinstance(value, Exponent):
            self._kind, self._q = value._kind, value._q
        else:
            self._kind = _FINITE
            self._q = Fraction(value)

    @classmethod
    def _extended(cls, kind: int) -> "Exponent":
        obj = object.__new__(cls)
        obj._kind = kind
        obj._q = None
        return obj

    @classmethod
    def parse(cls, text: str) -> "Exponent":
        """Parse ``"6/5"``, ``"inf"``, or ``"any-finite"``."""
        t = text.strip().lower()
        if t in ("inf", "infinity", "oo"):
            return INF
        if t in ("any-finite", "any_finite", "any"):
            return ANY_FINITE
        return cls(Fraction(text))

    @property
    def is_finite(self) -> bool:
        return self._kind == _FINITE

    @property
    def is_inf(self) -> bool:
        return self._kind == _INF

    @property
    def is_any_finite(self) -> bool:
        return self._kind == _ANY

    @property
    def q(self) -> Fraction:
        """The exact rational value; raises unless the exponent is finite."""
        if self._kind != _FINITE:
            raise ValueError(f"exponent {self} has no rational value")
        return self._q

    def _key(self) -> Tuple[int, Fraction]:
        return (self._kind, self._q if self._kind == _FINITE else Fraction(0))

    @staticmethod
    def _coerce(other) -> Optional["Exponent"]:
        if isinstance(other, Exponent):
            return other
        if isinstance(other, (int, Fraction)):
            return Exponent(other)
        return None

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self._key() == o._key()

    def __lt__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self._key() < o._key()

    def __le__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self._key() <= o._key()

    def __gt__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o._key() < self._key()

    def __ge__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o._key() <= self._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __mul__(self, factor: RationalLike) -> "Exponent":
        f = Fraction(factor)
        if f <= 0:
            raise ValueError("exponent scaling requires a positive factor")
        if self._kind == _FINITE:
            return Exponent(self._q * f)
        return self

    __rmul__ = __mul__

    def __truediv__(self, divisor: RationalLike) -> "Exponent":
        d = Fraction(divisor)
        if d <= 0:
            raise ValueError("exponent scaling requires a positive divisor")
        if self._kind == _FINITE:
            return Exponent(self._q / d)
        return self

    def __float__(self) -> float:
        if self._kind == _INF:
            return float("inf")
        if self._kind == _ANY:
            raise ValueError("'any-finite' has no numeric value; pick a concrete exponent")
        return float(self._q)

    def __str__(self) -> str:
        if self._kind == _FINITE:
            return str(self._q)
        return _KIND_NAMES[self._kind]

    def __repr__(self) -> str:
        return f"Exponent({str(self)!r})"


INF = Exponent._extended(_INF)
ANY_FINITE = Exponent._extended(_ANY)


def _check_dim(d: int) -> int:
    if not isinstance(d, int) or d < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {d!r}")
    return d


def holder_conjugate(p: Union[Exponent, RationalLike]) -> Exponent:
    """Conjugate exponent p/(p-1), with 1 <-> inf at the endpoints."""
    e = p if isinstance(p, Exponent) else Exponent(p)
    if e.is_inf:
        return Exponent(1)
    if e.is_any_finite:
        raise ValueError("conjugate of 'any-finite' is not defined")
    q = e.q
    if q < 1:
        raise ValueError(f"conjugation needs p >= 1, got {q}")
    if q == 1:
        return INF
    return Exponent(q / (q - 1))


def sobolev_conjugate(p: Union[Exponent, RationalLike], d: int) -> Exponent:
    """Embedding exponent dp/(d-p); 'any-finite' at p = d, inf above d."""
    _check_dim(d)
    e = p if isinstance(p, Exponent) else Exponent(p)
    if e.is_inf or e.is_any_finite:
        # arbitrarily large finite exponents embed above d
        return INF
    q = e.q
    if q < 1:
        raise ValueError(f"embedding needs p >= 1, got {q}")
    if q < d:
        return Exponent(d * q / (d - q))
    if q == d:
        return ANY_FINITE
    return INF


def double_sobolev(m: Union[Exponent, RationalLike], d: int) -> Exponent:
    """The embedding exponent applied twice; equals dm/(d-2m) for m < d/2."""
    return sobolev_conjugate(sobolev_conjugate(m, d), d)


def two_star(d: int) -> Fraction:
    """The H^1 embedding exponent 2d/(d-2)."""
    _check_dim(d)
    return Fraction(2 * d, d - 2)


@dataclass(frozen=True)
class Params:
    """Parameter tuple of the coupled system plus the datum integrability m.

    Invariants: d >= 3, r >= 2, 0 < gamma < 1, 0 <= theta < 1, m >= 1.
    """

    d: int
    r: Fraction
    gamma: Fraction
    theta: Fraction
    m: Fraction

    def __post_init__(self):
        object.__setattr__(self, "r", Fraction(self.r))
        object.__setattr__(self, "gamma", Fraction(self.gamma))
        object.__setattr__(self, "theta", Fraction(self.theta))
        object.__setattr__(self, "m", Fraction(self.m))
        _check_dim(self.d)
        if self.r < 2:
            raise ValueError(f"r must be >= 2, got {self.r}")
        if not (0 < self.gamma < 1):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not (0 <= self.theta < 1):
            raise ValueError(f"theta must lie in [0, 1), got {self.theta}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")

    @property
    def half_d(self) -> Fraction:
        return Fraction(self.d, 2)

    @property
    def dual_threshold(self) -> Fraction:
        """Lower end of the dual-space datum range, (2*/(1-gamma))'."""
        return holder_conjugate(two_star(self.d) / (1 - self.gamma)).q

    def as_dict(self) -> Dict[str, str]:
        return {
            "d": str(self.d),
            "r": str(self.r),
            "gamma": str(self.gamma),
            "theta": str(self.theta),
            "m": str(self.m),
        }


class RegimeTag(str, enum.Enum):
    """Which integrability statement applies to a parameter tuple."""

    BOUNDED = "bounded"                          # m > d/2: u bounded
    BORDERLINE = "borderline"                    # m = d/2: u in every finite L^p
    DUAL_SPACE = "dual_space"                    # dual-range datum: u in L^{m**(1+gamma)}
    OUTSIDE_DUAL_LR = "outside_dual_lr"          # below dual range, r > 2*: u in L^r
    OUTSIDE_DUAL_LR1 = "outside_dual_lr_plus_one"  # theta = 0 variant: u in L^{r+1}
    HIGHER_INTEGRABILITY = "higher_integrability"  # singular gain: u in L^{r+1+gamma}
    NONE = "none"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


def u_integrability(params: Params) -> Dict[RegimeTag, Exponent]:
    """All applicable (regime, exponent) rows of the u-integrability table."""
    out: Dict[RegimeTag, Exponent] = {}
    m, d = params.m, params.d
    half_d = params.half_d
    dual_lo = params.dual_threshold
    ts = two_star(d)
    if m > half_d:
        out[RegimeTag.BOUNDED] = INF
    elif m == half_d:
        out[RegimeTag.BORDERLINE] = ANY_FINITE
    if dual_lo <= m < half_d:
        out[RegimeTag.DUAL_SPACE] = double_sobolev(m, d) * (1 + params.gamma)
    if m < dual_lo:
        if params.r > ts and holder_conjugate(params.r / (1 - params.gamma)).q <= m:
            out[RegimeTag.OUTSIDE_DUAL_LR] = Exponent(params.r)
        if (
            params.theta == 0
            and params.r > ts - 1
            and holder_conjugate((params.r + 1) / (1 - params.gamma)).q <= m
        ):
            out[RegimeTag.OUTSIDE_DUAL_LR1] = Exponent(params.r + 1)
    return out


def v_integrability(params: Params) -> Exponent:
    """Integrability exponent of v in the r = 2 dual-space regime.

    Requires r = 2 and (2*/(1-gamma))' <= m < d/2; outside those hypotheses a
    RegimeError identifies the failed condition.
    """
    if params.r != 2:
        raise RegimeError(f"v-integrability needs r = 2, got r = {params.r}")
    if params.m >= params.half_d:
        raise RegimeError(
            f"v-integrability needs m < d/2 = {params.half_d}, got m = {params.m}"
        )
    dual_lo = params.dual_threshold
    if params.m < dual_lo:
        raise RegimeError(
            f"v-integrability needs m >= (2*/(1-gamma))' = {dual_lo}, got m = {params.m}"
        )
    pivot = Fraction(params.d) / (3 + params.gamma)
    if params.m > pivot:
        return INF
    if params.m == pivot:
        return ANY_FINITE
    s = double_sobolev(params.m, params.d) * (1 + params.gamma) / 2
    return double_sobolev(s, params.d) * (1 + params.theta)


@dataclass(frozen=True)
class PositivityResult:
    """Verdict of the strict-positivity criterion with the branches that fired."""

    holds: bool
    branches: Tuple[str, ...]


def strict_positivity(params: Params) -> PositivityResult:
    """Sufficient conditions for u > 0 everywhere (r = 2, dual-space datum).

    Evaluates the three alternative conditions and reports every branch that
    holds; the verdict is their disjunction.
    """
    fired = []
    d = params.d
    if d in (3, 4, 5):
        fired.append("dimension_le_5")
    if d >= 6:
        crit = Fraction(d - 6, d - 2)
        if params.theta > crit:
            fired.append("theta_above_critical")
        if params.theta <= crit and params.m > (1 - params.theta) * d / (
            2 * (2 - params.theta + params.gamma)
        ):
            fired.append("datum_above_critical")
    return PositivityResult(bool(fired), tuple(fired))


@dataclass(frozen=True)
class Regime:
    """Set of applicable regime tags with predicted integrability exponents.

    ``v_exponents`` maps a tag to the predicted exponent for v, or None when
    the theory makes no prediction for that tag.
    """

    tags: frozenset
    u_exponents: Dict[RegimeTag, Exponent]
    v_exponents: Dict[RegimeTag, Optional[Exponent]]

    @property
    def is_none(self) -> bool:
        return self.tags == frozenset({RegimeTag.NONE})

    def as_dict(self) -> dict:
        return {
            "tags": sorted(t.value for t in self.tags),
            "u_exponents": {t.value: str(e) for t, e in self.u_exponents.items()},
            "v_exponents": {
                t.value: (str(e) if e is not None else "unknown")
                for t, e in self.v_exponents.items()
            },
        }


def classify(params: Params) -> Regime:
    """Deterministic, total classification of a parameter tuple.

    Multiple statements can apply at once, so the result carries a set of
    tags; an empty intersection of hypotheses yields the single tag ``NONE``.
    """
    u_exps = dict(u_integrability(params))
    hi_lo = holder_conjugate(params.r + params.gamma).q
    r_floor = Fraction(params.d, params.d - 2) - params.gamma
    if hi_lo <= params.m < params.half_d and params.r >= r_floor:
        u_exps[RegimeTag.HIGHER_INTEGRABILITY] = Exponent(params.r + 1 + params.gamma)
    v_exps: Dict[RegimeTag, Optional[Exponent]] = {}
    for tag in u_exps:
        if tag in (RegimeTag.BOUNDED, RegimeTag.BORDERLINE):
            v_exps[tag] = INF
        elif tag is RegimeTag.DUAL_SPACE and params.r == 2:
            v_exps[tag] = v_integrability(params)
        else:
            v_exps[tag] = None
    tags = frozenset(u_exps) if u_exps else frozenset({RegimeTag.NONE})
    return Regime(tags=tags, u_exponents=u_exps, v_exponents=v_exps)
