"""
Truncated Hahn series 𝕜((t^Γ)).

A HahnSeries is a finite list of (γ, c) terms plus a precision cap: it stands
for every series that agrees with it below `prec`. `prec=None` means the
series is exact.
"""

import os
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from algebra.ordgroup import GroupElem, ValueGroup, gmin
from algebra.resfield import ExpGroupField, ResField
from utils.errors import (
    IncompatibleInstances,
    NegativeValuation,
    ParseError,
    PrecisionExhausted,
    ZeroSeriesError,
)
from utils.logger import log_debug
from utils.text_parser import ExpressionEvaluator, Pow, Sym, Tup, parse_expression, rational_tuple, rational_value

MAX_TERMS = int(os.getenv("VALDIFF_MAX_TERMS", "512"))

Prec = Optional[GroupElem]
Term = Tuple[GroupElem, Any]

_PLAIN_RATIONAL = re.compile(r"-?\d+(/\d+)?")


def prec_min(*precs: Prec) -> Prec:
    known = [p for p in precs if p is not None]
    return gmin(known) if known else None


def _prec_add(p: Prec, g: Prec) -> Prec:
    if p is None or g is None:
        return None
    return p + g


@dataclass(frozen=True, eq=False)
class HahnSeries:
    group: ValueGroup
    fld: ResField
    terms: Tuple[Term, ...]
    prec: Prec = None

    # ---- construction ----
    @classmethod
    def make(cls, group: ValueGroup, fld: ResField, terms: Iterable[Term], prec: Prec = None) -> "HahnSeries":
        acc: Dict[GroupElem, Any] = {}
        for gamma, c in terms:
            group.check(gamma)
            if prec is not None and gamma >= prec:
                continue
            acc[gamma] = acc[gamma] + c if gamma in acc else c
        kept = [(g, fld.normalize(c)) for g, c in acc.items() if not fld.is_zero(c)]
        kept.sort(key=lambda gc: gc[0].coords)
        return cls(group, fld, tuple(kept), prec)

    @classmethod
    def zero(cls, group: ValueGroup, fld: ResField, prec: Prec = None) -> "HahnSeries":
        return cls(group, fld, (), prec)

    @classmethod
    def constant(cls, group: ValueGroup, fld: ResField, c, prec: Prec = None) -> "HahnSeries":
        return cls.make(group, fld, [(group.zero(), fld.coerce(c))], prec)

    @classmethod
    def monomial(cls, group: ValueGroup, fld: ResField, gamma: GroupElem, c=1, prec: Prec = None) -> "HahnSeries":
        """Cross-section c(γ) = t^γ, optionally scaled by a residue constant."""
        return cls.make(group, fld, [(gamma, fld.coerce(c))], prec)

    def like(self, terms: Iterable[Term], prec: Prec) -> "HahnSeries":
        return HahnSeries.make(self.group, self.fld, terms, prec)

    def const(self, c) -> "HahnSeries":
        return HahnSeries.constant(self.group, self.fld, c)

    def mono(self, gamma: GroupElem, c=1) -> "HahnSeries":
        return HahnSeries.monomial(self.group, self.fld, gamma, c)

    # ---- inspection ----
    def is_zero(self) -> bool:
        """Zero modulo the precision cap."""
        return not self.terms

    def is_exact(self) -> bool:
        return self.prec is None

    def is_monomial(self) -> bool:
        return len(self.terms) == 1 and self.prec is None

    def vmin(self) -> Prec:
        """Lower bound for the valuation: the first term, else the cap (None = ∞)."""
        return self.terms[0][0] if self.terms else self.prec

    def valuation(self) -> Prec:
        if self.terms:
            return self.terms[0][0]
        if self.prec is None:
            return None
        raise PrecisionExhausted(f"valuation undetermined: series is zero modulo t^{self.prec}")

    def leading(self) -> Term:
        if not self.terms:
            raise ZeroSeriesError("series has no leading term")
        return self.terms[0]

    def leading_coef(self):
        return self.leading()[1]

    def coefficient(self, gamma: GroupElem):
        if self.prec is not None and gamma >= self.prec:
            raise PrecisionExhausted(f"coefficient at {gamma} lies beyond the precision cap {self.prec}")
        for g, c in self.terms:
            if g == gamma:
                return c
        return self.fld.zero()

    def residue(self):
        """π(a): the coefficient at 0, defined on the valuation ring."""
        zero = self.group.zero()
        if self.terms and self.terms[0][0] < zero:
            raise NegativeValuation(f"residue of a series with negative value {self.terms[0][0]}")
        if self.prec is not None and self.prec <= zero:
            raise PrecisionExhausted("residue undetermined at this precision")
        return self.coefficient(zero)

    def truncate(self, prec: Prec) -> "HahnSeries":
        new = prec_min(self.prec, prec)
        if new == self.prec:
            return self
        return self.like(self.terms, new)

    def _check(self, other: "HahnSeries"):
        if not isinstance(other, HahnSeries):
            raise TypeError(f"cannot combine HahnSeries with {type(other).__name__}")
        if other.group != self.group:
            raise IncompatibleInstances("series over different value groups")
        if type(other.fld) is not type(self.fld):
            raise IncompatibleInstances(f"series over residue fields {self.fld.name} and {other.fld.name}")

    # ---- arithmetic ----
    def __add__(self, other: "HahnSeries") -> "HahnSeries":
        self._check(other)
        return self.like(self.terms + other.terms, prec_min(self.prec, other.prec))

    def __neg__(self) -> "HahnSeries":
        return HahnSeries(self.group, self.fld, tuple((g, -c) for g, c in self.terms), self.prec)

    def __sub__(self, other: "HahnSeries") -> "HahnSeries":
        self._check(other)
        return self + (-other)

    def __mul__(self, other: "HahnSeries") -> "HahnSeries":
        self._check(other)
        prec = prec_min(_prec_add(self.prec, other.vmin()), _prec_add(other.prec, self.vmin()))
        acc: Dict[GroupElem, Any] = {}
        for ga, ca in self.terms:
            for gb, cb in other.terms:
                g = ga + gb
                if prec is not None and g >= prec:
                    continue
                p = ca * cb
                acc[g] = acc[g] + p if g in acc else p
        return self.like(acc.items(), prec)

    def scale(self, c) -> "HahnSeries":
        c = self.fld.coerce(c)
        return self.like(((g, c * x) for g, x in self.terms), self.prec)

    def shift(self, gamma: GroupElem) -> "HahnSeries":
        """t^γ · a."""
        return HahnSeries(
            self.group, self.fld, tuple((g + gamma, c) for g, c in self.terms),
            None if self.prec is None else self.prec + gamma,
        )

    def __pow__(self, n: int) -> "HahnSeries":
        if n < 0:
            return self.invert() ** (-n)
        result = self.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def invert(self, prec: Prec = None) -> "HahnSeries":
        """1/a as c⁻¹t^{-γ}·Σ(-u)^k where a = c·t^γ(1+u).

        An exact non-monomial input has infinite-support inverse; `prec` then
        sets the cap of the result."""
        if not self.terms:
            raise ZeroSeriesError("cannot invert a series that is zero at this precision")
        gamma, c = self.terms[0]
        c_inv = self.fld.one() / c
        if self.is_monomial():
            return self.like([(-gamma, c_inv)], prec)
        target = prec_min(None if self.prec is None else self.prec - gamma - gamma, prec)
        if target is None:
            raise PrecisionExhausted("inverse of an exact series with several terms needs a precision cap")
        rel = target + gamma
        neg_u = self.like(((g - gamma, -(x * c_inv)) for g, x in self.terms[1:]), rel)
        acc = self.like([(self.group.zero(), self.fld.one())], rel)
        power = acc
        for k in range(1, MAX_TERMS + 1):
            power = (power * neg_u).truncate(rel)
            if power.is_zero():
                log_debug(f"[SERIES_INVERT] geometric series closed after {k} powers")
                return acc.shift(-gamma).scale(c_inv)
            acc = acc + power
            if len(acc.terms) > MAX_TERMS:
                break
        raise PrecisionExhausted(f"inverse needs more than {MAX_TERMS} terms below t^{target}")

    def __truediv__(self, other: "HahnSeries") -> "HahnSeries":
        self._check(other)
        return self * other.invert()

    def sigma(self, k: int = 1) -> "HahnSeries":
        """Σ σ̄^k(a_γ) t^{σ^k(γ)}."""
        if k == 0:
            return self
        return HahnSeries(
            self.group,
            self.fld,
            tuple((self.group.sigma(g, k), self.fld.sigma(c, k)) for g, c in self.terms),
            None if self.prec is None else self.group.sigma(self.prec, k),
        )

    # ---- comparison ----
    def agrees_with(self, other: "HahnSeries") -> bool:
        """Equal below the smaller of the two caps."""
        return (self - other).is_zero()

    def __eq__(self, other) -> bool:
        if not isinstance(other, HahnSeries):
            return NotImplemented
        if self.prec != other.prec or len(self.terms) != len(other.terms):
            return False
        return all(ga == gb and self.fld.eq(ca, cb) for (ga, ca), (gb, cb) in zip(self.terms, other.terms))

    __hash__ = None

    # ---- rendering ----
    def _coef_str(self, c) -> str:
        text = self.fld.to_str(c)
        return text if _PLAIN_RATIONAL.fullmatch(text) else f"({text})"

    def _gamma_str(self, g: GroupElem) -> str:
        return "(" + ",".join(str(x) for x in g.coords) + ")"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts: List[str] = []
        for g, c in self.terms:
            coef = self._coef_str(c)
            if g.is_zero():
                parts.append(coef)
                continue
            mono = f"t^{self._gamma_str(g)}"
            if coef == "1":
                parts.append(mono)
            elif coef == "-1":
                parts.append("-" + mono)
            else:
                parts.append(f"{coef}*{mono}")
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def to_json(self) -> dict:
        return {
            "terms": [{"gamma": g.to_json(), "coef": self.fld.to_str(c)} for g, c in self.terms],
            "prec": None if self.prec is None else self.prec.to_json(),
        }

    @classmethod
    def from_json(cls, group: ValueGroup, fld: ResField, data: dict) -> "HahnSeries":
        terms = [(group.elem(*[Fraction(x) for x in t["gamma"]]), fld.parse(t["coef"])) for t in data.get("terms", [])]
        prec = data.get("prec")
        return cls.make(group, fld, terms, None if prec is None else group.elem(*[Fraction(x) for x in prec]))


# ---- RV = K^× / (1 + 𝔪) ----

@dataclass(frozen=True)
class RVElem:
    """∞ when gamma is None, else the class of c·t^γ (c ≠ 0)."""

    gamma: Optional[GroupElem]
    coef: Any = None

    @classmethod
    def infinity(cls) -> "RVElem":
        return cls(None, None)

    def is_infinite(self) -> bool:
        return self.gamma is None

    def __str__(self) -> str:
        return "∞" if self.gamma is None else f"({self.gamma}, {self.coef})"


def rv_of(a: HahnSeries) -> RVElem:
    if not a.terms:
        if a.prec is not None:
            raise PrecisionExhausted("rv undetermined: series vanishes modulo its precision")
        return RVElem.infinity()
    gamma, c = a.terms[0]
    return RVElem(gamma, c)


def rv_add(fld: ResField, r: RVElem, u: RVElem) -> RVElem:
    """Partial addition: the smaller value wins; equal values add coefficients (∞ on cancellation)."""
    if r.is_infinite():
        return u
    if u.is_infinite():
        return r
    if r.gamma < u.gamma:
        return r
    if u.gamma < r.gamma:
        return u
    total = fld.normalize(r.coef + u.coef)
    if fld.is_zero(total):
        return RVElem.infinity()
    return RVElem(r.gamma, total)


def rv_mul(fld: ResField, r: RVElem, u: RVElem) -> RVElem:
    if r.is_infinite() or u.is_infinite():
        return RVElem.infinity()
    return RVElem(r.gamma + u.gamma, fld.normalize(r.coef * u.coef))


def sigma_rv(group: ValueGroup, fld: ResField, r: RVElem, k: int = 1) -> RVElem:
    if r.is_infinite():
        return r
    return RVElem(group.sigma(r.gamma, k), fld.sigma(r.coef, k))


def rv_equal(fld: ResField, r: RVElem, u: RVElem) -> bool:
    if r.is_infinite() or u.is_infinite():
        return r.is_infinite() and u.is_infinite()
    return r.gamma == u.gamma and fld.eq(r.coef, u.coef)


# ---- text grammar: "3*t^(1/2) + (s/(s+1))*t^(2)" ----

class SeriesEvaluator(ExpressionEvaluator):
    """Folds an expression into a HahnSeries. `t` is the cross-section
    generator; residue symbols (s, E) come from the field."""

    def __init__(self, group: ValueGroup, fld: ResField, prec: Prec = None, variable: str = "t"):
        self.group = group
        self.fld = fld
        self.prec = prec
        self.variable = variable

    def number(self, value: Fraction) -> HahnSeries:
        return HahnSeries.constant(self.group, self.fld, value)

    def symbol(self, node: Sym) -> HahnSeries:
        if node.name == self.variable:
            return HahnSeries.monomial(self.group, self.fld, self.group.unit())
        return HahnSeries.constant(self.group, self.fld, self.residue_atom(node))

    def residue_atom(self, node: Sym):
        try:
            return self.fld.parse(node.name)
        except ParseError:
            raise ParseError(f"unknown symbol '{node.name}'", node.line, node.column)

    def gamma_of(self, exponent) -> GroupElem:
        if isinstance(exponent, Tup):
            return self.group.elem(*rational_tuple(exponent))
        q = rational_value(exponent)
        return self.group.unit() * q

    def power(self, node: Pow) -> HahnSeries:
        if isinstance(node.base, Sym) and node.base.name == self.variable:
            return HahnSeries.monomial(self.group, self.fld, self.gamma_of(node.exponent))
        if isinstance(node.base, Sym) and node.base.name == "E" and isinstance(self.fld, ExpGroupField):
            return HahnSeries.constant(self.group, self.fld, self.fld.parse(f"E^({rational_value(node.exponent)})"))
        return super().power(node)

    def div(self, a: HahnSeries, b: HahnSeries, node) -> HahnSeries:
        if b.is_zero():
            raise ParseError("division by zero", node.line, node.column)
        if b.is_monomial():
            return a * b.invert()
        if self.prec is None:
            raise ParseError("division by a non-monomial series needs a precision cap", node.line, node.column)
        lead = a.vmin() if a.vmin() is not None else self.group.zero()
        return a * b.invert(self.prec - lead)


def parse_series(text: str, group: ValueGroup, fld: ResField, prec: Prec = None) -> HahnSeries:
    value = SeriesEvaluator(group, fld, prec).evaluate(parse_expression(text))
    return value.truncate(prec)


def series_sum(items: Sequence[HahnSeries], like: HahnSeries) -> HahnSeries:
    total = like.like([], None)
    for item in items:
        total = total + item
    return total
