"""
Grid-based, log-free transseries Σ c·x^a·e^{q(x)} with q ∈ xℚ[x] of bounded
degree and coefficients c in Frac ℚ[E^ℚ].

Precision is a flat exponent cut-off shared by every exponential block: a
series with `prec = p` is known modulo all x^a·e^q with a ≤ p. `prec=None`
means exact.

Also here: ∂ and flat ∫, right composition with x+h, the coarse valuation w
(Γ_w = epart polynomials), skew operators Σ c_m ∂^m, difference operators
Σ h_i e^{i∂} and their inversion on the flat part (discrete summation).
"""

import os
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from algebra.ordgroup import GroupAut, GroupElem, ValueGroup
from algebra.resfield import ExpGroupElem, ExpGroupField, ResField
from utils.errors import (
    EPartNonzero,
    LogarithmNeeded,
    OperatorNotContracting,
    ParseError,
    PrecisionExhausted,
    ValdiffError,
    ZeroOperator,
    ZeroSeriesError,
)
from utils.logger import log_debug, log_info
from utils.text_parser import BinOp, Call, ExpressionEvaluator, Neg, Node, Num, Pow, Sym, Tup, parse_expression, rational_value

DEPTH_CAP = int(os.getenv("VALDIFF_TRANS_DEPTH", "4"))
TRANS_ORDER = int(os.getenv("VALDIFF_TRANS_ORDER", "8"))
MAX_TERMS = int(os.getenv("VALDIFF_MAX_TERMS", "512"))

EPart = Tuple[Fraction, ...]
FlatPrec = Optional[Fraction]


# ---- exponent polynomials q(x) = Σ_k epart[k-1]·x^k ----

def _trim(coeffs: Iterable) -> EPart:
    out = [Fraction(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


def _epart_add(a: EPart, b: EPart) -> EPart:
    n = max(len(a), len(b))
    a = a + (Fraction(0),) * (n - len(a))
    b = b + (Fraction(0),) * (n - len(b))
    return _trim(x + y for x, y in zip(a, b))


def epart_shift(q: EPart, h: int = 1) -> Tuple[EPart, Fraction]:
    """q(x+h) − q(x), split into its part in xℚ[x] and its constant q(h)."""
    n = len(q)
    moved = [Fraction(0)] * n
    for k in range(1, n + 1):
        for j in range(1, k):
            moved[j - 1] += q[k - 1] * comb(k, j) * Fraction(h) ** (k - j)
    const = sum((q[k - 1] * Fraction(h) ** k for k in range(1, n + 1)), Fraction(0))
    return _trim(moved), const


def _epart_str(q: EPart) -> str:
    parts = []
    for k in range(len(q), 0, -1):
        c = q[k - 1]
        if c == 0:
            continue
        mono = "x" if k == 1 else f"x^{k}"
        parts.append(mono if c == 1 else ("-" + mono if c == -1 else f"{c}*{mono}"))
    return _join(parts) if parts else "0"


def _join(parts: Sequence[str]) -> str:
    out = parts[0]
    for p in parts[1:]:
        out += " - " + p[1:] if p.startswith("-") else " + " + p
    return out


@dataclass(frozen=True)
class Transmonomial:
    """x^a·e^{q(x)}. Larger means more dominant at +∞ (smaller valuation)."""

    xpow: Fraction = Fraction(0)
    epart: EPart = ()

    def __post_init__(self):
        object.__setattr__(self, "xpow", Fraction(self.xpow))
        object.__setattr__(self, "epart", _trim(self.epart))
        if len(self.epart) > DEPTH_CAP:
            raise ValdiffError(f"e^q with deg q = {len(self.epart)} exceeds the depth cap {DEPTH_CAP}")

    def is_flat(self) -> bool:
        return not self.epart

    @property
    def degree(self) -> int:
        return len(self.epart)

    def growth(self) -> Tuple[Fraction, ...]:
        """q's coefficients from the top degree down, then a: lex order is dominance."""
        padded = self.epart + (Fraction(0),) * (DEPTH_CAP - len(self.epart))
        return tuple(reversed(padded)) + (self.xpow,)

    def __mul__(self, other: "Transmonomial") -> "Transmonomial":
        return Transmonomial(self.xpow + other.xpow, _epart_add(self.epart, other.epart))

    def inverse(self) -> "Transmonomial":
        return Transmonomial(-self.xpow, tuple(-c for c in self.epart))

    def __truediv__(self, other: "Transmonomial") -> "Transmonomial":
        return self * other.inverse()

    def __lt__(self, other: "Transmonomial") -> bool:
        return self.growth() < other.growth()

    def __le__(self, other: "Transmonomial") -> bool:
        return self.growth() <= other.growth()

    def __gt__(self, other: "Transmonomial") -> bool:
        return self.growth() > other.growth()

    def __ge__(self, other: "Transmonomial") -> bool:
        return self.growth() >= other.growth()

    def __str__(self) -> str:
        parts = []
        if self.xpow == 1:
            parts.append("x")
        elif self.xpow != 0:
            parts.append(f"x^({self.xpow})")
        if self.epart:
            parts.append(f"e^({_epart_str(self.epart)})")
        return "*".join(parts) or "1"

    def to_json(self) -> dict:
        return {"xpow": str(self.xpow), "epart": [str(c) for c in self.epart]}


ONE = Transmonomial()

TTerm = Tuple[Transmonomial, ExpGroupElem]


def _coef(value) -> ExpGroupElem:
    if isinstance(value, ExpGroupElem):
        return value
    return ExpGroupElem.rational(value)


def _prec_coarsest(*precs: FlatPrec) -> FlatPrec:
    """The largest cut-off; a larger p leaves more terms unknown."""
    known = [p for p in precs if p is not None]
    return max(known) if known else None


def _prec_add(p: FlatPrec, q: FlatPrec) -> FlatPrec:
    if p is None or q is None:
        return None
    return p + q


def _binomial(a: Fraction, k: int) -> Fraction:
    out = Fraction(1)
    for j in range(k):
        out = out * (a - j) / (j + 1)
    return out


@dataclass(frozen=True, eq=False)
class Transseries:
    terms: Tuple[TTerm, ...] = ()
    prec: FlatPrec = None

    # ---- construction ----
    @classmethod
    def make(cls, terms: Iterable[Tuple[Transmonomial, object]], prec=None) -> "Transseries":
        prec = None if prec is None else Fraction(prec)
        acc: Dict[Transmonomial, ExpGroupElem] = {}
        for mono, c in terms:
            if prec is not None and mono.xpow <= prec:
                continue
            acc[mono] = acc[mono] + c if mono in acc else _coef(c)
        kept = [(m, c) for m, c in acc.items() if not c.is_zero()]
        kept.sort(key=lambda mc: mc[0].growth(), reverse=True)
        return cls(tuple(kept), prec)

    @classmethod
    def zero(cls, prec=None) -> "Transseries":
        return cls((), None if prec is None else Fraction(prec))

    @classmethod
    def constant(cls, c, prec=None) -> "Transseries":
        return cls.make([(ONE, _coef(c))], prec)

    @classmethod
    def monomial(cls, xpow=0, epart: Sequence = (), c=1, prec=None) -> "Transseries":
        return cls.make([(Transmonomial(Fraction(xpow), tuple(epart)), _coef(c))], prec)

    @classmethod
    def x(cls, a=1) -> "Transseries":
        return cls.monomial(a)

    @staticmethod
    def _lift(other) -> "Transseries":
        if isinstance(other, Transseries):
            return other
        if isinstance(other, (int, Fraction, ExpGroupElem)):
            return Transseries.constant(other)
        return NotImplemented

    # ---- inspection ----
    def is_zero(self) -> bool:
        """Zero modulo the precision cap."""
        return not self.terms

    def is_exact(self) -> bool:
        return self.prec is None

    def is_flat(self) -> bool:
        """Supported on pure powers of x (the w-units and zero)."""
        return all(m.is_flat() for m, _ in self.terms)

    def is_monomial(self) -> bool:
        return len(self.terms) == 1 and self.prec is None

    def leading(self) -> TTerm:
        if not self.terms:
            raise ZeroSeriesError("transseries has no leading term")
        return self.terms[0]

    def top(self) -> FlatPrec:
        """Largest flat exponent present; the cap for a truncated zero."""
        if self.terms:
            return max(m.xpow for m, _ in self.terms)
        return self.prec

    def max_degree(self) -> int:
        return max((m.degree for m, _ in self.terms), default=0)

    def coefficient(self, mono: Transmonomial) -> ExpGroupElem:
        if self.prec is not None and mono.xpow <= self.prec:
            raise PrecisionExhausted(f"coefficient of {mono} lies beyond the cut-off x^({self.prec})")
        for m, c in self.terms:
            if m == mono:
                return c
        return ExpGroupElem.rational(0)

    def truncate(self, prec: FlatPrec) -> "Transseries":
        new = _prec_coarsest(self.prec, prec)
        if new == self.prec:
            return self
        return Transseries.make(self.terms, new)

    def exact_part(self) -> "Transseries":
        """The known terms read as an exact series."""
        return Transseries(self.terms, None)

    # ---- arithmetic ----
    def __add__(self, other) -> "Transseries":
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return Transseries.make(self.terms + other.terms, _prec_coarsest(self.prec, other.prec))

    __radd__ = __add__

    def __neg__(self) -> "Transseries":
        return Transseries(tuple((m, -c) for m, c in self.terms), self.prec)

    def __sub__(self, other) -> "Transseries":
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "Transseries":
        return (-self) + other

    def __mul__(self, other) -> "Transseries":
        other = self._lift(other)
        if other is NotImplemented:
            return other
        prec = _prec_coarsest(_prec_add(self.prec, other.top()), _prec_add(other.prec, self.top()))
        acc: List[TTerm] = []
        for ma, ca in self.terms:
            for mb, cb in other.terms:
                m = ma * mb
                if prec is not None and m.xpow <= prec:
                    continue
                acc.append((m, ca * cb))
        return Transseries.make(acc, prec)

    __rmul__ = __mul__

    def scale(self, c) -> "Transseries":
        c = _coef(c)
        return Transseries.make(((m, c * x) for m, x in self.terms), self.prec)

    def mul_monomial(self, mono: Transmonomial) -> "Transseries":
        return Transseries(
            tuple((m * mono, c) for m, c in self.terms),
            None if self.prec is None else self.prec + mono.xpow,
        )

    def invert(self, prec: FlatPrec = None) -> "Transseries":
        """1/f as c⁻¹m⁻¹·Σ(−u)^k for f = c·m·(1+u) supported on one e^q block.

        An exact non-monomial input gets the cut-off `prec`, or one
        TRANS_ORDER below the leading exponent of the result."""
        if not self.terms:
            raise ZeroSeriesError("cannot invert a transseries that is zero at this precision")
        lead, c = self.terms[0]
        if any(m.epart != lead.epart for m, _ in self.terms):
            raise ValdiffError("inversion needs a transseries supported on a single exponential block")
        c_inv = ExpGroupElem.rational(1) / c
        inv_lead = lead.inverse()
        if self.is_monomial():
            return Transseries.make([(inv_lead, c_inv)], prec)
        target = _prec_coarsest(None if self.prec is None else self.prec - 2 * lead.xpow, prec)
        if target is None:
            target = -lead.xpow - TRANS_ORDER
        rel = target + lead.xpow
        neg_u = Transseries.make(((m / lead, -(x * c_inv)) for m, x in self.terms[1:]), rel)
        acc = Transseries.constant(1, rel)
        power = acc
        for k in range(1, MAX_TERMS + 1):
            power = (power * neg_u).truncate(rel)
            if power.is_zero():
                log_debug(f"[TRANS_INVERT] geometric series closed after {k} powers")
                return acc.mul_monomial(inv_lead).scale(c_inv)
            acc = acc + power
        raise PrecisionExhausted(f"inverse needs more than {MAX_TERMS} powers above x^({target})")

    def __truediv__(self, other) -> "Transseries":
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self * other.invert()

    def __rtruediv__(self, other) -> "Transseries":
        return self._lift(other) / self

    def __pow__(self, n: int) -> "Transseries":
        if n < 0:
            return self.invert() ** (-n)
        result = Transseries.constant(1)
        for _ in range(n):
            result = result * self
        return result

    # ---- calculus ----
    def derive(self) -> "Transseries":
        """∂(c·x^a·e^q) = c·(a·x^{a−1} + q'(x)·x^a)·e^q."""
        acc: List[TTerm] = []
        for m, c in self.terms:
            if m.xpow != 0:
                acc.append((Transmonomial(m.xpow - 1, m.epart), c * m.xpow))
            for k, qk in enumerate(m.epart, start=1):
                if qk:
                    acc.append((Transmonomial(m.xpow + k - 1, m.epart), c * (k * qk)))
        prec = None if self.prec is None else self.prec + max(-1, self.max_degree() - 1)
        return Transseries.make(acc, prec)

    def integrate_flat(self) -> "Transseries":
        """x^a ↦ x^{a+1}/(a+1); no constant of integration."""
        acc: List[TTerm] = []
        for m, c in self.terms:
            if not m.is_flat():
                raise EPartNonzero(f"cannot integrate the non-flat term {m}")
            if m.xpow == -1:
                raise LogarithmNeeded("integrating x^(-1) needs log x")
            acc.append((Transmonomial(m.xpow + 1), c / (m.xpow + 1)))
        return Transseries.make(acc, None if self.prec is None else self.prec + 1)

    def compose_shift(self, h: int = 1, prec: FlatPrec = None) -> "Transseries":
        """f(x+h): x^a·e^q ↦ x^a(1+h/x)^a·E^{q(h)}·e^{q + r} with r = q(x+h) − q(x) − q(h)."""
        if h == 0:
            return self.truncate(prec)
        cut = _prec_coarsest(self.prec, prec)
        if cut is None and any(m.xpow.denominator != 1 or m.xpow < 0 for m, _ in self.terms):
            # (1+h/x)^a has infinite support
            cut = min(m.xpow for m, _ in self.terms) - TRANS_ORDER
        acc: List[TTerm] = []
        for m, c in self.terms:
            moved, const = epart_shift(m.epart, h)
            epart = _epart_add(m.epart, moved)
            coef = c * ExpGroupElem.exp(const) if const else c
            k = 0
            while True:
                if m.xpow.denominator == 1 and 0 <= m.xpow < k:
                    break
                a = m.xpow - k
                if cut is not None and a <= cut:
                    break
                b = _binomial(m.xpow, k) * Fraction(h) ** k
                if b:
                    acc.append((Transmonomial(a, epart), coef * b))
                k += 1
        return Transseries.make(acc, cut)

    # ---- comparison ----
    def agrees_with(self, other: "Transseries") -> bool:
        return (self - other).is_zero()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Transseries):
            return NotImplemented
        if self.prec != other.prec or len(self.terms) != len(other.terms):
            return False
        return all(ma == mb and ca == cb for (ma, ca), (mb, cb) in zip(self.terms, other.terms))

    __hash__ = None

    # ---- rendering ----
    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.terms:
            coef = str(c)
            if c.as_rational() is None and (" " in coef or coef.startswith("(")):
                coef = f"({coef})"
            if m == ONE:
                parts.append(coef)
            elif coef == "1":
                parts.append(str(m))
            elif coef == "-1":
                parts.append("-" + str(m))
            else:
                parts.append(f"{coef}*{m}")
        return _join(parts)

    def to_json(self) -> dict:
        return {
            "terms": [dict(m.to_json(), coef=str(c)) for m, c in self.terms],
            "prec": None if self.prec is None else str(self.prec),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Transseries":
        coefs = ExpGroupField()
        terms = [
            (Transmonomial(Fraction(t["xpow"]), tuple(Fraction(c) for c in t.get("epart", []))), coefs.parse(t["coef"]))
            for t in data.get("terms", [])
        ]
        prec = data.get("prec")
        return cls.make(terms, None if prec is None else Fraction(prec))


Coefficient = Union[Transseries, ExpGroupElem, Fraction, int]


def as_transseries(value: Coefficient) -> Transseries:
    lifted = Transseries._lift(value)
    if lifted is NotImplemented:
        raise ValdiffError(f"cannot read {type(value).__name__} as a transseries")
    return lifted


# ---- the coarse valuation w ----

def coarse_value_group(depth: int = DEPTH_CAP) -> ValueGroup:
    """Γ_w ≅ ℚ^depth: (−q_D, …, −q_1) with σ acting as q ↦ nonconstant part of q(x+1)."""
    rows = []
    for r in range(depth):
        dr = depth - r
        rows.append(tuple(comb(depth - c, dr) if depth - c >= dr else 0 for c in range(depth)))
    return ValueGroup(GroupAut(tuple(rows)))


def w_value(f: Transseries, depth: int = DEPTH_CAP) -> GroupElem:
    if not f.terms:
        raise ZeroSeriesError("w-value of a transseries that is zero at this precision")
    q = f.terms[0][0].epart
    padded = q + (Fraction(0),) * (depth - len(q))
    return GroupElem(tuple(-c for c in reversed(padded)))


def coarse_w(f: Transseries, depth: int = DEPTH_CAP) -> Tuple[GroupElem, Transseries]:
    """(w(f), the dominant e^q block of f with e^q divided out)."""
    value = w_value(f, depth)
    q = f.terms[0][0].epart
    residue = Transseries.make(((Transmonomial(m.xpow), c) for m, c in f.terms if m.epart == q), f.prec)
    return value, residue


# ---- skew operators Σ c_m ∂^m ----

def _is_known_zero(c: Transseries) -> bool:
    return not c.terms and c.prec is None


@dataclass(frozen=True, eq=False)
class SkewOperator:
    """Σ_m c_m ∂^m, coefficients on the left, ∂∘g = g∘∂ + ∂g.

    When `tail` is set, the operator is known modulo terms c∂^m with
    top(c) − m ≤ tail."""

    coeffs: Tuple[Transseries, ...]
    tail: FlatPrec = None

    @classmethod
    def derivation(cls, power: int = 1) -> "SkewOperator":
        return cls(tuple(Transseries.zero() for _ in range(power)) + (Transseries.constant(1),))

    @classmethod
    def multiplication(cls, c: Coefficient) -> "SkewOperator":
        return cls((as_transseries(c),))

    @classmethod
    def from_shift_coefficients(cls, h: Sequence[Coefficient], order: int = TRANS_ORDER) -> "SkewOperator":
        """Σ_i h_i e^{i∂} = Σ_m ℓ_m ∂^m with ℓ_m = Σ_i h_i i^m/m!, kept for m ≤ order."""
        h = [as_transseries(c) for c in h]
        if all(c.is_zero() for c in h):
            raise ZeroOperator("difference operator with all-zero coefficients")
        if not all(c.is_flat() for c in h):
            raise EPartNonzero("operator coefficients must be flat")
        coeffs = []
        for m in range(order + 1):
            acc = Transseries.zero()
            for i, hi in enumerate(h):
                if i ** m:
                    acc = acc + hi.scale(Fraction(i ** m, factorial(m)))
            coeffs.append(acc)
        tail = None
        if any(not c.is_zero() for c in h[1:]):
            h_top = max(c.top() for c in h if c.top() is not None)
            tail = h_top - (order + 1)
        return cls(tuple(coeffs), tail)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def weight(self) -> FlatPrec:
        """max top(c_m) − m, including the omitted tail."""
        weights = [c.top() - m for m, c in enumerate(self.coeffs) if c.top() is not None]
        if self.tail is not None:
            weights.append(self.tail)
        return max(weights) if weights else None

    def lowest(self) -> int:
        for m, c in enumerate(self.coeffs):
            if not c.is_zero():
                return m
        raise ValdiffError(f"operator vanishes through ∂^{self.order}; raise the order")

    def split_derivation(self) -> Tuple[int, "SkewOperator"]:
        """L = A∘∂^k with A's constant coefficient nonzero."""
        k = self.lowest()
        return k, SkewOperator(self.coeffs[k:], None if self.tail is None else self.tail + k)

    def apply(self, f: Coefficient) -> Transseries:
        f = as_transseries(f)
        total = Transseries.zero()
        d = f
        for m, c in enumerate(self.coeffs):
            if m:
                d = d.derive()
            if not _is_known_zero(c):
                total = total + c * d
        if self.tail is not None:
            if not f.is_flat():
                raise EPartNonzero("a truncated operator is only applied to flat series")
            top = f.top()
            if top is not None:
                total = total.truncate(top + self.tail)
        return total

    def compose(self, other: "SkewOperator") -> "SkewOperator":
        """self∘other via a∂^m ∘ b∂^n = Σ_j C(m,j)·a·∂^j(b)·∂^{m−j+n}."""
        out: Dict[int, Transseries] = {}
        for m, a in enumerate(self.coeffs):
            if _is_known_zero(a):
                continue
            for n, b in enumerate(other.coeffs):
                db = b
                for j in range(m + 1):
                    if j:
                        db = db.derive()
                    idx = m - j + n
                    term = a * db.scale(comb(m, j))
                    out[idx] = out[idx] + term if idx in out else term
        size = max(out, default=0) + 1
        coeffs = tuple(out.get(i, Transseries.zero()) for i in range(size))
        tails = []
        if self.tail is not None and other.weight() is not None:
            tails.append(self.tail + other.weight())
        if other.tail is not None and self.weight() is not None:
            tails.append(self.weight() + other.tail)
        return SkewOperator(coeffs, max(tails) if tails else None)

    def __str__(self) -> str:
        parts = []
        for m, c in enumerate(self.coeffs):
            if c.is_zero():
                continue
            op = "" if m == 0 else ("D" if m == 1 else f"D^{m}")
            body = str(c)
            if not op:
                parts.append(body)
            elif body == "1":
                parts.append(op)
            else:
                parts.append(f"({body})*{op}")
        return _join(parts) if parts else "0"


# ---- difference operators Σ h_i e^{i∂} ----

@dataclass(frozen=True, eq=False)
class DifferenceOperator:
    """(Lf)(x) = Σ_i h_i(x)·f(x+i)."""

    coeffs: Tuple[Transseries, ...]

    @classmethod
    def make(cls, coeffs: Sequence[Coefficient]) -> "DifferenceOperator":
        items = [as_transseries(c) for c in coeffs]
        while len(items) > 1 and _is_known_zero(items[-1]):
            items.pop()
        return cls(tuple(items) or (Transseries.zero(),))

    @classmethod
    def constant(cls, c: Coefficient) -> "DifferenceOperator":
        return cls.make([c])

    @classmethod
    def shift(cls, k: int = 1) -> "DifferenceOperator":
        if k < 0:
            raise ValdiffError("only forward shifts e^(kD) with k ≥ 0 are supported")
        return cls.make([0] * k + [1])

    def _lift(self, other) -> "DifferenceOperator":
        if isinstance(other, DifferenceOperator):
            return other
        return DifferenceOperator.constant(other)

    def __add__(self, other) -> "DifferenceOperator":
        other = self._lift(other)
        n = max(len(self.coeffs), len(other.coeffs))
        def pad(cs):
            return list(cs) + [Transseries.zero()] * (n - len(cs))

        return DifferenceOperator.make([a + b for a, b in zip(pad(self.coeffs), pad(other.coeffs))])

    __radd__ = __add__

    def __neg__(self) -> "DifferenceOperator":
        return DifferenceOperator(tuple(-c for c in self.coeffs))

    def __sub__(self, other) -> "DifferenceOperator":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "DifferenceOperator":
        return (-self) + other

    def __mul__(self, other) -> "DifferenceOperator":
        """(h·e^{i∂})∘(g·e^{j∂}) = h·σ^i(g)·e^{(i+j)∂}."""
        other = self._lift(other)
        out: Dict[int, Transseries] = {}
        for i, h in enumerate(self.coeffs):
            if _is_known_zero(h):
                continue
            for j, g in enumerate(other.coeffs):
                term = h * g.compose_shift(i)
                out[i + j] = out[i + j] + term if i + j in out else term
        return DifferenceOperator.make([out.get(k, Transseries.zero()) for k in range(max(out, default=0) + 1)])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def apply(self, f: Coefficient, prec: FlatPrec = None) -> Transseries:
        f = as_transseries(f)
        total = Transseries.zero()
        for i, h in enumerate(self.coeffs):
            if not _is_known_zero(h):
                total = total + h * f.compose_shift(i, prec)
        return total

    def to_skew(self, order: int = TRANS_ORDER) -> SkewOperator:
        return SkewOperator.from_shift_coefficients(self.coeffs, order)

    def __str__(self) -> str:
        parts = []
        for i, h in enumerate(self.coeffs):
            if h.is_zero():
                continue
            op = "" if i == 0 else ("e^D" if i == 1 else f"e^({i}D)")
            body = str(h)
            if not op:
                parts.append(body)
            elif body == "1":
                parts.append(op)
            elif body == "-1":
                parts.append("-" + op)
            else:
                parts.append(f"({body})*{op}")
        return _join(parts) if parts else "0"


def solve_linear_difference(h: Union[DifferenceOperator, Sequence[Coefficient]], rhs: Coefficient,
                            order: int = TRANS_ORDER) -> Transseries:
    """f in K_w with Σ h_i σ^i(f) = rhs, the integration constants set to 0.

    L = Σ_{m≤order} ℓ_m ∂^m is factored as A∘∂^k; A is inverted by the
    Neumann series around its constant coefficient and ∂^k by k flat
    integrations."""
    coeffs = h.coeffs if isinstance(h, DifferenceOperator) else h
    rhs = as_transseries(rhs)
    if not rhs.is_flat():
        raise EPartNonzero("the right-hand side must be flat")
    op = SkewOperator.from_shift_coefficients(coeffs, order)
    k, A = op.split_derivation()
    lead = A.coeffs[0]
    lead_top = lead.leading()[0].xpow
    for m, c in enumerate(A.coeffs[1:], start=1):
        if c.terms and c.top() - lead_top - m >= 0:
            raise OperatorNotContracting(f"coefficient of ∂^{m} is not dominated by the constant coefficient")
    if A.tail is not None and A.tail - lead_top >= 0:
        raise OperatorNotContracting("omitted terms of the operator are not dominated; raise the order")
    log_info(f"[TRANS_SOLVE] L = {op} = ({SkewOperator(A.coeffs)})∘D^{k}, rhs = {rhs}")
    if rhs.is_zero() and rhs.prec is None:
        return Transseries.zero()
    top = rhs.top()
    bound = A.tail if A.tail is not None else -Fraction(order)
    target = _prec_coarsest(
        None if rhs.prec is None else rhs.prec - lead_top,
        top - lead_top + bound,
    )
    inv = lead.invert(target - top)
    rest = SkewOperator((Transseries.zero(),) + A.coeffs[1:])
    g = (inv * rhs).truncate(target)
    for step in range(MAX_TERMS):
        g_next = (inv * (rhs - rest.apply(g))).truncate(target)
        if g_next == g:
            log_debug(f"[TRANS_SOLVE] Neumann iteration stable after {step + 1} pass(es)")
            break
        g = g_next
    else:
        raise PrecisionExhausted(f"Neumann iteration did not settle within {MAX_TERMS} passes")
    f = g
    for _ in range(k):
        f = f.integrate_flat()
    log_info(f"[TRANS_SOLVE] f = {f}")
    return f


# ---- K_w as a residue difference field ----

class FlatField(ResField):
    """K_w with σ̄ = composition with x+1; Axiom 2 via solve_linear_difference."""

    name = "flat"
    has_axiom1 = True
    axiom2_max_order = None
    has_root_finding = False

    def __init__(self, order: int = TRANS_ORDER):
        self.order = order

    def coerce(self, value) -> Transseries:
        series = as_transseries(value)
        if not series.is_flat():
            raise EPartNonzero(f"{series} is not flat")
        return series

    def is_zero(self, a) -> bool:
        return a.is_zero()

    def eq(self, a, b) -> bool:
        return (a - b).is_zero()

    def sigma(self, a, k: int = 1):
        return a.compose_shift(k) if k else a

    def to_str(self, a) -> str:
        return str(a)

    def parse(self, text: str) -> Transseries:
        return self.coerce(parse_transseries(text))

    def candidates(self) -> Iterator[Transseries]:
        yield Transseries.constant(1)
        for n in range(1, MAX_TERMS + 1):
            yield Transseries.x(n)
            yield Transseries.x(-n)

    def axiom1_witness(self, d: int) -> Transseries:
        """x, moved to x+d by σ̄^d."""
        if d <= 0:
            raise ValdiffError("Axiom 1 witnesses are requested for d > 0")
        return Transseries.x()

    def _solve_shifted(self, alphas):
        return solve_linear_difference(list(alphas), Transseries.constant(-1), self.order)


# ---- parsing ----

def _mentions(node: Node, name: str) -> bool:
    if isinstance(node, Sym):
        return node.name == name
    if isinstance(node, BinOp):
        return _mentions(node.left, name) or _mentions(node.right, name)
    if isinstance(node, Neg):
        return _mentions(node.operand, name)
    if isinstance(node, Pow):
        return _mentions(node.base, name) or _mentions(node.exponent, name)
    if isinstance(node, Call):
        return any(_mentions(a, name) for a in node.args)
    if isinstance(node, Tup):
        return any(_mentions(a, name) for a in node.items)
    return False


def _polynomial_exponent(value: Transseries, node: Node) -> Tuple[EPart, Fraction]:
    """Split an exponent q + c (q ∈ xℚ[x], c ∈ ℚ)."""
    if not value.is_exact():
        raise ParseError("the exponent of e must be exact", node.line, node.column)
    coeffs: Dict[int, Fraction] = {}
    for m, c in value.terms:
        r = c.as_rational()
        if not m.is_flat() or m.xpow < 0 or m.xpow.denominator != 1 or r is None:
            raise ParseError("the exponent of e must be a polynomial in x with rational coefficients", node.line, node.column)
        coeffs[int(m.xpow)] = r
    const = coeffs.pop(0, Fraction(0))
    degree = max(coeffs, default=0)
    return _trim(coeffs.get(k, 0) for k in range(1, degree + 1)), const


class TransEvaluator(ExpressionEvaluator):
    """x, x^(a), e^(q(x)), E and E^(r) combined with + - * / and integer powers."""

    def __init__(self, prec: FlatPrec = None):
        self.prec = prec

    def number(self, value: Fraction) -> Transseries:
        return Transseries.constant(value)

    def symbol(self, node: Sym) -> Transseries:
        if node.name == "x":
            return Transseries.x()
        if node.name in ("E", "e"):
            return Transseries.constant(ExpGroupElem.exp(1))
        return super().symbol(node)

    def power(self, node: Pow) -> Transseries:
        if isinstance(node.base, Sym) and node.base.name == "x":
            return Transseries.x(rational_value(node.exponent))
        if isinstance(node.base, Sym) and node.base.name == "E":
            return Transseries.constant(ExpGroupElem.exp(rational_value(node.exponent)))
        if isinstance(node.base, Sym) and node.base.name == "e":
            epart, const = _polynomial_exponent(self.evaluate(node.exponent), node.exponent)
            if len(epart) > DEPTH_CAP:
                raise ParseError(f"exponent degree exceeds the depth cap {DEPTH_CAP}", node.line, node.column)
            return Transseries.monomial(0, epart, ExpGroupElem.exp(const))
        return super().power(node)

    def div(self, a: Transseries, b: Transseries, node) -> Transseries:
        if b.is_zero():
            raise ParseError("division by zero", node.line, node.column)
        return a * b.invert(None if self.prec is None else self.prec - (a.top() or 0))


def parse_transseries(text: str, prec: FlatPrec = None) -> Transseries:
    return TransEvaluator(prec).evaluate(parse_expression(text)).truncate(prec)


def _d_linear(node: Node) -> Tuple[Fraction, Fraction]:
    """(a, b) with node = a·D + b."""
    if isinstance(node, Num):
        return Fraction(0), node.value
    if isinstance(node, Sym) and node.name == "D":
        return Fraction(1), Fraction(0)
    if isinstance(node, Neg):
        a, b = _d_linear(node.operand)
        return -a, -b
    if isinstance(node, BinOp):
        (a1, b1), (a2, b2) = _d_linear(node.left), _d_linear(node.right)
        if node.op == "+":
            return a1 + a2, b1 + b2
        if node.op == "-":
            return a1 - a2, b1 - b2
        if node.op == "*" and (a1 == 0 or a2 == 0):
            return a1 * b2 + a2 * b1, b1 * b2
        if node.op == "/" and a2 == 0 and b2 != 0:
            return a1 / b2, b1 / b2
    raise ParseError("shift exponents must read k*D", node.line, node.column)


class OperatorEvaluator(ExpressionEvaluator):
    """Difference operators such as "e^D - 1", "x*e^(2D) + 1", "(e^D - 1)^2"."""

    def __init__(self):
        self.series = TransEvaluator()

    def number(self, value: Fraction) -> DifferenceOperator:
        return DifferenceOperator.constant(value)

    def symbol(self, node: Sym) -> DifferenceOperator:
        if node.name == "D":
            raise ParseError("D may only appear as e^(kD)", node.line, node.column)
        return DifferenceOperator.constant(self.series.symbol(node))

    def power(self, node: Pow) -> DifferenceOperator:
        if isinstance(node.base, Sym) and node.base.name == "e" and _mentions(node.exponent, "D"):
            a, b = _d_linear(node.exponent)
            if b != 0 or a.denominator != 1 or a < 0:
                raise ParseError("shift exponents must read k*D with an integer k ≥ 0", node.line, node.column)
            return DifferenceOperator.shift(int(a))
        if not _mentions(node, "D"):
            return DifferenceOperator.constant(self.series.evaluate(node))
        return super().power(node)

    def div(self, a: DifferenceOperator, b: DifferenceOperator, node) -> DifferenceOperator:
        if len(b.coeffs) != 1 or b.coeffs[0].is_zero():
            raise ParseError("operators may only be divided by nonzero functions", node.line, node.column)
        return DifferenceOperator.constant(b.coeffs[0].invert()) * a


def parse_operator(text: str) -> DifferenceOperator:
    op = OperatorEvaluator().evaluate(parse_expression(text))
    if op.is_zero():
        raise ZeroOperator(f"operator '{text}' is zero")
    return op
