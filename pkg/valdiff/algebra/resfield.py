"""
Residue difference fields 𝕜 with σ̄, and the oracles the algorithms consume:
nonvanishing search (Axiom 1), linear difference solving (Axiom 2) and
ordinary root finding.

Shipped carriers:
  QField         ℚ, σ̄ = id                       (elements: Fraction)
  RatShift       ℚ(s), σ̄(f)(s) = f(s+1)           (elements: sympy FracElement)
  ExpGroupField  Frac ℚ[E^ℚ], σ̄ = id               (elements: ExpGroupElem)
"""

import itertools
import math
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import sympy
from sympy import QQ, Rational, Symbol
from sympy.solvers.recurr import rsolve_ratio

from utils.errors import (
    Axiom1Unsupported,
    OracleUnsupported,
    ParseError,
    ResidueRootUnsupported,
    ValdiffError,
    ZeroOperator,
)
from utils.logger import log_debug, log_info
from utils.text_parser import ExpressionEvaluator, Num, Pow, Sym, parse_expression, rational_value

NONVANISHING_SEARCH_CAP = int(os.getenv("VALDIFF_NONVANISHING_CAP", "10000"))
RATIONAL_SEARCH_SET = int(os.getenv("VALDIFF_RATIONAL_SEARCH_SET", "64"))

Key = Tuple[int, ...]

_Y = Symbol("y")


def key_length(nvars: int, order: int) -> int:
    return nvars * (order + 1)


def key_position(var: int, shift: int, order: int) -> int:
    return var * (order + 1) + shift


def repad_key(key: Key, nvars: int, old_order: int, new_order: int) -> Key:
    """Re-lay a dense multi-index for a larger order."""
    if old_order == new_order:
        return key
    out = [0] * key_length(nvars, new_order)
    for var in range(nvars):
        for shift in range(old_order + 1):
            out[key_position(var, shift, new_order)] = key[key_position(var, shift, old_order)]
    return tuple(out)


def key_order(key: Key, nvars: int, order: int) -> int:
    """Largest shift actually used by a monomial (0 for constants)."""
    used = 0
    for var in range(nvars):
        for shift in range(order + 1):
            if key[key_position(var, shift, order)]:
                used = max(used, shift)
    return used


def _fraction_from_sympy(value) -> Fraction:
    value = sympy.nsimplify(value) if not isinstance(value, sympy.Rational) else value
    if not isinstance(value, sympy.Rational):
        raise ValdiffError(f"expected a rational number, got {value}")
    return Fraction(int(value.p), int(value.q))


class ResField(ABC):
    """Exact residue difference field. Elements support + - * / and ==."""

    name = "abstract"
    has_axiom1 = False
    axiom2_max_order: Optional[int] = 0
    has_root_finding = False

    # ---- carrier ----
    @abstractmethod
    def coerce(self, value) -> Any:
        ...

    def zero(self):
        return self.coerce(0)

    def one(self):
        return self.coerce(1)

    def is_zero(self, a) -> bool:
        return a == self.zero()

    def eq(self, a, b) -> bool:
        return self.is_zero(a - b)

    def normalize(self, a):
        return a

    def sigma(self, a, k: int = 1):
        return a

    def to_str(self, a) -> str:
        return str(a)

    @abstractmethod
    def parse(self, text: str):
        ...

    def to_sympy(self, a):
        raise NotImplementedError

    def from_sympy(self, expr):
        raise NotImplementedError

    # ---- oracles ----
    @abstractmethod
    def candidates(self) -> Iterator[Any]:
        """Nonzero elements tried, in order, by the nonvanishing search."""

    def find_nonvanishing(self, poly: "ResiduePoly"):
        """α ≠ 0 with F(α) ≠ 0 for a nonzero σ̄-polynomial F in one variable."""
        if poly.is_zero():
            raise ValdiffError("find_nonvanishing needs a nonzero polynomial")
        for count, alpha in enumerate(self.candidates()):
            if not self.is_zero(poly.evaluate((alpha,))):
                log_debug(f"[NONVANISHING] {self.name}: candidate #{count} works")
                return alpha
        raise Axiom1Unsupported(f"{self.name}: polynomial {poly} vanishes on the whole search set")

    def solve_linear(self, alphas: Sequence[Any]):
        """x with 1 + Σ αᵢ σ̄^i(x) = 0; OracleUnsupported when out of reach."""
        alphas = [self.normalize(a) for a in alphas]
        support = [i for i, a in enumerate(alphas) if not self.is_zero(a)]
        if not support:
            raise ZeroOperator("linear difference equation with all-zero coefficients")
        low, high = support[0], support[-1]
        if self.axiom2_max_order is not None and high - low > self.axiom2_max_order:
            raise OracleUnsupported(
                f"{self.name}: residue equation of order {high - low} exceeds supported order {self.axiom2_max_order}"
            )
        # y = σ̄^low(x) turns the equation into one starting at order 0
        shifted = alphas[low:high + 1]
        if len(shifted) == 1:
            y = -self.one() / shifted[0]
        else:
            y = self._solve_shifted(shifted)
        x = self.sigma(y, -low) if low else y
        check = self.one()
        for i, a in enumerate(alphas):
            if not self.is_zero(a):
                check = check + a * self.sigma(x, i)
        if not self.is_zero(self.normalize(check)):
            raise OracleUnsupported(f"{self.name}: candidate solution failed verification")
        return x

    def _solve_shifted(self, alphas: Sequence[Any]):
        raise OracleUnsupported(f"{self.name}: no solver for order {len(alphas) - 1}")

    def roots(self, coeffs: Sequence[Any]) -> List[Tuple[Any, int]]:
        """Carrier roots (with multiplicity) of Σ coeffs[i] y^i."""
        coeffs = list(coeffs)
        while coeffs and self.is_zero(coeffs[-1]):
            coeffs.pop()
        if len(coeffs) < 2:
            raise ValdiffError("root finding needs a nonconstant polynomial")
        if len(coeffs) == 2:
            return [(-coeffs[0] / coeffs[1], 1)]
        if not self.has_root_finding:
            raise ResidueRootUnsupported(f"{self.name}: no root finding beyond degree 1")
        expr = sum((self.to_sympy(c) * _Y ** i for i, c in enumerate(coeffs)), sympy.Integer(0))
        numer, _ = sympy.fraction(sympy.together(expr))
        found = []
        _, factors = sympy.factor_list(sympy.expand(numer))
        for fac, mult in factors:
            if sympy.degree(fac, _Y) == 1:
                lead, const = sympy.Poly(fac, _Y).all_coeffs()
                found.append((self.from_sympy(sympy.cancel(-const / lead)), int(mult)))
        return sorted(found, key=lambda rm: self.to_str(rm[0]))

    def find_root(self, coeffs: Sequence[Any]):
        found = self.roots(coeffs)
        if not found:
            raise ResidueRootUnsupported(f"{self.name}: polynomial has no root in the carrier")
        return found[0][0]

    def nonzero_roots(self, coeffs: Sequence[Any]) -> List[Tuple[Any, int]]:
        return [(r, m) for r, m in self.roots(coeffs) if not self.is_zero(r)]


class QField(ResField):
    """ℚ with trivial σ̄. Root finding is limited to rational roots."""

    name = "q"
    has_axiom1 = False
    axiom2_max_order = 0
    has_root_finding = True

    def coerce(self, value) -> Fraction:
        if isinstance(value, Fraction):
            return value
        if isinstance(value, sympy.Basic):
            return _fraction_from_sympy(value)
        return Fraction(value)

    def is_zero(self, a) -> bool:
        return a == 0

    def parse(self, text: str) -> Fraction:
        return rational_value(parse_expression(text))

    def to_sympy(self, a):
        return Rational(a.numerator, a.denominator)

    def from_sympy(self, expr) -> Fraction:
        return _fraction_from_sympy(expr)

    def to_str(self, a) -> str:
        return str(a)

    def candidates(self) -> Iterator[Fraction]:
        for n in range(1, RATIONAL_SEARCH_SET + 1):
            yield Fraction(n)
            yield Fraction(-n)

    def axiom1_witness(self, d: int):
        raise Axiom1Unsupported("σ̄ is the identity on ℚ")


class RatShift(ResField):
    """ℚ(s) with σ̄(f(s)) = f(s+1); σ̄ has infinite order (Axiom 1)."""

    name = "ratshift"
    has_axiom1 = True
    axiom2_max_order = 1
    has_root_finding = True

    def __init__(self, var: str = "s"):
        self.var = Symbol(var)
        self.domain = QQ.frac_field(self.var)

    def coerce(self, value):
        if isinstance(value, Fraction):
            return self.domain.from_sympy(Rational(value.numerator, value.denominator))
        if isinstance(value, int):
            return self.domain.from_sympy(sympy.Integer(value))
        if isinstance(value, sympy.Basic):
            return self.domain.from_sympy(value)
        return value

    def is_zero(self, a) -> bool:
        return a == self.domain.zero

    def sigma(self, a, k: int = 1):
        if k == 0:
            return a
        return _shift_frac(self.domain, self.var, a, k)

    def gen(self):
        return self.domain.from_sympy(self.var)

    def to_sympy(self, a):
        return self.domain.to_sympy(a)

    def from_sympy(self, expr):
        return self.domain.from_sympy(sympy.cancel(expr))

    def to_str(self, a) -> str:
        return str(self.domain.to_sympy(a)).replace("**", "^")

    def parse(self, text: str):
        return _RatShiftEvaluator(self).evaluate(parse_expression(text))

    def candidates(self) -> Iterator[Any]:
        yield self.one()
        s = self.gen()
        for n in range(NONVANISHING_SEARCH_CAP):
            yield s + self.coerce(n)

    def axiom1_witness(self, d: int):
        """y with σ̄^d(y) ≠ y."""
        if d <= 0:
            raise ValdiffError("Axiom 1 witnesses are requested for d > 0")
        return self.gen()

    def _solve_shifted(self, alphas: Sequence[Any]):
        exprs = [sympy.cancel(self.to_sympy(a)) for a in alphas]
        denom = sympy.Integer(1)
        for e in exprs:
            denom = sympy.lcm(denom, sympy.fraction(e)[1])
        coeffs = [sympy.expand(sympy.cancel(e * denom)) for e in exprs]
        rhs = sympy.expand(-denom)
        log_debug(f"[AXIOM2] rational solutions of {coeffs} y = {rhs}")
        try:
            solution = rsolve_ratio(coeffs, rhs, self.var)
        except Exception as e:  # sympy raises assorted errors on degenerate input
            raise OracleUnsupported(f"{self.name}: rational solver failed: {e}")
        if solution is None:
            raise OracleUnsupported(f"{self.name}: no rational solution of the residue equation")
        free = [c for c in solution.free_symbols if c != self.var]
        solution = solution.subs({c: 0 for c in free})
        return self.from_sympy(solution)


@lru_cache(maxsize=8192)
def _shift_frac(domain, var, a, k: int):
    return domain.from_sympy(sympy.cancel(domain.to_sympy(a).subs(var, var + k)))


class _RatShiftEvaluator(ExpressionEvaluator):
    def __init__(self, fld: RatShift):
        self.fld = fld

    def number(self, value: Fraction):
        return self.fld.coerce(value)

    def symbol(self, node: Sym):
        if node.name == str(self.fld.var):
            return self.fld.gen()
        return super().symbol(node)

    def div(self, a, b, node):
        if self.fld.is_zero(b):
            raise ParseError("division by zero", node.line, node.column)
        return a / b


# ---- ℚ[E^ℚ] and its fraction field ----

ExpTerms = Tuple[Tuple[Fraction, Fraction], ...]


def _ep_clean(d: Dict[Fraction, Fraction]) -> ExpTerms:
    return tuple(sorted(((e, c) for e, c in d.items() if c != 0), key=lambda ec: ec[0]))


def _ep_mul(a: ExpTerms, b: ExpTerms) -> ExpTerms:
    out: Dict[Fraction, Fraction] = {}
    for ea, ca in a:
        for eb, cb in b:
            out[ea + eb] = out.get(ea + eb, Fraction(0)) + ca * cb
    return _ep_clean(out)


def _ep_add(a: ExpTerms, b: ExpTerms, sign: int = 1) -> ExpTerms:
    out = dict(a)
    for e, c in b:
        out[e] = out.get(e, Fraction(0)) + sign * c
    return _ep_clean(out)


_Z = Symbol("z")


def _ep_cancel(num: ExpTerms, den: ExpTerms) -> Tuple[ExpTerms, ExpTerms]:
    """num/den over their gcd in ℚ[z], z = E^(1/L), with den made monic."""
    exps = [e for e, _ in num + den]
    scale = math.lcm(*(e.denominator for e in exps))
    low = min(exps)

    def to_poly(terms: ExpTerms) -> sympy.Poly:
        return sympy.Poly.from_dict(
            {(int((e - low) * scale),): Rational(c.numerator, c.denominator) for e, c in terms}, _Z, domain=QQ
        )

    def from_poly(poly: sympy.Poly) -> ExpTerms:
        return _ep_clean({Fraction(k, scale): _fraction_from_sympy(c) for (k,), c in poly.terms()})

    p, q = to_poly(num), to_poly(den)
    g = p.gcd(q)
    p, q = p.exquo(g), q.exquo(g)
    lc = q.LC()
    return from_poly(p.quo_ground(lc)), from_poly(q.monic())


@dataclass(frozen=True, eq=False)
class ExpGroupElem:
    """num/den with num, den finite sums Σ qᵢ E^{rᵢ}; den is never zero.
    A monomial denominator is always divided out; any other is reduced
    against num and made monic."""

    num: ExpTerms
    den: ExpTerms = ((Fraction(0), Fraction(1)),)

    def __post_init__(self):
        if not self.den:
            raise ZeroDivisionError("zero denominator in ExpGroupElem")
        if not self.num:
            object.__setattr__(self, "den", ((Fraction(0), Fraction(1)),))
        elif len(self.den) > 1:
            num, den = _ep_cancel(self.num, self.den)
            object.__setattr__(self, "num", num)
            object.__setattr__(self, "den", den)
        if len(self.den) == 1 and self.den != ((Fraction(0), Fraction(1)),):
            (r, c), = self.den
            object.__setattr__(self, "num", tuple((e - r, q / c) for e, q in self.num))
            object.__setattr__(self, "den", ((Fraction(0), Fraction(1)),))

    @classmethod
    def rational(cls, q) -> "ExpGroupElem":
        q = Fraction(q)
        return cls(((Fraction(0), q),) if q else ())

    @classmethod
    def exp(cls, r, q=1) -> "ExpGroupElem":
        """q·E^r."""
        q = Fraction(q)
        return cls(((Fraction(r), q),) if q else ())

    @staticmethod
    def _lift(other) -> "ExpGroupElem":
        if isinstance(other, ExpGroupElem):
            return other
        if isinstance(other, (int, Fraction)):
            return ExpGroupElem.rational(other)
        return NotImplemented

    def is_zero(self) -> bool:
        return not self.num

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        if self.den == other.den:
            return ExpGroupElem(_ep_add(self.num, other.num), self.den)
        return ExpGroupElem(
            _ep_add(_ep_mul(self.num, other.den), _ep_mul(other.num, self.den)),
            _ep_mul(self.den, other.den),
        )

    __radd__ = __add__

    def __neg__(self):
        return ExpGroupElem(tuple((e, -c) for e, c in self.num), self.den)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return ExpGroupElem(_ep_mul(self.num, other.num), _ep_mul(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        if other.is_zero():
            raise ZeroDivisionError("division by zero in ExpGroupElem")
        return ExpGroupElem(_ep_mul(self.num, other.den), _ep_mul(self.den, other.num))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __eq__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return False
        return _ep_mul(self.num, other.den) == _ep_mul(other.num, self.den)

    def __pow__(self, n: int) -> "ExpGroupElem":
        result = ExpGroupElem.rational(1)
        for _ in range(abs(n)):
            result = result * self
        return result if n >= 0 else ExpGroupElem.rational(1) / result

    def as_rational(self) -> Optional[Fraction]:
        if self.is_zero():
            return Fraction(0)
        if self.den == ((Fraction(0), Fraction(1)),) and len(self.num) == 1 and self.num[0][0] == 0:
            return self.num[0][1]
        return None

    def __str__(self) -> str:
        num = _ep_str(self.num)
        if self.den == ((Fraction(0), Fraction(1)),):
            return num
        return f"({num})/({_ep_str(self.den)})"


def _ep_str(terms: ExpTerms) -> str:
    if not terms:
        return "0"
    parts = []
    for e, c in sorted(terms, key=lambda ec: -ec[0]):
        if e == 0:
            body = str(c)
        else:
            mono = f"E^({e})"
            body = mono if c == 1 else ("-" + mono if c == -1 else f"{c}*{mono}")
        parts.append(body)
    out = parts[0]
    for p in parts[1:]:
        out += " - " + p[1:] if p.startswith("-") else " + " + p
    return out


class ExpGroupField(ResField):
    """Fraction field of ℚ[e^ℚ] with σ̄ = id: coefficients of transseries."""

    name = "expgroup"
    has_axiom1 = False
    axiom2_max_order = 0
    has_root_finding = False

    def coerce(self, value) -> ExpGroupElem:
        if isinstance(value, ExpGroupElem):
            return value
        if isinstance(value, sympy.Basic):
            value = _fraction_from_sympy(value)
        return ExpGroupElem.rational(value)

    def is_zero(self, a) -> bool:
        return a.is_zero()

    def parse(self, text: str) -> ExpGroupElem:
        return ExpCoefEvaluator().evaluate(parse_expression(text))

    def candidates(self) -> Iterator[ExpGroupElem]:
        for n in range(1, RATIONAL_SEARCH_SET + 1):
            yield ExpGroupElem.rational(n)
            yield ExpGroupElem.rational(-n)


class ExpCoefEvaluator(ExpressionEvaluator):
    """Grammar for coefficients such as "3/2*E^(1/2) + 1"."""

    def number(self, value: Fraction):
        return ExpGroupElem.rational(value)

    def symbol(self, node: Sym):
        if node.name == "E":
            return ExpGroupElem.exp(1)
        return super().symbol(node)

    def div(self, a, b, node):
        if b.is_zero():
            raise ParseError("division by zero", node.line, node.column)
        return a / b

    def power(self, node: Pow):
        if isinstance(node.base, Sym) and node.base.name == "E":
            return ExpGroupElem.exp(rational_value(node.exponent))
        return super().power(node)


# ---- σ̄-polynomials over 𝕜 ----

@dataclass(frozen=True)
class ResiduePoly:
    """Σ c_i σ̄(x)^i over a residue field, dense multi-indices (see key_position)."""

    fld: ResField
    nvars: int
    order: int
    coeffs: Tuple[Tuple[Key, Any], ...] = field(default=())

    @classmethod
    def from_dict(cls, fld: ResField, nvars: int, order: int, coeffs: Dict[Key, Any]) -> "ResiduePoly":
        items = tuple(sorted(((k, fld.normalize(c)) for k, c in coeffs.items() if not fld.is_zero(c)), key=lambda kc: kc[0]))
        return cls(fld, nvars, order, items)

    def as_dict(self) -> Dict[Key, Any]:
        return dict(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def evaluate(self, point: Sequence[Any]):
        if len(point) != self.nvars:
            raise ValdiffError(f"expected a point with {self.nvars} coordinates")
        shifted = [[self.fld.sigma(p, k) for k in range(self.order + 1)] for p in point]
        total = self.fld.zero()
        for key, c in self.coeffs:
            term = c
            for var in range(self.nvars):
                for shift in range(self.order + 1):
                    e = key[key_position(var, shift, self.order)]
                    if e:
                        term = term * shifted[var][shift] ** e
            total = total + term
        return self.fld.normalize(total)

    def __mul__(self, other: "ResiduePoly") -> "ResiduePoly":
        order = max(self.order, other.order)
        out: Dict[Key, Any] = {}
        for ka, ca in self.coeffs:
            ka = repad_key(ka, self.nvars, self.order, order)
            for kb, cb in other.coeffs:
                kb = repad_key(kb, other.nvars, other.order, order)
                k = tuple(x + y for x, y in zip(ka, kb))
                out[k] = out.get(k, self.fld.zero()) + ca * cb
        return ResiduePoly.from_dict(self.fld, self.nvars, order, out)

    def univariate_coeffs(self) -> List[Any]:
        """Coefficient list (low to high) of an ordinary one-variable polynomial."""
        if self.nvars != 1 or any(key_order(k, 1, self.order) for k, _ in self.coeffs):
            raise ValdiffError("not an ordinary one-variable polynomial")
        degree = max((k[0] for k, _ in self.coeffs), default=0)
        out = [self.fld.zero()] * (degree + 1)
        for k, c in self.coeffs:
            out[k[0]] = c
        return out

    def restrict(self, values: Sequence[Any]) -> "ResiduePoly":
        """Ordinary polynomial: fix the first nvars-1 variables, keep the last."""
        if self.order != 0 or len(values) != self.nvars - 1:
            raise ValdiffError("restriction needs an ordinary polynomial and nvars-1 values")
        out: Dict[Key, Any] = {}
        for key, c in self.coeffs:
            term = c
            for var, val in enumerate(values):
                if key[var]:
                    term = term * val ** key[var]
            k = (key[-1],)
            out[k] = out.get(k, self.fld.zero()) + term
        return ResiduePoly.from_dict(self.fld, 1, 0, out)

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for key, c in self.coeffs:
            mono = []
            for var in range(self.nvars):
                for shift in range(self.order + 1):
                    e = key[key_position(var, shift, self.order)]
                    if e:
                        name = f"s{shift}(x{var + 1 if self.nvars > 1 else ''})"
                        mono.append(name if e == 1 else f"{name}^{e}")
            parts.append("*".join([f"({self.fld.to_str(c)})"] + mono))
        return " + ".join(parts)


def grid_points(fld: ResField, arity: int, limit: int) -> Iterator[Tuple[Any, ...]]:
    """Deterministic enumeration of nonzero residue tuples, smallest candidates first."""
    if arity == 0:
        yield ()
        return
    pool = list(itertools.islice(fld.candidates(), limit))
    for size in range(1, len(pool) + 1):
        for idx in itertools.product(range(size), repeat=arity):
            # each tuple once: it must use the newest candidate
            if size - 1 in idx:
                yield tuple(pool[i] for i in idx)


def make_field(name: str) -> ResField:
    fields = {"q": QField, "ratshift": RatShift, "expgroup": ExpGroupField}
    if name not in fields:
        raise ValdiffError(f"unknown residue field '{name}' (choose from {', '.join(fields)})")
    log_info(f"[RESFIELD] using residue field {name}")
    return fields[name]()
