"""
σ-polynomials over a Hahn field.

Coefficients are stored against dense multi-indices: for `nvars` variables
and `order` n the key has nvars·(n+1) entries, entry var·(n+1)+k holding the
exponent of σ^k(x_var). A one-variable σ-polynomial therefore uses exactly the
multi-index i ∈ ℕ^{n+1}; an ordinary polynomial in m variables has order 0.
"""

from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from algebra.ordgroup import ValueGroup
from algebra.resfield import (
    ExpGroupField,
    Key,
    ResField,
    ResiduePoly,
    key_length,
    key_order,
    key_position,
    repad_key,
)
from algebra.series import HahnSeries, Prec, SeriesEvaluator
from utils.errors import ConstantPolynomial, DimensionMismatch, ParseError, ValdiffError
from utils.text_parser import Call, Node, Pow, Sym, parse_expression, rational_value


def key_add(a: Key, b: Key) -> Key:
    return tuple(x + y for x, y in zip(a, b))


def key_sub(a: Key, b: Key) -> Key:
    return tuple(x - y for x, y in zip(a, b))


def key_degree(key: Key) -> int:
    return sum(key)


def unit_key(nvars: int, order: int, var: int, shift: int) -> Key:
    out = [0] * key_length(nvars, order)
    out[key_position(var, shift, order)] = 1
    return tuple(out)


def shift_profile(key: Key, nvars: int, order: int, var: int = 0) -> Tuple[int, ...]:
    """The exponents (i_0..i_n) of one variable: the τ = Σ i_k σ^k acting on Γ."""
    return tuple(key[key_position(var, k, order)] for k in range(order + 1))


@dataclass(frozen=True, eq=False)
class SigmaPoly:
    group: ValueGroup
    fld: ResField
    nvars: int
    order: int
    coeffs: Tuple[Tuple[Key, HahnSeries], ...]

    @classmethod
    def make(cls, group: ValueGroup, fld: ResField, nvars: int, order: int,
             coeffs: Iterable[Tuple[Key, HahnSeries]]) -> "SigmaPoly":
        acc: Dict[Key, HahnSeries] = {}
        for key, c in coeffs:
            if len(key) != key_length(nvars, order):
                raise DimensionMismatch(f"multi-index {key} does not fit {nvars} variable(s) of order {order}")
            acc[key] = acc[key] + c if key in acc else c
        kept = {k: c for k, c in acc.items() if not c.is_zero()}
        used = max((key_order(k, nvars, order) for k in kept), default=0)
        if used < order:
            kept = {_shrink_key(k, nvars, order, used): c for k, c in kept.items()}
            order = used
        return cls(group, fld, nvars, order, tuple(sorted(kept.items(), key=lambda kc: kc[0])))

    @classmethod
    def constant(cls, c: HahnSeries, nvars: int = 1, order: int = 0) -> "SigmaPoly":
        return cls.make(c.group, c.fld, nvars, order, [((0,) * key_length(nvars, order), c)])

    @classmethod
    def variable(cls, group: ValueGroup, fld: ResField, nvars: int = 1, var: int = 0, shift: int = 0) -> "SigmaPoly":
        one = HahnSeries.constant(group, fld, 1)
        return cls.make(group, fld, nvars, shift, [(unit_key(nvars, shift, var, shift), one)])

    @classmethod
    def from_univariate(cls, coeffs: Sequence[HahnSeries]) -> "SigmaPoly":
        """Ordinary polynomial Σ coeffs[i] y^i."""
        if not coeffs:
            raise ValdiffError("empty coefficient list")
        first = coeffs[0]
        return cls.make(first.group, first.fld, 1, 0, [((i,), c) for i, c in enumerate(coeffs)])

    def like(self, coeffs: Iterable[Tuple[Key, HahnSeries]], order: Optional[int] = None) -> "SigmaPoly":
        return SigmaPoly.make(self.group, self.fld, self.nvars, self.order if order is None else order, coeffs)

    # ---- inspection ----
    def is_zero(self) -> bool:
        return not self.coeffs

    def is_constant(self) -> bool:
        return all(not any(k) for k, _ in self.coeffs)

    def is_monomial(self) -> bool:
        return len(self.coeffs) == 1

    def is_ordinary(self) -> bool:
        return self.order == 0

    def as_dict(self) -> Dict[Key, HahnSeries]:
        return dict(self.coeffs)

    def coefficient(self, key: Key) -> HahnSeries:
        for k, c in self.coeffs:
            if k == key:
                return c
        return HahnSeries.zero(self.group, self.fld)

    def constant_term(self) -> HahnSeries:
        return self.coefficient((0,) * key_length(self.nvars, self.order))

    def degree(self) -> int:
        return max((key_degree(k) for k, _ in self.coeffs), default=0)

    def complexity(self) -> Tuple[int, int, int]:
        """Ordering key for comparing σ-polynomials: (order, total degree, monomial count)."""
        return (self.order, self.degree(), len(self.coeffs))

    def unit_keys(self) -> List[Key]:
        """All |i| = 1 multi-indices, lexicographically ordered."""
        return sorted(
            unit_key(self.nvars, self.order, var, shift)
            for var in range(self.nvars)
            for shift in range(self.order + 1)
        )

    def univariate_coeffs(self) -> List[HahnSeries]:
        if self.nvars != 1 or self.order != 0:
            raise ValdiffError("not an ordinary one-variable polynomial")
        out = [HahnSeries.zero(self.group, self.fld) for _ in range(self.degree() + 1)]
        for k, c in self.coeffs:
            out[k[0]] = c
        return out

    def _repad(self, order: int) -> Dict[Key, HahnSeries]:
        return {repad_key(k, self.nvars, self.order, order): c for k, c in self.coeffs}

    def _check(self, other: "SigmaPoly"):
        if other.nvars != self.nvars:
            raise DimensionMismatch(f"σ-polynomials in {self.nvars} and {other.nvars} variables")

    # ---- ring operations ----
    def __add__(self, other: "SigmaPoly") -> "SigmaPoly":
        self._check(other)
        order = max(self.order, other.order)
        return self.like(list(self._repad(order).items()) + list(other._repad(order).items()), order)

    def __neg__(self) -> "SigmaPoly":
        return self.like([(k, -c) for k, c in self.coeffs])

    def __sub__(self, other: "SigmaPoly") -> "SigmaPoly":
        return self + (-other)

    def __mul__(self, other: "SigmaPoly") -> "SigmaPoly":
        self._check(other)
        order = max(self.order, other.order)
        left, right = self._repad(order), other._repad(order)
        return self.like([(key_add(ka, kb), ca * cb) for ka, ca in left.items() for kb, cb in right.items()], order)

    def scale(self, c: HahnSeries) -> "SigmaPoly":
        return self.like([(k, c * x) for k, x in self.coeffs])

    def divide_monomial(self, d: HahnSeries) -> "SigmaPoly":
        """Divide every coefficient by an exact monomial c·t^γ."""
        if not d.is_monomial():
            raise ValdiffError("divide_monomial needs an exact monomial")
        return self.scale(d.invert())

    def truncate(self, prec: Prec) -> "SigmaPoly":
        return self.like([(k, c.truncate(prec)) for k, c in self.coeffs])

    # ---- evaluation ----
    def _shifted_powers(self, point: Sequence[HahnSeries]):
        cache: Dict[Tuple[int, int, int], HahnSeries] = {}
        shifts = [[p.sigma(k) for k in range(self.order + 1)] for p in point]

        def power(var: int, shift: int, e: int) -> HahnSeries:
            if (var, shift, e) not in cache:
                base = shifts[var][shift]
                cache[(var, shift, e)] = base if e == 1 else power(var, shift, e - 1) * base
            return cache[(var, shift, e)]

        return power

    def monomial_value(self, key: Key, power) -> Optional[HahnSeries]:
        value = None
        for var in range(self.nvars):
            for shift in range(self.order + 1):
                e = key[key_position(var, shift, self.order)]
                if e:
                    p = power(var, shift, e)
                    value = p if value is None else value * p
        return value

    def evaluate_tuple(self, point: Sequence[HahnSeries]) -> HahnSeries:
        if len(point) != self.nvars:
            raise DimensionMismatch(f"σ-polynomial in {self.nvars} variables evaluated at {len(point)} values")
        power = self._shifted_powers(point)
        total = HahnSeries.zero(self.group, self.fld)
        for key, c in self.coeffs:
            m = self.monomial_value(key, power)
            total = total + (c if m is None else c * m)
        return total

    def eval(self, a: HahnSeries) -> HahnSeries:
        """F(a) = Σ a_i σ(a)^i."""
        return self.evaluate_tuple((a,))

    def __call__(self, *point: HahnSeries) -> HahnSeries:
        return self.evaluate_tuple(point)

    # ---- Taylor expansion ----
    def taylor_polys(self) -> Dict[Key, "SigmaPoly"]:
        """F_(i) with F(x+y) = Σ_i F_(i)(x)·σ(y)^i, by binomial expansion of each monomial."""
        return dict(self._taylor_parts)

    @cached_property
    def _taylor_parts(self) -> Dict[Key, "SigmaPoly"]:
        parts: Dict[Key, List[Tuple[Key, HahnSeries]]] = {}
        for key, c in self.coeffs:
            ranges = [range(e + 1) for e in key]
            for i in _index_box(ranges):
                factor = 1
                for j_k, i_k in zip(key, i):
                    factor *= comb(j_k, i_k)
                parts.setdefault(i, []).append((key_sub(key, i), c.scale(factor)))
        out = {}
        for i, terms in parts.items():
            poly = self.like(terms)
            if not poly.is_zero():
                out[i] = poly
        return out

    def taylor_decomp(self, a) -> Dict[Key, HahnSeries]:
        """i ↦ F_(i)(a); a is a series or a tuple of series."""
        point = (a,) if isinstance(a, HahnSeries) else tuple(a)
        out = {}
        for i, poly in self.taylor_polys().items():
            value = poly.evaluate_tuple(point)
            if not value.is_zero() or value.prec is not None:
                out[i] = value
        return out

    def translate(self, a) -> "SigmaPoly":
        """F(a + x)."""
        point = (a,) if isinstance(a, HahnSeries) else tuple(a)
        return self.like([(i, poly.evaluate_tuple(point)) for i, poly in self.taylor_polys().items()])

    def scale_compose(self, b) -> "SigmaPoly":
        """F(b·x): the coefficient at i becomes a_i·σ(b)^i."""
        point = (b,) if isinstance(b, HahnSeries) else tuple(b)
        for p in point:
            if p.is_zero():
                raise ValdiffError("scale_compose needs a nonzero scaling")
        power = self._shifted_powers(point)
        out = []
        for key, c in self.coeffs:
            m = self.monomial_value(key, power)
            out.append((key, c if m is None else c * m))
        return self.like(out)

    def residue_reduce(self) -> ResiduePoly:
        return ResiduePoly.from_dict(
            self.fld, self.nvars, self.order, {k: c.residue() for k, c in self.coeffs}
        )

    def restrict_last(self, values: Sequence[HahnSeries]) -> "SigmaPoly":
        """F^a(y) = F(a_1, …, a_{n-1}, y) for an ordinary polynomial."""
        if self.order != 0 or len(values) != self.nvars - 1:
            raise DimensionMismatch("restrict_last needs an ordinary polynomial and nvars-1 values")
        pads = [HahnSeries.constant(self.group, self.fld, 1)]
        point = list(values) + pads
        power = self._shifted_powers(point)
        out = []
        for key, c in self.coeffs:
            head = key[:-1] + (0,)
            m = self.monomial_value(head, power)
            out.append(((key[-1],), c if m is None else c * m))
        return SigmaPoly.make(self.group, self.fld, 1, 0, out)

    # ---- rendering ----
    def _monomial_str(self, key: Key, names: Sequence[str]) -> str:
        factors = []
        for var in range(self.nvars):
            for shift in range(self.order + 1):
                e = key[key_position(var, shift, self.order)]
                if e:
                    base = names[var] if shift == 0 else f"s{shift}({names[var]})"
                    factors.append(base if e == 1 else f"{base}^{e}")
        return "*".join(factors)

    def to_string(self, names: Optional[Sequence[str]] = None) -> str:
        names = names or default_names(self.nvars)
        if not self.coeffs:
            return "0"
        parts = []
        for key, c in self.coeffs:
            mono = self._monomial_str(key, names)
            coef = str(c)
            if not mono:
                parts.append(f"({coef})")
            elif coef == "1":
                parts.append(mono)
            else:
                parts.append(f"({coef})*{mono}")
        return " + ".join(parts)

    def __str__(self) -> str:
        return self.to_string()


def _shrink_key(key: Key, nvars: int, old_order: int, new_order: int) -> Key:
    out = [0] * key_length(nvars, new_order)
    for var in range(nvars):
        for shift in range(new_order + 1):
            out[key_position(var, shift, new_order)] = key[key_position(var, shift, old_order)]
    return tuple(out)


def _index_box(ranges: Sequence[range]) -> Iterable[Key]:
    if not ranges:
        yield ()
        return
    for head in ranges[0]:
        for tail in _index_box(ranges[1:]):
            yield (head,) + tail


def default_names(nvars: int) -> List[str]:
    if nvars == 1:
        return ["x"]
    if nvars <= 3:
        return ["x", "y", "z"][:nvars]
    return [f"x{i + 1}" for i in range(nvars)]


def hensax1_polynomial(group: ValueGroup, fld: ResField, alphas: Sequence[Any]) -> SigmaPoly:
    """1 + α₀x + ⋯ + αₙσⁿ(x) with constant (value 0) lifts of the residue data."""
    order = len(alphas) - 1
    one = HahnSeries.constant(group, fld, 1)
    coeffs = [((0,) * (order + 1), one)]
    for k, alpha in enumerate(alphas):
        coeffs.append((unit_key(1, order, 0, k), HahnSeries.constant(group, fld, alpha)))
    return SigmaPoly.make(group, fld, 1, order, coeffs)


# ---- text grammar: "s0(x)*s1(x) - t^(1)" ----

def _scan(node: Node, out: Dict[str, int], calls: List[int]):
    if isinstance(node, Sym):
        out.setdefault(node.name, len(out))
        return
    if isinstance(node, Call):
        calls.append(int(node.name[1:]))
        if len(node.args) != 1 or not isinstance(node.args[0], Sym):
            raise ParseError(f"{node.name}(...) takes a single variable name", node.line, node.column)
    if isinstance(node, Pow):
        _scan(node.base, out, calls)
        return
    for child in getattr(node, "__dict__", {}).values():
        if isinstance(child, Node):
            _scan(child, out, calls)
        elif isinstance(child, tuple):
            for item in child:
                if isinstance(item, Node):
                    _scan(item, out, calls)


class PolyEvaluator(SeriesEvaluator):
    def __init__(self, group: ValueGroup, fld: ResField, variables: Sequence[str], order: int, prec: Prec = None):
        super().__init__(group, fld, prec)
        self.variables = list(variables)
        self.nvars = len(self.variables)
        self.order = order

    def wrap(self, series: HahnSeries) -> SigmaPoly:
        return SigmaPoly.constant(series, self.nvars, self.order)

    def var(self, name: str, shift: int, node: Node) -> SigmaPoly:
        if name not in self.variables:
            raise ParseError(f"unknown variable '{name}'", node.line, node.column)
        one = HahnSeries.constant(self.group, self.fld, 1)
        key = unit_key(self.nvars, self.order, self.variables.index(name), shift)
        return SigmaPoly.make(self.group, self.fld, self.nvars, self.order, [(key, one)])

    def number(self, value):
        return self.wrap(super().number(value))

    def symbol(self, node: Sym):
        if node.name in self.variables:
            return self.var(node.name, 0, node)
        return self.wrap(super().symbol(node))

    def call(self, node: Call):
        return self.var(node.args[0].name, int(node.name[1:]), node)

    def power(self, node: Pow):
        if isinstance(node.base, Sym) and node.base.name == self.variable:
            return self.wrap(HahnSeries.monomial(self.group, self.fld, self.gamma_of(node.exponent)))
        if isinstance(node.base, Sym) and node.base.name == "E" and isinstance(self.fld, ExpGroupField):
            return self.wrap(HahnSeries.constant(self.group, self.fld, self.fld.parse(f"E^({rational_value(node.exponent)})")))
        exp = rational_value(node.exponent)
        if exp.denominator != 1:
            raise ParseError("only integer powers are allowed here", node.line, node.column)
        base = self.evaluate(node.base)
        if exp < 0 and not base.is_constant():
            raise ParseError("variables only take non-negative integer powers", node.line, node.column)
        result = self.wrap(HahnSeries.constant(self.group, self.fld, 1))
        for _ in range(abs(int(exp))):
            result = result * base
        return self.div(self.number(1), result, node) if exp < 0 else result

    def div(self, a: SigmaPoly, b: SigmaPoly, node):
        if not b.is_constant() or b.is_zero():
            raise ParseError("division is only defined by nonzero constants", node.line, node.column)
        c = b.constant_term()
        if c.is_monomial():
            return a.scale(c.invert())
        if self.prec is None:
            raise ParseError("division by a non-monomial constant needs a precision cap", node.line, node.column)
        return a.scale(c.invert(self.prec))


def parse_sigma_poly(text: str, group: ValueGroup, fld: ResField, prec: Prec = None,
                     variables: Optional[Sequence[str]] = None) -> SigmaPoly:
    """Parse a σ-polynomial. Variables default to every free name other than
    `t` and the residue symbols, ordered alphabetically."""
    tree = parse_expression(text)
    residue_names = {"t"}
    found: Dict[str, int] = {}
    calls: List[int] = []
    _scan(tree, found, calls)
    for name in list(found):
        if name == "t":
            continue
        try:
            fld.parse(name)
            residue_names.add(name)
        except ValdiffError:
            pass
    if variables is None:
        variables = sorted(n for n in found if n not in residue_names)
    if not variables:
        variables = ["x"]
    order = max(calls, default=0)
    poly = PolyEvaluator(group, fld, variables, order, prec).evaluate(tree)
    return poly.truncate(prec)


def require_nonconstant(poly: SigmaPoly):
    if poly.is_zero() or poly.is_constant():
        raise ConstantPolynomial(f"expected a nonconstant σ-polynomial, got {poly}")
