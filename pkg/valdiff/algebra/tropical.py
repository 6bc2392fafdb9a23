"""
Tropical evaluation F_v(γ) = min_i {v(a_i) + σ^i(γ)}, regularity, Newton
polygons of ordinary polynomials, and adjustment of finite pc-traces.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from algebra.ordgroup import GroupElem
from algebra.resfield import Key, ResiduePoly
from algebra.series import HahnSeries
from algebra.sigmapoly import SigmaPoly, shift_profile
from utils.errors import PrecisionExhausted, TraceTooShort, ValdiffError, ZeroSeriesError
from utils.logger import log_debug, log_info

Point = Union[HahnSeries, Sequence[HahnSeries]]
Gammas = Union[GroupElem, Sequence[GroupElem]]


def _as_tuple(value, nvars: int) -> tuple:
    items = (value,) if isinstance(value, (HahnSeries, GroupElem)) else tuple(value)
    if len(items) != nvars:
        raise ValdiffError(f"expected {nvars} coordinate(s), got {len(items)}")
    return items


def monomial_shift(F: SigmaPoly, key: Key, gammas: Sequence[GroupElem]) -> GroupElem:
    """Σ_var σ^{i_var}(γ_var): the value of σ(a)^i when v(a) = γ."""
    total = F.group.zero()
    for var, gamma in enumerate(gammas):
        total = total + F.group.sigma_multi(shift_profile(key, F.nvars, F.order, var), gamma)
    return total


def trop_val(F: SigmaPoly, gamma: Gammas) -> Tuple[GroupElem, List[Key]]:
    """F_v(γ) and the multi-indices attaining it (lex-sorted)."""
    if F.is_zero():
        raise ZeroSeriesError("tropicalization of the zero polynomial")
    gammas = _as_tuple(gamma, F.nvars)
    best: Optional[GroupElem] = None
    minimizers: List[Key] = []
    for key, c in F.coeffs:
        value = c.valuation() + monomial_shift(F, key, gammas)
        if best is None or value < best:
            best, minimizers = value, [key]
        elif value == best:
            minimizers.append(key)
    return best, sorted(minimizers)


def is_tropical_zero(F: SigmaPoly, gamma: Gammas) -> bool:
    _, minimizers = trop_val(F, gamma)
    return len(minimizers) >= 2


def is_regular(a: Point, F: SigmaPoly) -> bool:
    """v(F(a)) = F_v(v(a)); raises when the precision cannot decide."""
    point = _as_tuple(a, F.nvars)
    if any(p.is_zero() for p in point):
        if F.nvars == 1 and point[0].is_exact():
            # 0 is regular exactly when it is a root
            return F.constant_term().is_zero()
        raise PrecisionExhausted("a coordinate of the point is zero modulo precision")
    fv, _ = trop_val(F, tuple(p.valuation() for p in point))
    value = F.evaluate_tuple(point)
    if value.terms:
        return value.terms[0][0] == fv
    if value.prec is None:
        return False
    if value.prec <= fv:
        raise PrecisionExhausted(f"F(a) vanishes modulo t^{value.prec}, which does not reach F_v = {fv}")
    return False


def _reduction_divisor(G: SigmaPoly, fv: GroupElem, minimizers: List[Key]) -> HahnSeries:
    """d = lc(a_j)·t^{F_v} for the lex-smallest minimizer j."""
    lead = G.coefficient(minimizers[0]).leading_coef()
    return HahnSeries.monomial(G.group, G.fld, fv, lead)


def reduced_polynomial(F: SigmaPoly, a: Point) -> ResiduePoly:
    """Residue of F(a·x)/d with v(d) = F_v(v(a))."""
    point = _as_tuple(a, F.nvars)
    fv, minimizers = trop_val(F, tuple(p.valuation() for p in point))
    G = F.scale_compose(point)
    return G.divide_monomial(_reduction_divisor(G, fv, minimizers)).residue_reduce()


def irregular_by_reduction(F: SigmaPoly, a: Point, b: Point) -> bool:
    """For v(b) = 0: a·b is irregular iff b̄ is a zero of the reduced polynomial of F at a."""
    bs = _as_tuple(b, F.nvars)
    return F.fld.is_zero(reduced_polynomial(F, a).evaluate(tuple(p.residue() for p in bs)))


def make_regular(polys: Union[SigmaPoly, Sequence[SigmaPoly]], gamma: GroupElem,
                 group=None, fld=None) -> HahnSeries:
    """α·t^γ regular for every polynomial given, α from the nonvanishing oracle."""
    polys = [polys] if isinstance(polys, SigmaPoly) else list(polys)
    if not polys and (group is None or fld is None):
        raise ValdiffError("make_regular without polynomials needs the group and field")
    group = group or polys[0].group
    fld = fld or polys[0].fld
    b = HahnSeries.monomial(group, fld, gamma)
    product: Optional[ResiduePoly] = None
    for F in polys:
        if F.nvars != 1:
            raise ValdiffError("make_regular works with one-variable σ-polynomials")
        fv, minimizers = trop_val(F, gamma)
        G = F.scale_compose(b)
        reduced = G.divide_monomial(_reduction_divisor(G, fv, minimizers)).residue_reduce()
        product = reduced if product is None else product * reduced
    if product is None:
        product = ResiduePoly.from_dict(fld, 1, 0, {(0,): fld.one()})
    alpha = fld.find_nonvanishing(product)
    log_debug(f"[MAKE_REGULAR] γ={gamma} α={fld.to_str(alpha)}")
    return HahnSeries.monomial(group, fld, gamma, alpha)


# ---- Newton polygons of ordinary one-variable polynomials ----

@dataclass(frozen=True)
class NewtonEdge:
    gamma: GroupElem
    multiplicity: int
    start: int
    end: int


def _below_or_on(p1, p2, p3) -> bool:
    """p2 lies on or above the segment p1-p3 (points are (i, value))."""
    (x1, v1), (x2, v2), (x3, v3) = p1, p2, p3
    return (v2 - v1) * (x3 - x1) >= (v3 - v1) * (x2 - x1)


def newton_polygon(f: SigmaPoly) -> List[NewtonEdge]:
    """Lower hull of {(i, v(a_i))}; each edge carries the tropical zero it defines."""
    coeffs = f.univariate_coeffs()
    points = [(i, c.valuation()) for i, c in enumerate(coeffs) if not c.is_zero()]
    if not points:
        raise ZeroSeriesError("Newton polygon of the zero polynomial")
    hull: List[Tuple[int, GroupElem]] = []
    for p in points:
        while len(hull) >= 2 and _below_or_on(hull[-2], hull[-1], p):
            hull.pop()
        hull.append(p)
    edges = []
    for (i1, v1), (i2, v2) in zip(hull, hull[1:]):
        edges.append(NewtonEdge((v1 - v2) / (i2 - i1), i2 - i1, i1, i2))
    return edges


def tropical_zeros_uni(f: SigmaPoly) -> List[GroupElem]:
    return sorted((e.gamma for e in newton_polygon(f)), key=lambda g: g.coords)


def tropical_zero_multiplicities(f: SigmaPoly) -> List[Tuple[GroupElem, int]]:
    return sorted(((e.gamma, e.multiplicity) for e in newton_polygon(f)), key=lambda gm: gm[0].coords)


# ---- finite pc-traces ----

@dataclass(frozen=True)
class PcTrace:
    entries: Tuple[HahnSeries, ...]

    @property
    def gammas(self) -> List[GroupElem]:
        """γ_ρ = v(a_{ρ+1} − a_ρ)."""
        return [(b - a).valuation() for a, b in zip(self.entries, self.entries[1:])]

    def window_start(self, length: Optional[int] = None) -> int:
        """First index of the last ⌈N/2⌉ positions, where eventual properties are checked."""
        n = len(self.gammas) if length is None else length
        return n - (n + 1) // 2

    def is_pc(self) -> bool:
        gammas = self.gammas
        tail = gammas[self.window_start(len(gammas)):]
        return all(x < y for x, y in zip(tail, tail[1:]))

    def is_pseudolimit(self, a: HahnSeries) -> bool:
        """v(a − a_ρ) = γ_ρ across the window."""
        gammas = self.gammas
        for rho in range(self.window_start(len(gammas)), len(gammas)):
            diff = a - self.entries[rho]
            if diff.is_zero() or diff.valuation() != gammas[rho]:
                return False
        return True

    def equivalent(self, other: "PcTrace") -> bool:
        """Same successive-difference values on the common window."""
        mine, theirs = self.gammas, other.gammas
        n = min(len(mine), len(theirs))
        start = self.window_start(n)
        return mine[start:n] == theirs[start:n]

    def width_bound(self) -> Optional[GroupElem]:
        """The largest recorded γ_ρ; every pseudolimit agrees with the trace below it."""
        gammas = self.gammas
        return gammas[-1] if gammas else None

    def to_json(self) -> dict:
        return {
            "entries": [e.to_json() for e in self.entries],
            "gammas": [g.to_json() for g in self.gammas],
        }


def _shifted_difference(F: SigmaPoly, a: HahnSeries) -> SigmaPoly:
    """G(x) = F(a + x) − F(a)."""
    translated = F.translate(a)
    return translated.like([(k, c) for k, c in translated.coeffs if any(k)])


def adjust_pc(trace: PcTrace, a: HahnSeries, polys: Sequence[SigmaPoly]) -> PcTrace:
    """b_ρ = a_{ρ+1} + c_ρ, c_ρ regular of value γ_ρ for every G = F(a+x) − F(a)."""
    if len(trace.entries) < 3:
        raise TraceTooShort(f"pc-trace of length {len(trace.entries)}; at least 3 entries are needed")
    if not trace.is_pc():
        raise ValdiffError("trace values γ_ρ are not strictly increasing on the window")
    if not trace.is_pseudolimit(a):
        raise ValdiffError("the given series is not a pseudolimit of the trace")
    shifted = [_shifted_difference(F, a) for F in polys if not F.is_constant()]
    log_info(f"[TROP_ADJUST] adjusting {len(trace.entries)} entries against {len(shifted)} polynomial(s)")
    adjusted = []
    for rho, gamma in enumerate(trace.gammas):
        c = make_regular(shifted, gamma, group=a.group, fld=a.fld)
        adjusted.append(trace.entries[rho + 1] + c)
    return PcTrace(tuple(adjusted))


def adjustment_values(trace: PcTrace, a: HahnSeries, F: SigmaPoly) -> List[GroupElem]:
    """v(F(b_ρ) − F(a)) along the trace."""
    target = F.eval(a)
    return [(F.eval(b) - target).valuation() for b in trace.entries]
