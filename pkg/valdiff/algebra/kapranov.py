"""
Lifting tropical zeros of ordinary polynomials to actual roots, and a
classical Newton–Puiseux root finder used as an independent check.
"""

import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from algebra.ordgroup import GroupElem, gmax, gmin
from algebra.resfield import grid_points
from algebra.series import HahnSeries, Prec
from algebra.sigmapoly import SigmaPoly
from algebra.tropical import is_tropical_zero, newton_polygon, reduced_polynomial
from utils.errors import (
    NotATropicalZero,
    PrecisionExhausted,
    ResidueRootUnsupported,
    ValdiffError,
)
from utils.logger import log_debug, log_info

MAX_STEPS = int(os.getenv("VALDIFF_KAPRANOV_MAX_STEPS", "64"))
GRID_LIMIT = 6


@dataclass
class LiftStep:
    point: HahnSeries
    value: Optional[GroupElem]
    delta: Optional[GroupElem]

    def to_json(self) -> dict:
        return {
            "point": self.point.to_json(),
            "value": None if self.value is None else self.value.to_json(),
            "delta": None if self.delta is None else self.delta.to_json(),
        }


@dataclass
class LiftReport:
    root: Tuple[HahnSeries, ...] = ()
    steps: List[LiftStep] = field(default_factory=list)
    exact: bool = False

    def to_json(self) -> dict:
        return {
            "root": [r.to_json() for r in self.root],
            "steps": [s.to_json() for s in self.steps],
            "exact": self.exact,
        }


def _coefficient_cap(f: SigmaPoly, gamma: GroupElem, prec: GroupElem) -> GroupElem:
    """Coefficient precision that keeps F(b) known below `prec` when v(b) = γ."""
    low = f.group.zero()
    if gamma < low:
        low = gamma * f.degree()
    return prec - low


def _shifted_coeffs(f: SigmaPoly, b: HahnSeries) -> List[HahnSeries]:
    """g_i = F_(i)(b) for i ≥ 1 (index 0 left as F(b))."""
    translated = f.translate(b)
    return [translated.coefficient((i,)) for i in range(f.degree() + 1)]


def _lift_univariate(f: SigmaPoly, b: HahnSeries, report: LiftReport) -> HahnSeries:
    fld, group = f.fld, f.group
    previous: Optional[GroupElem] = None
    for step in range(MAX_STEPS):
        g = _shifted_coeffs(f, b)
        value = g[0]
        if value.is_zero():
            report.steps.append(LiftStep(b, None, None))
            report.exact = value.is_exact()
            log_debug(f"[KAPRANOV_LIFT] root reached after {step} step(s)")
            return b
        w, lead = value.leading()
        if previous is not None and not w > previous:
            raise ValdiffError(f"lifting stalled: v(F(b)) = {w} did not increase")
        previous = w
        # δ with G_v(δ) = w for G = Σ_{i≥1} g_i x^i
        candidates = [(w - c.valuation()) / i for i, c in enumerate(g) if i and not c.is_zero()]
        if not candidates:
            raise ValdiffError("shifted polynomial has no nonconstant terms")
        delta = gmax(candidates)
        h_bar = [fld.one()] + [fld.zero()] * (len(g) - 1)
        for i, c in enumerate(g):
            if i and not c.is_zero():
                vc, lc = c.leading()
                if vc + delta * i == w:
                    h_bar[i] = lc / lead
        roots = fld.roots(h_bar)
        if not roots:
            raise ResidueRootUnsupported(f"H̄ + 1 has no root in {fld.name} at step {step}")
        report.steps.append(LiftStep(b, w, delta))
        b = b + HahnSeries.monomial(group, fld, delta, roots[0][0])
    raise PrecisionExhausted(f"no root modulo precision after {MAX_STEPS} lifting steps")


def _irregular_start(F: SigmaPoly, gammas: Sequence[GroupElem]) -> Tuple[HahnSeries, ...]:
    """a with v(a) = γ and (ā) a zero of the reduced polynomial of F at t^γ."""
    group, fld = F.group, F.fld
    base = tuple(HahnSeries.monomial(group, fld, g) for g in gammas)
    reduced = reduced_polynomial(F, base)
    for head in grid_points(fld, F.nvars - 1, GRID_LIMIT):
        last = reduced.restrict(head)
        try:
            coeffs = last.univariate_coeffs()
        except ValdiffError:
            continue
        if len(coeffs) < 2:
            continue
        roots = fld.nonzero_roots(coeffs)
        if roots:
            residues = tuple(head) + (roots[0][0],)
            return tuple(HahnSeries.monomial(group, fld, g, r) for g, r in zip(gammas, residues))
    raise ResidueRootUnsupported("no residue point of the reduced polynomial found in the search grid")


def lift_root_report(F: SigmaPoly, gamma, prec: Prec = None) -> LiftReport:
    if F.order != 0:
        raise ValdiffError("tropical lifting is defined for ordinary polynomials")
    gammas = (gamma,) if isinstance(gamma, GroupElem) else tuple(gamma)
    if not is_tropical_zero(F, gammas):
        raise NotATropicalZero(f"{', '.join(str(g) for g in gammas)} is not a tropical zero")
    log_info(f"[KAPRANOV_LIFT] lifting γ={', '.join(str(g) for g in gammas)}")
    start = _irregular_start(F, gammas)
    head, b0 = start[:-1], start[-1]
    f = F.restrict_last(head) if F.nvars > 1 else F
    if prec is not None:
        f = f.truncate(_coefficient_cap(f, gammas[-1], prec))
    report = LiftReport()
    b = _lift_univariate(f, b0, report)
    report.root = tuple(head) + (b,)
    return report


def lift_root(F: SigmaPoly, gamma, prec: Prec = None) -> Tuple[HahnSeries, ...]:
    """A root of F with value γ, modulo the precision cap."""
    return lift_root_report(F, gamma, prec).root


# ---- Newton–Puiseux ----

def _edge_polynomial(coeffs: List[HahnSeries], start: int, end: int, gamma: GroupElem, fv: GroupElem, fld):
    out = []
    for i in range(start, end + 1):
        c = coeffs[i]
        if not c.is_zero() and c.valuation() + gamma * i == fv:
            out.append(c.leading_coef())
        else:
            out.append(fld.zero())
    return out


def _np_branch(f: SigmaPoly, partial: HahnSeries, floor: Optional[GroupElem], target: GroupElem,
               work: GroupElem, out: List[Tuple[HahnSeries, int]]):
    coeffs = f.univariate_coeffs()
    lowest = next(i for i, c in enumerate(coeffs) if not c.is_zero())
    if lowest:
        # partial is itself a root (exactly, or modulo the working precision)
        out.append((partial, lowest))
    for edge in newton_polygon(f):
        if floor is not None and not edge.gamma > floor:
            continue
        if edge.gamma >= target:
            out.append((partial, edge.multiplicity))
            continue
        fv = coeffs[edge.start].valuation() + edge.gamma * edge.start
        poly = _edge_polynomial(coeffs, edge.start, edge.end, edge.gamma, fv, f.fld)
        roots = f.fld.nonzero_roots(poly)
        if sum(m for _, m in roots) != edge.multiplicity:
            raise ResidueRootUnsupported(f"edge polynomial at γ={edge.gamma} does not split over {f.fld.name}")
        for r, _ in roots:
            step = HahnSeries.monomial(f.group, f.fld, edge.gamma, r)
            _np_branch(f.translate(step).truncate(work), partial + step, edge.gamma, target, work, out)


def np_all_roots(f: SigmaPoly, prec: GroupElem) -> List[Tuple[HahnSeries, int]]:
    """All roots with multiplicity, each known modulo t^prec."""
    coeffs = f.univariate_coeffs()
    if len(coeffs) < 2:
        raise ValdiffError("np_all_roots needs a nonconstant polynomial")
    group, fld = f.group, f.fld
    zero = group.zero()
    edges = newton_polygon(f)
    low = gmin(e.gamma for e in edges) if edges else zero
    depth = prec - low if low < zero else prec
    top = gmax([c.valuation() for c in coeffs if not c.is_zero()] + [zero])
    work = top + depth * f.degree()
    found: List[Tuple[HahnSeries, int]] = []
    _np_branch(f.truncate(work), HahnSeries.zero(group, fld), None, prec, work, found)
    merged: List[Tuple[HahnSeries, int]] = []
    for root, mult in found:
        root = root.truncate(prec)
        for idx, (other, m) in enumerate(merged):
            if other == root:
                merged[idx] = (other, m + mult)
                break
        else:
            merged.append((root, mult))
    log_info(f"[KAPRANOV_ROOTS] {sum(m for _, m in merged)} root(s) of degree-{f.degree()} polynomial")
    return merged


def root_value(root: HahnSeries) -> Optional[GroupElem]:
    return root.terms[0][0] if root.terms else None
