"""
σ-hensel configurations and the Newton refinement step.

(G, a) is in configuration when some |i| = 1 and γ satisfy
  (i)  v(G(a)) = v(G_(i)(a)) + σ^i γ ≤ v(G_(j)(a)) + σ^j γ  for |j| = 1
  (ii) v(G_(j)(a)) + σ^j γ < v(G_(j+l)(a)) + σ^{j+l} γ     for j, l ≠ 0, G_(j) ≠ 0
"""

import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from algebra.ordgroup import GroupElem, ValueGroup
from algebra.resfield import Key, ResField
from algebra.series import HahnSeries, Prec
from algebra.sigmapoly import SigmaPoly, hensax1_polynomial, require_nonconstant, shift_profile
from utils.errors import OracleUnsupported, PrecisionExhausted, RefinementStalled, ValdiffError
from utils.logger import log_debug, log_info, log_warning

MAX_ITER = int(os.getenv("VALDIFF_MAX_ITER", "64"))

ROOT_FOUND = "root-found"
PRECISION_EXHAUSTED = "precision-exhausted"
ORACLE_UNSUPPORTED = "oracle-unsupported"
CONFIG_LOST = "config-lost"
ITERATION_CAP = "iteration-cap"


@dataclass(frozen=True)
class HenselConfig:
    gamma: GroupElem
    witness: Key
    diagnostics: List[str] = field(default_factory=list, compare=False)

    def to_json(self) -> dict:
        return {"gamma": self.gamma.to_json(), "witness": list(self.witness), "diagnostics": list(self.diagnostics)}


@dataclass
class Iterate:
    point: HahnSeries
    value: Optional[GroupElem]
    gamma: Optional[GroupElem]

    def to_json(self) -> dict:
        return {
            "point": self.point.to_json(),
            "value": None if self.value is None else self.value.to_json(),
            "gamma": None if self.gamma is None else self.gamma.to_json(),
        }


@dataclass
class RefineReport:
    iterates: List[Iterate] = field(default_factory=list)
    outcome: str = ITERATION_CAP
    exact: bool = False
    message: str = ""

    @property
    def root(self) -> Optional[HahnSeries]:
        return self.iterates[-1].point if self.outcome == ROOT_FOUND else None

    def to_json(self) -> dict:
        return {
            "iterates": [it.to_json() for it in self.iterates],
            "outcome": self.outcome,
            "exact": self.exact,
            "message": self.message,
        }


def _derivative_values(G: SigmaPoly, a: HahnSeries) -> Dict[Key, HahnSeries]:
    """G_(j)(a) for every j ≠ 0 with G_(j) ≠ 0."""
    return {j: poly.eval(a) for j, poly in G.taylor_polys().items() if any(j)}


def _offset(group: ValueGroup, G: SigmaPoly, key: Key, gamma: GroupElem) -> GroupElem:
    return group.sigma_multi(shift_profile(key, G.nvars, G.order), gamma)


def _leq_componentwise(j: Key, m: Key) -> bool:
    return all(x <= y for x, y in zip(j, m))


def config(G: SigmaPoly, a: HahnSeries, value: Optional[HahnSeries] = None) -> Optional[HenselConfig]:
    """The configuration witness, or None when (G, a) is not in σ-hensel configuration.

    `value` is G(a) when the caller already has it."""
    require_nonconstant(G)
    if G.nvars != 1:
        raise ValdiffError("σ-hensel configurations are defined for one-variable σ-polynomials")
    if value is None:
        value = G.eval(a)
    if value.is_zero():
        return None
    v_ga = value.valuation()
    derivs = _derivative_values(G, a)
    if any(d.is_zero() for d in derivs.values()):
        # G_(j) ≠ 0 but G_(j)(a) = 0 already violates (ii)
        return None
    vals = {j: d.valuation() for j, d in derivs.items()}
    group = a.group
    for i in G.unit_keys():
        if i not in vals:
            continue
        k = shift_profile(i, G.nvars, G.order).index(1)
        gamma = group.sigma(v_ga - vals[i], -k)
        notes = [f"candidate i={list(i)} γ={gamma}"]
        ok = True
        for j in G.unit_keys():
            if j in vals and vals[j] + _offset(group, G, j, gamma) < v_ga:
                notes.append(f"(i) fails at j={list(j)}")
                ok = False
                break
        if ok:
            for j, vj in vals.items():
                lhs = vj + _offset(group, G, j, gamma)
                for m, vm in vals.items():
                    if m != j and _leq_componentwise(j, m) and not lhs < vm + _offset(group, G, m, gamma):
                        notes.append(f"(ii) fails at j={list(j)}, j+l={list(m)}")
                        ok = False
                        break
                if not ok:
                    break
        if ok:
            notes.append("(i) and (ii) hold")
            log_debug(f"[HENSEL_CONFIG] γ(G,a)={gamma} witness={i}")
            return HenselConfig(gamma, i, notes)
        log_debug(f"[HENSEL_CONFIG] {'; '.join(notes)}")
    return None


def is_unit_derivative_configuration(G: SigmaPoly, a: HahnSeries) -> bool:
    """v(G(a)) > 0 and every nonzero derivative value is a unit."""
    require_nonconstant(G)
    value = G.eval(a)
    if value.is_zero() or not value.valuation() > a.group.zero():
        return False
    return all(not d.is_zero() and d.valuation().is_zero() for d in _derivative_values(G, a).values())


def residue_equation(G: SigmaPoly, a: HahnSeries, cfg: HenselConfig) -> List[Any]:
    """ᾱ_k with 1 + Σ_k ᾱ_k σ̄^k(x) = 0 being the residue equation of the step."""
    group, fld = a.group, a.fld
    value = G.eval(a)
    v_ga, lead = value.leading()
    derivs = _derivative_values(G, a)
    alphas = [fld.zero() for _ in range(G.order + 1)]
    for i in G.unit_keys():
        d = derivs.get(i)
        if d is None:
            continue
        k = shift_profile(i, G.nvars, G.order).index(1)
        vd, lc = d.leading()
        if (vd + group.sigma(cfg.gamma, k) - v_ga).is_zero():
            alphas[k] = lc / lead
    return alphas


def refine_step(G: SigmaPoly, a: HahnSeries, cfg: HenselConfig) -> HahnSeries:
    """b = a + t^γ·u with ū solving the residue equation; v(G(b)) > v(G(a)) is checked."""
    alphas = residue_equation(G, a, cfg)
    u_bar = a.fld.solve_linear(alphas)
    b = a + HahnSeries.monomial(a.group, a.fld, cfg.gamma, u_bar)
    before = G.eval(a).valuation()
    after = G.eval(b)
    if after.terms and not after.terms[0][0] > before:
        raise RefinementStalled(f"refinement did not increase v(G): {after.terms[0][0]} vs {before}")
    if not after.terms and after.prec is not None and after.prec <= before:
        raise PrecisionExhausted("precision too low to certify v(G(b)) > v(G(a))")
    return b


def solve(G: SigmaPoly, a: HahnSeries, max_iter: int = MAX_ITER, prec: Prec = None) -> RefineReport:
    """Iterate refine_step until G vanishes modulo the precision cap."""
    if prec is not None:
        a = a.truncate(prec)
        G = G.truncate(prec)
    report = RefineReport()
    log_info(f"[HENSEL_SOLVE] start a={a} G={G}")
    for step in range(max_iter + 1):
        value = G.eval(a)
        if value.is_zero():
            report.iterates.append(Iterate(a, None, None))
            report.outcome = ROOT_FOUND
            report.exact = value.is_exact()
            report.message = f"G vanishes {'exactly' if report.exact else 'modulo t^' + str(value.prec)} after {step} step(s)"
            break
        cfg = config(G, a, value)
        report.iterates.append(Iterate(a, value.valuation(), None if cfg is None else cfg.gamma))
        if cfg is None:
            report.outcome = CONFIG_LOST
            report.message = f"(G, a) left σ-hensel configuration at step {step}"
            break
        if len(report.iterates) >= 2:
            prev = report.iterates[-2]
            if prev.gamma is not None and not cfg.gamma > prev.gamma:
                report.outcome = CONFIG_LOST
                report.message = "γ(G, b) failed to increase"
                break
        if step == max_iter:
            report.outcome = ITERATION_CAP
            report.message = f"stopped after {max_iter} iteration(s)"
            break
        try:
            a = refine_step(G, a, cfg)
        except OracleUnsupported as e:
            report.outcome = ORACLE_UNSUPPORTED
            report.message = e.message
            break
        except PrecisionExhausted as e:
            report.outcome = PRECISION_EXHAUSTED
            report.message = e.message
            break
        except RefinementStalled as e:
            report.outcome = CONFIG_LOST
            report.message = e.message
            break
        log_debug(f"[HENSEL_SOLVE] step {step + 1}: γ={cfg.gamma} b={a}")
    if report.outcome != ROOT_FOUND:
        log_warning(f"[HENSEL_SOLVE] {report.message}")
    log_info(f"[HENSEL_SOLVE] outcome={report.outcome} after {len(report.iterates)} iterate(s)")
    return report


def hensax1_roundtrip(group: ValueGroup, fld: ResField, alphas: Sequence[Any]):
    """Lift 1 + Σ αᵢσ̄^i(x) to G over K, refine once from 0, and return the residue of the step."""
    G = hensax1_polynomial(group, fld, alphas)
    zero = HahnSeries.zero(group, fld)
    cfg = config(G, zero)
    if cfg is None or not cfg.gamma.is_zero():
        raise ValdiffError("lifted polynomial is not in configuration at 0 with γ = 0")
    b = refine_step(G, zero, cfg)
    return b.residue()
