# valdiff/api/routes.py

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, Field

from algebra.hensel import config, solve
from algebra.kapranov import lift_root_report, np_all_roots, root_value
from algebra.ordgroup import GroupAut, GroupElem, ValueGroup, parse_matrix
from algebra.resfield import ResField, make_field
from algebra.series import HahnSeries, parse_series, rv_of
from algebra.sigmapoly import SigmaPoly, parse_sigma_poly
from algebra.transseries import TRANS_ORDER, parse_operator, parse_transseries, solve_linear_difference
from algebra.tropical import (
    PcTrace,
    adjust_pc,
    adjustment_values,
    is_regular,
    is_tropical_zero,
    tropical_zero_multiplicities,
    trop_val,
)
from utils.errors import DimensionMismatch, ValdiffError
from utils.logger import log_info

load_dotenv()

DEFAULT_PREC = Fraction(os.getenv("VALDIFF_DEFAULT_PREC", "10"))
SCHEMA_VERSION = "1"


# -----------------------------
# Pydantic Models
# -----------------------------
class Envelope(BaseModel):
    schema_version: str = Field(default=SCHEMA_VERSION, serialization_alias="schema")


class TermModel(BaseModel):
    gamma: List[str]
    coef: str


class SeriesModel(BaseModel):
    terms: List[TermModel]
    prec: Optional[List[str]] = None


class SeriesResponse(Envelope):
    terms: List[TermModel]
    prec: Optional[List[str]] = None
    text: str


class RVResponse(Envelope):
    infinite: bool
    gamma: Optional[List[str]] = None
    coef: Optional[str] = None


class TropicalModel(Envelope):
    value: List[str]
    minimizers: List[List[int]]
    tropical_zero: bool


class TropicalZeroModel(BaseModel):
    gamma: List[str]
    multiplicity: int


class TropicalZerosResponse(Envelope):
    zeros: List[TropicalZeroModel]


class RegularityResponse(Envelope):
    regular: bool
    tropical_value: Optional[List[str]] = None


class TraceModel(Envelope):
    entries: List[SeriesModel]
    gammas: List[List[str]]
    adjustment_values: List[List[List[str]]] = []


class ConfigModel(Envelope):
    in_configuration: bool
    gamma: Optional[List[str]] = None
    witness: Optional[List[int]] = None
    diagnostics: List[str] = []


class IterateModel(BaseModel):
    point: SeriesModel
    value: Optional[List[str]] = None
    gamma: Optional[List[str]] = None


class RefineReportModel(Envelope):
    iterates: List[IterateModel]
    outcome: str
    exact: bool
    message: str
    root: Optional[SeriesModel] = None


class LiftStepModel(BaseModel):
    point: SeriesModel
    value: Optional[List[str]] = None
    delta: Optional[List[str]] = None


class LiftReportModel(Envelope):
    root: List[SeriesModel]
    steps: List[LiftStepModel]
    exact: bool


class RootModel(BaseModel):
    root: SeriesModel
    multiplicity: int
    value: Optional[List[str]] = None
    text: str


class RootsModel(Envelope):
    roots: List[RootModel]


class TransTermModel(BaseModel):
    xpow: str
    epart: List[str]
    coef: str


class TransseriesModel(Envelope):
    terms: List[TransTermModel]
    prec: Optional[str] = None
    text: str
    operator: str
    residual_vanishes: bool


class ErrorModel(BaseModel):
    kind: str
    message: str
    location: Optional[Dict[str, Any]] = None


class ErrorResponse(Envelope):
    error: ErrorModel


# -----------------------------
# Field / group instances
# -----------------------------
@dataclass(frozen=True)
class Instances:
    group: ValueGroup
    fld: ResField
    prec: GroupElem


def build_instances(residue: str = "q", gamma_dim: Optional[int] = None,
                    gamma_sigma: Optional[str] = None, prec: Optional[str] = None) -> Instances:
    """Residue field, value group and precision cap selected by the global flags."""
    if gamma_sigma:
        aut = GroupAut(parse_matrix(gamma_sigma))
        if gamma_dim is not None and gamma_dim != aut.dim:
            raise DimensionMismatch(f"--gamma-dim {gamma_dim} does not match a {aut.dim}x{aut.dim} automorphism")
        group = ValueGroup(aut)
    else:
        group = ValueGroup.rational(gamma_dim or 1)
    fld = make_field(residue)
    cap = group.parse(prec) if prec else group.unit() * DEFAULT_PREC
    return Instances(group, fld, cap)


def _split(text: str) -> List[str]:
    return [part.strip() for part in text.split(";") if part.strip()]


def _series(text: str, inst: Instances) -> HahnSeries:
    return parse_series(text, inst.group, inst.fld, inst.prec)


def _point(text: str, inst: Instances) -> Tuple[HahnSeries, ...]:
    return tuple(_series(part, inst) for part in _split(text))


def _poly(text: str, inst: Instances) -> SigmaPoly:
    return parse_sigma_poly(text, inst.group, inst.fld, inst.prec)


def _gammas(text: str, inst: Instances) -> Tuple[GroupElem, ...]:
    return tuple(inst.group.parse(part) for part in _split(text))


def _series_response(a: HahnSeries) -> SeriesResponse:
    return SeriesResponse(**a.to_json(), text=str(a))


# -----------------------------
# series
# -----------------------------
def series_eval(args, inst: Instances) -> SeriesResponse:
    a = _series(args.expr, inst)
    log_info(f"[SERIES_EVAL] {args.expr} -> {a}")
    return _series_response(a)


def series_invert(args, inst: Instances) -> SeriesResponse:
    a = _series(args.expr, inst)
    inv = a.invert(inst.prec)
    log_info(f"[SERIES_INVERT] 1/({a}) -> {inv}")
    return _series_response(inv.truncate(inst.prec))


def series_sigma(args, inst: Instances) -> SeriesResponse:
    a = _series(args.expr, inst)
    return _series_response(a.sigma(args.times))


def series_rv(args, inst: Instances) -> RVResponse:
    r = rv_of(_series(args.expr, inst))
    if r.is_infinite():
        return RVResponse(infinite=True)
    return RVResponse(infinite=False, gamma=r.gamma.to_json(), coef=inst.fld.to_str(r.coef))


# -----------------------------
# trop
# -----------------------------
def trop_eval(args, inst: Instances) -> TropicalModel:
    F = _poly(args.poly, inst)
    gammas = _gammas(args.gamma, inst)
    value, minimizers = trop_val(F, gammas)
    return TropicalModel(
        value=value.to_json(),
        minimizers=[list(k) for k in minimizers],
        tropical_zero=is_tropical_zero(F, gammas),
    )


def trop_zeros(args, inst: Instances) -> TropicalZerosResponse:
    F = _poly(args.poly, inst)
    zeros = [TropicalZeroModel(gamma=g.to_json(), multiplicity=m) for g, m in tropical_zero_multiplicities(F)]
    return TropicalZerosResponse(zeros=zeros)


def trop_regular(args, inst: Instances) -> RegularityResponse:
    F = _poly(args.poly, inst)
    point = _point(args.point, inst)
    regular = is_regular(point, F)
    value = None
    if all(p.terms for p in point):
        value, _ = trop_val(F, tuple(p.valuation() for p in point))
    return RegularityResponse(regular=regular, tropical_value=None if value is None else value.to_json())


def trop_adjust(args, inst: Instances) -> TraceModel:
    trace = PcTrace(_point(args.trace, inst))
    limit = _series(args.limit, inst)
    polys = [_poly(text, inst) for text in args.poly]
    adjusted = adjust_pc(trace, limit, polys)
    values = [[g.to_json() for g in adjustment_values(adjusted, limit, F)] for F in polys]
    return TraceModel(**adjusted.to_json(), adjustment_values=values)


# -----------------------------
# hensel
# -----------------------------
def hensel_config(args, inst: Instances) -> ConfigModel:
    cfg = config(_poly(args.poly, inst), _series(args.start, inst))
    if cfg is None:
        return ConfigModel(in_configuration=False)
    return ConfigModel(in_configuration=True, **cfg.to_json())


def hensel_solve(args, inst: Instances) -> RefineReportModel:
    G = _poly(args.poly, inst)
    report = solve(G, _series(args.start, inst), max_iter=args.max_iter, prec=inst.prec)
    root = report.root
    return RefineReportModel(**report.to_json(), root=None if root is None else root.to_json())


# -----------------------------
# kapranov
# -----------------------------
def kapranov_lift(args, inst: Instances) -> LiftReportModel:
    F = _poly(args.poly, inst)
    gammas = _gammas(args.gamma, inst)
    report = lift_root_report(F, gammas, inst.prec)
    return LiftReportModel(**report.to_json())


def kapranov_roots(args, inst: Instances) -> RootsModel:
    F = _poly(args.poly, inst)
    roots = []
    for root, mult in np_all_roots(F, inst.prec):
        value = root_value(root)
        roots.append(RootModel(
            root=root.to_json(),
            multiplicity=mult,
            value=None if value is None else value.to_json(),
            text=str(root),
        ))
    return RootsModel(roots=roots)


# -----------------------------
# transum
# -----------------------------
def transum(args, inst: Optional[Instances] = None) -> TransseriesModel:
    op = parse_operator(args.op)
    rhs = parse_transseries(args.rhs)
    order = args.order if args.order is not None else TRANS_ORDER
    f = solve_linear_difference(op, rhs, order)
    residual = op.apply(f) - rhs
    data = f.to_json()
    return TransseriesModel(
        terms=data["terms"],
        prec=data["prec"],
        text=str(f),
        operator=str(op),
        residual_vanishes=residual.is_zero(),
    )


Handler = Callable[[Any, Optional[Instances]], Envelope]

HANDLERS: Dict[Tuple[str, Optional[str]], Handler] = {
    ("series", "eval"): series_eval,
    ("series", "invert"): series_invert,
    ("series", "sigma"): series_sigma,
    ("series", "rv"): series_rv,
    ("trop", "eval"): trop_eval,
    ("trop", "zeros"): trop_zeros,
    ("trop", "regular"): trop_regular,
    ("trop", "adjust"): trop_adjust,
    ("hensel", "config"): hensel_config,
    ("hensel", "solve"): hensel_solve,
    ("kapranov", "lift"): kapranov_lift,
    ("kapranov", "roots"): kapranov_roots,
    ("transum", None): transum,
}


def dispatch(args) -> Envelope:
    key = (args.command, getattr(args, "action", None))
    handler = HANDLERS.get(key)
    if handler is None:
        raise ValdiffError(f"no handler for {' '.join(k for k in key if k)}")
    log_info(f"[CLI] {' '.join(k for k in key if k)}")
    if args.command == "transum":
        return handler(args, None)
    inst = build_instances(args.residue, args.gamma_dim, args.gamma_sigma, args.prec)
    return handler(args, inst)


def error_response(error: ValdiffError) -> ErrorResponse:
    return ErrorResponse(error=ErrorModel(**error.to_dict()))


def internal_error_response(error: Exception) -> ErrorResponse:
    return ErrorResponse(error=ErrorModel(kind="internal-error", message=f"{type(error).__name__}: {error}"))
