import random

import pytest
from fractions import Fraction

from algebra.ordgroup import GroupAut, ValueGroup
from algebra.resfield import QField, RatShift
from algebra.series import HahnSeries, parse_series
from algebra.sigmapoly import SigmaPoly, parse_sigma_poly
from algebra.tropical import (
    PcTrace,
    adjust_pc,
    adjustment_values,
    irregular_by_reduction,
    is_regular,
    is_tropical_zero,
    make_regular,
    newton_polygon,
    reduced_polynomial,
    trop_val,
    tropical_zero_multiplicities,
)
from utils.errors import PrecisionExhausted, TraceTooShort, ValdiffError

ORDER1_KEYS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def random_coefficient(rng, group, fld, terms=2):
    pairs = []
    for _ in range(rng.randint(1, terms)):
        c = rng.choice([-3, -2, -1, 1, 2, 3])
        pairs.append((group.unit() * Fraction(rng.randint(-4, 4), 2), fld.coerce(c)))
    series = HahnSeries.make(group, fld, pairs)
    return series if not series.is_zero() else HahnSeries.constant(group, fld, 1)


def random_sigma_poly(rng, group, fld, monomials=3):
    keys = rng.sample(ORDER1_KEYS, monomials)
    return SigmaPoly.make(group, fld, 1, 1, [(k, random_coefficient(rng, group, fld)) for k in keys])


def random_ordinary(rng, group, fld, degree):
    coeffs = []
    for i in range(degree + 1):
        if i in (0, degree) or rng.random() < 0.6:
            coeffs.append(((i,), random_coefficient(rng, group, fld, terms=1)))
    return SigmaPoly.make(group, fld, 1, 0, coeffs)


def random_element(rng, group, fld, terms=3, low=-4):
    pairs = []
    for _ in range(rng.randint(1, terms)):
        pairs.append((group.unit() * Fraction(rng.randint(low, 4), 2), fld.coerce(rng.choice([-2, -1, 1, 3]))))
    a = HahnSeries.make(group, fld, pairs)
    return a if not a.is_zero() else HahnSeries.constant(group, fld, 1)


class TestTropicalEvaluation:
    """Tests for F_v, minimizers and tropical zeros"""

    def test_trop_val(self):
        """t·x² + x − t² at γ = 1 is attained only by x."""
        group, fld = ValueGroup.rational(1), QField()
        F = parse_sigma_poly("t*x^2 + x - t^2", group, fld)
        value, minimizers = trop_val(F, group.elem(1))
        assert value == group.elem(1)
        assert minimizers == [(1,)]
        assert not is_tropical_zero(F, group.elem(1))
        assert is_tropical_zero(F, group.elem(-1))

    def test_trop_val_with_sigma(self):
        """σ = ·2 weights σ(x) twice: x + t·σ(x) ties at γ = −1."""
        group, fld = ValueGroup(GroupAut.scalar(2)), QField()
        F = parse_sigma_poly("s0(x) + t*s1(x)", group, fld)
        value, minimizers = trop_val(F, group.elem(-1))
        assert value == group.elem(-1)
        assert minimizers == [(0, 1), (1, 0)]

    def test_multivariable(self):
        """F_v of x·y + t at (1, −1) ties the two monomials."""
        group, fld = ValueGroup.rational(1), QField()
        F = parse_sigma_poly("x*y + t", group, fld)
        assert is_tropical_zero(F, (group.elem(2), group.elem(-1)))

    def test_newton_polygon(self):
        """Edges of t·x² + x − t² carry slopes 2 and −1."""
        group, fld = ValueGroup.rational(1), QField()
        F = parse_sigma_poly("t*x^2 + x - t^2", group, fld)
        edges = newton_polygon(F)
        assert [(e.gamma, e.multiplicity) for e in edges] == [(group.elem(2), 1), (group.elem(-1), 1)]
        assert tropical_zero_multiplicities(F) == [(group.elem(-1), 1), (group.elem(2), 1)]

    def test_newton_polygon_multiplicity(self):
        """(x − t)² has a single edge of multiplicity 2."""
        group, fld = ValueGroup.rational(1), QField()
        F = parse_sigma_poly("x^2 - 2*t*x + t^2", group, fld)
        assert tropical_zero_multiplicities(F) == [(group.elem(1), 2)]


class TestRegularity:
    """Tests for is_regular, reduced polynomials and make_regular"""

    def test_regular_and_irregular(self):
        """t² cancels the two dominant terms of t·x² + x − t²; 2t² does not."""
        group, fld = ValueGroup.rational(1), QField()
        F = parse_sigma_poly("t*x^2 + x - t^2", group, fld)
        assert not is_regular(parse_series("t^2", group, fld), F)
        assert is_regular(parse_series("2*t^2", group, fld), F)

    def test_make_regular_example(self):
        """At γ = 2 the reduced polynomial is 1 − x, so α = −1 is chosen."""
        group, fld = ValueGroup.rational(1), QField()
        F = parse_sigma_poly("t*x^2 + x - t^2", group, fld)
        c = make_regular(F, group.elem(2))
        assert c == parse_series("-t^2", group, fld)
        assert is_regular(c, F)

    def test_regular_zero(self):
        """0 is regular exactly when it is a root."""
        group, fld = ValueGroup.rational(1), QField()
        zero = HahnSeries.zero(group, fld)
        assert is_regular(zero, parse_sigma_poly("x^2 + x", group, fld))
        assert not is_regular(zero, parse_sigma_poly("x + 1", group, fld))

    def test_undecidable_at_precision(self):
        """A point that vanishes modulo its cap is reported, not guessed."""
        group, fld = ValueGroup.rational(1), QField()
        F = parse_sigma_poly("x - t", group, fld)
        a = parse_series("t + t^3", group, fld, group.elem(1))
        with pytest.raises(PrecisionExhausted):
            is_regular(a, F)

    def test_cancellation_below_cap_is_irregular(self):
        """F(a) ≡ 0 modulo a cap above F_v already shows irregularity."""
        group, fld = ValueGroup.rational(1), QField()
        F = parse_sigma_poly("x - 1", group, fld)
        a = parse_series("1 + t^5", group, fld, group.elem(1))
        assert not is_regular(a, F)

    def test_ultrametric_bound(self):
        """v(F(a)) ≥ F_v(v(a)) on random σ-polynomials and points."""
        rng = random.Random(3)
        group, fld = ValueGroup(GroupAut.scalar(2)), QField()
        for _ in range(200):
            F = random_sigma_poly(rng, group, fld, rng.randint(1, 4))
            a = random_element(rng, group, fld)
            value = F.eval(a)
            fv, _ = trop_val(F, a.valuation())
            if not value.is_zero():
                assert value.valuation() >= fv

    def test_perturbation_keeps_regularity(self):
        """a and a + ε with v(ε) > v(a) are regular together."""
        rng = random.Random(5)
        group, fld = ValueGroup(GroupAut.scalar(2)), QField()
        for _ in range(100):
            F = random_sigma_poly(rng, group, fld, rng.randint(2, 4))
            a = random_element(rng, group, fld)
            gap = Fraction(rng.randint(1, 4), 2)
            eps = HahnSeries.monomial(group, fld, a.valuation() + group.unit() * gap, rng.choice([-1, 1, 2]))
            assert is_regular(a, F) == is_regular(a + eps, F)

    def test_irregularity_by_reduction(self):
        """For v(u) = 0: a·u is irregular iff ū is a zero of the reduced polynomial at a."""
        rng = random.Random(7)
        group, fld = ValueGroup.rational(1), QField()
        hits = 0
        for _ in range(100):
            f = random_ordinary(rng, group, fld, rng.randint(2, 4))
            gamma = rng.choice(newton_polygon(f)).gamma
            a = HahnSeries.monomial(group, fld, gamma, rng.choice([1, -1, 2]))
            roots = fld.nonzero_roots(reduced_polynomial(f, a).univariate_coeffs())
            r = roots[0][0] if roots and rng.random() < 0.7 else fld.coerce(rng.choice([1, -1, 2, 3]))
            u = HahnSeries.constant(group, fld, r) + random_element(rng, group, fld, terms=2, low=1)
            if u.valuation() != group.zero():
                continue
            irregular = irregular_by_reduction(f, a, u)
            assert irregular == (not is_regular(a * u, f))
            hits += irregular
        assert hits > 0

    def test_make_regular_random(self):
        """make_regular returns a regular element of the requested value."""
        rng = random.Random(11)
        group, fld = ValueGroup(GroupAut.scalar(2)), RatShift()
        for _ in range(100):
            F = random_sigma_poly(rng, group, fld, rng.randint(1, 3))
            gamma = group.elem(Fraction(rng.randint(-6, 6), 3))
            c = make_regular(F, gamma)
            assert c.valuation() == gamma
            assert is_regular(c, F)

    def test_make_regular_several_polynomials(self):
        """One element can be regular for a finite set of σ-polynomials."""
        group, fld = ValueGroup.rational(1), RatShift()
        polys = [parse_sigma_poly("s1(x) - s0(x)", group, fld), parse_sigma_poly("x - 1", group, fld)]
        c = make_regular(polys, group.zero())
        assert all(is_regular(c, F) for F in polys)


class TestShiftedTropicalization:
    """G(x) = Σ_{i≥1} F_(i)(b)·x^i keeps F_v at a tropical zero"""

    def test_shifted_polynomial_matches(self):
        """G_v(γ) = F_v(γ) whenever v(b) = γ and γ is a tropical zero of F."""
        rng = random.Random(13)
        group, fld = ValueGroup.rational(1), QField()
        for _ in range(50):
            f = random_ordinary(rng, group, fld, rng.randint(1, 4))
            gamma = rng.choice(newton_polygon(f)).gamma
            b = HahnSeries.monomial(group, fld, gamma, rng.choice([1, -1, 2, -3]))
            b = b + HahnSeries.monomial(group, fld, gamma + group.unit() * Fraction(rng.randint(1, 3), 2), 5)
            translated = f.translate(b)
            G = translated.like([(k, c) for k, c in translated.coeffs if any(k)])
            assert trop_val(G, gamma)[0] == trop_val(f, gamma)[0]


def constructed_trace(rng, group, fld, length=8):
    """Partial sums of a series with increasing exponents; the full sum is a pseudolimit."""
    exponents = sorted(rng.sample(range(-2, 16), length + 1))
    terms = [(group.unit() * Fraction(e, 2), fld.coerce(rng.choice([-2, -1, 1, 2]))) for e in exponents]
    limit = HahnSeries.make(group, fld, terms)
    entries = tuple(HahnSeries.make(group, fld, terms[:rho]) for rho in range(length))
    return PcTrace(entries), limit


class TestPcTrace:
    """Tests for finite pc-traces and their adjustment"""

    def test_gammas_and_pseudolimit(self):
        """Partial sums of 1 + t + t² + t³ have γ_ρ = ρ and pseudolimit the full sum."""
        group, fld = ValueGroup.rational(1), QField()
        entries = tuple(parse_series(text, group, fld) for text in ["1", "1 + t", "1 + t + t^2"])
        trace = PcTrace(entries)
        limit = parse_series("1 + t + t^2 + t^3", group, fld)
        assert trace.gammas == [group.elem(1), group.elem(2)]
        assert trace.is_pc()
        assert trace.is_pseudolimit(limit)
        assert not trace.is_pseudolimit(parse_series("1 + 2*t", group, fld))
        assert trace.width_bound() == group.elem(2)

    def test_equivalent_traces(self):
        """Traces with the same successive-difference values are equivalent."""
        group, fld = ValueGroup.rational(1), QField()
        first = PcTrace(tuple(parse_series(x, group, fld) for x in ["0", "t", "t + t^2"]))
        second = PcTrace(tuple(parse_series(x, group, fld) for x in ["5", "5 - t", "5 - t + 3*t^2"]))
        assert first.equivalent(second)

    def test_trace_too_short(self):
        """Two entries give only one γ."""
        group, fld = ValueGroup.rational(1), RatShift()
        trace = PcTrace((HahnSeries.zero(group, fld), parse_series("t", group, fld)))
        with pytest.raises(TraceTooShort):
            adjust_pc(trace, parse_series("t", group, fld), [parse_sigma_poly("x", group, fld)])

    def test_adjust_rejects_non_pseudolimit(self):
        """The limit must pseudo-converge with the trace."""
        rng = random.Random(17)
        group, fld = ValueGroup.rational(1), RatShift()
        trace, limit = constructed_trace(rng, group, fld)
        with pytest.raises(ValdiffError):
            adjust_pc(trace, limit + HahnSeries.constant(group, fld, 7), [parse_sigma_poly("x^2", group, fld)])

    def test_adjusted_traces(self):
        """Adjusted traces keep their γ_ρ and make v(F(b_ρ) − F(a)) strictly increase."""
        rng = random.Random(19)
        group, fld = ValueGroup.rational(1), RatShift()
        for _ in range(10):
            trace, limit = constructed_trace(rng, group, fld)
            polys = [random_sigma_poly(rng, group, fld, rng.randint(2, 3)) for _ in range(rng.randint(1, 2))]
            polys = [F for F in polys if not F.is_constant()] or [parse_sigma_poly("s1(x)*x", group, fld)]
            adjusted = adjust_pc(trace, limit, polys)
            assert adjusted.gammas == trace.gammas[:len(adjusted.gammas)]
            for F in polys:
                values = adjustment_values(adjusted, limit, F)
                assert all(x < y for x, y in zip(values, values[1:]))
