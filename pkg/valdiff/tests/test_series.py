import pytest
from fractions import Fraction

from algebra.ordgroup import GroupAut, ValueGroup
from algebra.resfield import ExpGroupElem, ExpGroupField, QField, RatShift
from algebra.series import HahnSeries, RVElem, parse_series, rv_add, rv_equal, rv_mul, rv_of, sigma_rv
from utils.errors import IncompatibleInstances, NegativeValuation, ParseError, PrecisionExhausted, ZeroSeriesError


@pytest.fixture
def group():
    return ValueGroup.rational(1)


@pytest.fixture
def fld():
    return QField()


def series(text, group, fld, prec=None):
    return parse_series(text, group, fld, None if prec is None else group.elem(prec))


class TestArithmetic:
    """Tests for truncated Hahn series arithmetic"""

    def test_product_at_precision(self, group, fld):
        """(1+t)(1−t) = 1 − t² modulo t³."""
        a = series("(1+t)*(1-t)", group, fld, 3)
        expected = HahnSeries.make(group, fld, [(group.elem(0), Fraction(1)), (group.elem(2), Fraction(-1))], group.elem(3))
        assert a == expected
        assert str(a) == "1 - t^(2)"

    def test_precision_of_product(self, group, fld):
        """(1 + t + O(t²))·t is known modulo t³."""
        a = series("1 + t", group, fld, 2)
        b = a * HahnSeries.monomial(group, fld, group.elem(1))
        assert b.prec == group.elem(3)
        assert b == series("t + t^2", group, fld, 3)

    def test_sum_takes_smaller_precision(self, group, fld):
        """An exact series plus a capped one keeps the cap."""
        a = series("1 + t^5", group, fld)
        b = series("t", group, fld, 2)
        assert (a + b).prec == group.elem(2)
        assert (a + b).terms == ((group.elem(0), Fraction(1)), (group.elem(1), Fraction(1)))

    def test_geometric_inverse(self, group, fld):
        """1/(1−t) = 1 + t + t² + t³ modulo t⁴."""
        inv = series("1 - t", group, fld).invert(group.elem(4))
        assert inv == series("1 + t + t^2 + t^3", group, fld, 4)

    def test_inverse_of_rational_exponents(self, group, fld):
        """1/(t^(1/2) + t) starts at t^(-1/2)."""
        a = series("t^(1/2) + t", group, fld)
        inv = a.invert(group.elem(1))
        assert inv.valuation() == group.elem(Fraction(-1, 2))
        assert (a * inv - HahnSeries.constant(group, fld, 1)).is_zero()

    def test_exact_inverse_needs_cap(self, group, fld):
        """Infinite support cannot be returned exactly."""
        with pytest.raises(PrecisionExhausted):
            series("1 + t", group, fld).invert()

    def test_monomial_inverse_is_exact(self, group, fld):
        """c·t^γ inverts to c⁻¹·t^(−γ) with no cap."""
        inv = series("2*t^(3)", group, fld).invert()
        assert inv.is_exact()
        assert inv == HahnSeries.monomial(group, fld, group.elem(-3), Fraction(1, 2))

    def test_zero_inverse(self, group, fld):
        """Inverting zero is refused."""
        with pytest.raises(ZeroSeriesError):
            HahnSeries.zero(group, fld).invert()

    def test_incompatible_groups(self, group, fld):
        """Series over different value groups do not mix."""
        other = ValueGroup.rational(2)
        with pytest.raises(IncompatibleInstances):
            HahnSeries.constant(group, fld, 1) + HahnSeries.constant(other, fld, 1)

    def test_agrees_with_below_common_cap(self, group, fld):
        """1 + t + t² agrees with 1 + t + O(t²)."""
        assert series("1 + t + t^2", group, fld).agrees_with(series("1 + t", group, fld, 2))
        assert not series("1 + 2*t", group, fld).agrees_with(series("1 + t", group, fld, 2))


class TestValuation:
    """Tests for v, residue and leading terms"""

    def test_valuation_of_exact_zero(self, group, fld):
        """v(0) = ∞ is reported as None."""
        assert HahnSeries.zero(group, fld).valuation() is None

    def test_valuation_of_truncated_zero(self, group, fld):
        """A series that vanishes modulo its cap has no known valuation."""
        with pytest.raises(PrecisionExhausted):
            HahnSeries.zero(group, fld, group.elem(4)).valuation()

    def test_residue(self, group, fld):
        """π(3 + t) = 3; π(t) = 0; π(t⁻¹) is undefined."""
        assert series("3 + t", group, fld).residue() == 3
        assert series("t", group, fld).residue() == 0
        with pytest.raises(NegativeValuation):
            series("t^(-1)", group, fld).residue()

    def test_coefficient_beyond_cap(self, group, fld):
        """Coefficients at or above the cap are unknown."""
        with pytest.raises(PrecisionExhausted):
            series("1", group, fld, 2).coefficient(group.elem(2))


class TestSigma:
    """Tests for σ on Hahn series"""

    def test_sigma_acts_on_exponents_and_coefficients(self):
        """σ(s·t) = (s+1)·t² when σ = ·2 on Γ and σ̄(s) = s+1."""
        group = ValueGroup(GroupAut.scalar(2))
        fld = RatShift()
        a = parse_series("s*t", group, fld)
        expected = parse_series("(s+1)*t^(2)", group, fld)
        assert a.sigma() == expected
        assert a.sigma(2).sigma(-2) == a

    def test_sigma_moves_precision(self):
        """The cap is transported by σ on Γ."""
        group = ValueGroup(GroupAut.scalar(2))
        fld = QField()
        a = parse_series("1 + t", group, fld, group.elem(3))
        assert a.sigma().prec == group.elem(6)

    def test_two_dimensional_group(self):
        """(1,0) dominates (0,5) in the lex order, so t^(0,5) leads."""
        group = ValueGroup(GroupAut(((1, 0), (1, 1))))
        fld = QField()
        a = parse_series("t^(1,-1) + t^(0,5)", group, fld)
        assert a.valuation() == group.elem(0, 5)
        assert str(a) == "t^(0,5) + t^(1,-1)"
        assert a.sigma().terms[1][0] == group.elem(1, 0)


class TestParsing:
    """Tests for the series grammar"""

    def test_expgroup_coefficients(self):
        """E^(r) is read as a residue constant."""
        group = ValueGroup.rational(1)
        fld = ExpGroupField()
        a = parse_series("E^(1/2)*t + 1", group, fld)
        assert a.coefficient(group.elem(1)) == ExpGroupElem.exp(Fraction(1, 2))

    def test_division_by_series_needs_cap(self, group, fld):
        """1/(1+t) without --prec is a parse error."""
        with pytest.raises(ParseError):
            series("1/(1+t)", group, fld)
        assert series("1/(1+t)", group, fld, 3) == series("1 - t + t^2", group, fld, 3)

    def test_unknown_symbol(self, group, fld):
        """Free names are reported with their position."""
        with pytest.raises(ParseError) as exc:
            series("1 + y", group, fld)
        assert exc.value.location == {"line": 1, "column": 5}

    def test_json_round_trip(self, group, fld):
        """to_json and from_json agree, precision included."""
        a = series("1/2*t^(1/3) - 7*t^(2)", group, fld, 5)
        assert HahnSeries.from_json(group, fld, a.to_json()) == a
        assert a.to_json()["terms"][0] == {"gamma": ["1/3"], "coef": "1/2"}


class TestRV:
    """Tests for the RV sort"""

    def test_rv_of_series(self, group, fld):
        """rv keeps the leading term only."""
        r = rv_of(series("2*t + 5*t^2", group, fld))
        assert r == RVElem(group.elem(1), Fraction(2))
        assert rv_of(HahnSeries.zero(group, fld)).is_infinite()

    def test_partial_addition(self, fld, group):
        """Equal values add; cancellation gives ∞; the smaller value wins otherwise."""
        r = RVElem(group.elem(1), Fraction(2))
        u = RVElem(group.elem(1), Fraction(-2))
        w = RVElem(group.elem(0), Fraction(3))
        assert rv_add(fld, r, u).is_infinite()
        assert rv_equal(fld, rv_add(fld, r, w), w)
        assert rv_equal(fld, rv_add(fld, r, r), RVElem(group.elem(1), Fraction(4)))

    def test_multiplication_and_sigma(self):
        """rv is multiplicative and commutes with σ."""
        group = ValueGroup(GroupAut.scalar(2))
        fld = RatShift()
        a = parse_series("s*t + t^2", group, fld)
        b = parse_series("3*t^(1/2)", group, fld)
        assert rv_equal(fld, rv_mul(fld, rv_of(a), rv_of(b)), rv_of(a * b))
        assert rv_equal(fld, sigma_rv(group, fld, rv_of(a)), rv_of(a.sigma()))
