import pytest
from fractions import Fraction

from algebra.ordgroup import GroupAut, GroupElem, ValueGroup, gmax, gmin, is_order_preserving, parse_matrix
from utils.errors import DimensionMismatch, ValdiffError


class TestGroupElem:
    """Tests for lexicographically ordered ℚ^n elements"""

    def test_lex_order(self):
        """Earlier coordinates dominate the comparison."""
        assert GroupElem.of(0, 5) < GroupElem.of(1, 0)
        assert GroupElem.of(1, -3) < GroupElem.of(1, 0)
        assert gmin([GroupElem.of(2, 0), GroupElem.of(1, 9)]) == GroupElem.of(1, 9)
        assert gmax([GroupElem.of(2, 0), GroupElem.of(1, 9)]) == GroupElem.of(2, 0)

    def test_arithmetic_is_exact(self):
        """Coordinates are Fractions; scaling by rationals stays exact."""
        g = GroupElem.of(Fraction(1, 3), 1)
        assert g * 3 == GroupElem.of(1, 3)
        assert (g + g - g) == g
        assert g / 2 == GroupElem.of(Fraction(1, 6), Fraction(1, 2))

    def test_sign_and_zero(self):
        """sign() follows the first nonzero coordinate."""
        assert GroupElem.of(0, -1).sign() == -1
        assert GroupElem.of(0, 0).is_zero()
        assert GroupElem.of(0, 0).sign() == 0

    def test_dimension_mismatch(self):
        """Elements of different dimensions cannot be combined."""
        with pytest.raises(DimensionMismatch):
            GroupElem.of(1) + GroupElem.of(1, 0)

    def test_to_json_keeps_rationals_as_strings(self):
        """JSON coordinates are exact strings."""
        assert GroupElem.of(Fraction(1, 2), -3).to_json() == ["1/2", "-3"]


class TestGroupAut:
    """Tests for σ on Γ"""

    def test_triangular_action_and_inverse(self):
        """[[1,0],[1,1]] sends (1,0) to (1,1) and back."""
        aut = GroupAut(parse_matrix("[[1,0],[1,1]]"))
        assert aut.apply(GroupElem.of(1, 0)) == GroupElem.of(1, 1)
        assert aut.apply(GroupElem.of(1, 0), -1) == GroupElem.of(1, -1)
        assert aut.compose(aut.inverse()).is_identity()

    def test_scalar_powers(self):
        """σ = ·2 iterated three times multiplies by 8."""
        aut = GroupAut.scalar(2)
        assert aut.apply(GroupElem.of(Fraction(1, 4)), 3) == GroupElem.of(2)
        assert aut.apply(GroupElem.of(4), -2) == GroupElem.of(1)

    def test_rejects_upper_triangular(self):
        """Entries above the diagonal are refused."""
        with pytest.raises(ValdiffError):
            GroupAut(((1, 1), (0, 1)))

    def test_rejects_nonpositive_diagonal(self):
        """The diagonal must be strictly positive for σ to preserve the order."""
        with pytest.raises(ValdiffError):
            GroupAut(((1, 0), (0, -1)))

    def test_order_preserving_spot_check(self):
        """Positive samples stay positive under σ and σ⁻¹."""
        aut = GroupAut(parse_matrix("[[2,0],[-5,1]]"))
        samples = [GroupElem.of(1, -100), GroupElem.of(0, 1), GroupElem.of(Fraction(1, 7), 3)]
        assert is_order_preserving(aut, samples)

    def test_parse_matrix_scalar(self):
        """A bare number is a 1x1 matrix."""
        assert parse_matrix("3/2") == ((Fraction(3, 2),),)

    def test_parse_matrix_garbage(self):
        """Unreadable entries surface as domain errors."""
        with pytest.raises(ValdiffError):
            parse_matrix("[[1,x],[0,1]]")


class TestValueGroup:
    """Tests for the Γ bundle shared by series"""

    def test_parse_tuple(self):
        """(a,b) text becomes an element of the right dimension."""
        group = ValueGroup.rational(2)
        assert group.parse("(1/2, -3)") == GroupElem.of(Fraction(1, 2), -3)

    def test_parse_wrong_dimension(self):
        """Too few coordinates are a dimension mismatch."""
        with pytest.raises(DimensionMismatch):
            ValueGroup.rational(2).parse("1")

    def test_sigma_multi(self):
        """σ^(1,1)(γ) = γ + σ(γ)."""
        group = ValueGroup(GroupAut.scalar(2))
        assert group.sigma_multi((1, 1), group.elem(1)) == group.elem(3)
        assert group.sigma_multi((0, 2), group.elem(1)) == group.elem(4)

    def test_unit(self):
        """The unit is the exponent of a bare t."""
        assert ValueGroup.rational(3).unit() == GroupElem.of(1, 0, 0)
