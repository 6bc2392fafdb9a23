"""
Value groups: Γ = ℚ^n under lexicographic order, with a distinguished
order-preserving automorphism σ given by a lower-triangular matrix with
strictly positive diagonal, and the ℤ[σ]-module action τ(γ).
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence, Tuple, Union

from utils.errors import DimensionMismatch, ValdiffError

Rational = Union[int, Fraction]


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)


@dataclass(frozen=True)
class GroupElem:
    coords: Tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(_frac(c) for c in self.coords))

    @classmethod
    def of(cls, *coords: Rational) -> "GroupElem":
        return cls(tuple(coords))

    @classmethod
    def zero(cls, dim: int) -> "GroupElem":
        return cls((Fraction(0),) * dim)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def _check(self, other: "GroupElem"):
        if not isinstance(other, GroupElem):
            raise TypeError(f"cannot combine GroupElem with {type(other).__name__}")
        if other.dim != self.dim:
            raise DimensionMismatch(f"group elements of dimension {self.dim} and {other.dim}")

    def __add__(self, other: "GroupElem") -> "GroupElem":
        self._check(other)
        return GroupElem(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "GroupElem") -> "GroupElem":
        self._check(other)
        return GroupElem(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> "GroupElem":
        return GroupElem(tuple(-a for a in self.coords))

    def __mul__(self, k: Rational) -> "GroupElem":
        k = _frac(k)
        return GroupElem(tuple(k * a for a in self.coords))

    __rmul__ = __mul__

    def __truediv__(self, k: Rational) -> "GroupElem":
        k = _frac(k)
        if k == 0:
            raise ZeroDivisionError("division of a group element by zero")
        return GroupElem(tuple(a / k for a in self.coords))

    def __lt__(self, other: "GroupElem") -> bool:
        self._check(other)
        return self.coords < other.coords

    def __le__(self, other: "GroupElem") -> bool:
        self._check(other)
        return self.coords <= other.coords

    def __gt__(self, other: "GroupElem") -> bool:
        self._check(other)
        return self.coords > other.coords

    def __ge__(self, other: "GroupElem") -> bool:
        self._check(other)
        return self.coords >= other.coords

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)

    def sign(self) -> int:
        for c in self.coords:
            if c:
                return 1 if c > 0 else -1
        return 0

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.coords) + ")"

    def to_json(self) -> list:
        return [str(c) for c in self.coords]


def compare(a: GroupElem, b: GroupElem) -> int:
    """Lexicographic comparison: -1, 0 or 1."""
    a._check(b)
    if a.coords < b.coords:
        return -1
    if a.coords > b.coords:
        return 1
    return 0


def gmin(values: Iterable[GroupElem]) -> GroupElem:
    return min(values, key=lambda g: g.coords)


def gmax(values: Iterable[GroupElem]) -> GroupElem:
    return max(values, key=lambda g: g.coords)


Matrix = Tuple[Tuple[Fraction, ...], ...]


def _matvec(m: Matrix, coords: Sequence[Fraction]) -> Tuple[Fraction, ...]:
    return tuple(sum((row[j] * coords[j] for j in range(len(coords))), Fraction(0)) for row in m)


def _matmul(a: Matrix, b: Matrix) -> Matrix:
    n = len(a)
    return tuple(
        tuple(sum((a[i][k] * b[k][j] for k in range(n)), Fraction(0)) for j in range(n))
        for i in range(n)
    )


@dataclass(frozen=True)
class GroupAut:
    """Lower-triangular, positive-diagonal matrix acting on column vectors."""

    matrix: Matrix

    def __post_init__(self):
        rows = tuple(tuple(_frac(x) for x in row) for row in self.matrix)
        n = len(rows)
        if n == 0 or any(len(row) != n for row in rows):
            raise ValdiffError("automorphism matrix must be square and non-empty")
        for i in range(n):
            if rows[i][i] <= 0:
                raise ValdiffError(f"diagonal entry {i} must be strictly positive")
            for j in range(i + 1, n):
                if rows[i][j] != 0:
                    raise ValdiffError("automorphism matrix must be lower-triangular")
        object.__setattr__(self, "matrix", rows)

    @classmethod
    def identity(cls, dim: int = 1) -> "GroupAut":
        return cls(tuple(tuple(1 if i == j else 0 for j in range(dim)) for i in range(dim)))

    @classmethod
    def scalar(cls, q: Rational, dim: int = 1) -> "GroupAut":
        return cls(tuple(tuple(q if i == j else 0 for j in range(dim)) for i in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.matrix)

    @cached_property
    def inverse_matrix(self) -> Matrix:
        # forward substitution, column by column
        n = self.dim
        inv = [[Fraction(0)] * n for _ in range(n)]
        for col in range(n):
            for i in range(n):
                acc = Fraction(1) if i == col else Fraction(0)
                for k in range(i):
                    acc -= self.matrix[i][k] * inv[k][col]
                inv[i][col] = acc / self.matrix[i][i]
        return tuple(tuple(row) for row in inv)

    def inverse(self) -> "GroupAut":
        return GroupAut(self.inverse_matrix)

    def compose(self, other: "GroupAut") -> "GroupAut":
        return GroupAut(_matmul(self.matrix, other.matrix))

    def is_identity(self) -> bool:
        return self == GroupAut.identity(self.dim)

    def apply(self, gamma: GroupElem, k: int = 1) -> GroupElem:
        if gamma.dim != self.dim:
            raise DimensionMismatch(f"automorphism of dimension {self.dim} applied to element of dimension {gamma.dim}")
        m = self.matrix if k >= 0 else self.inverse_matrix
        coords = gamma.coords
        for _ in range(abs(k)):
            coords = _matvec(m, coords)
        return GroupElem(coords)

    def to_json(self) -> list:
        return [[str(x) for x in row] for row in self.matrix]


@lru_cache(maxsize=65536)
def _cached_apply(aut: GroupAut, gamma: GroupElem, k: int) -> GroupElem:
    return aut.apply(gamma, k)


def sigma_apply(aut: GroupAut, gamma: GroupElem, k: int = 1) -> GroupElem:
    """σ^k(γ); negative k uses the inverse matrix."""
    return aut.apply(gamma, k)


def poly_apply(aut: GroupAut, tau: Union[Mapping[int, int], Sequence[int]], gamma: GroupElem) -> GroupElem:
    """τ(γ) = Σ_k i_k σ^k(γ) for τ = Σ_k i_k σ^k (a mapping power -> coefficient,
    or a sequence indexed by power starting at 0)."""
    items = tau.items() if isinstance(tau, Mapping) else enumerate(tau)
    total = GroupElem.zero(gamma.dim)
    for power, coef in items:
        if coef:
            total = total + _cached_apply(aut, gamma, power) * coef
    return total


@dataclass(frozen=True)
class ValueGroup:
    """Γ together with its automorphism; shared by every series over it."""

    aut: GroupAut

    @classmethod
    def rational(cls, dim: int = 1, aut: GroupAut = None) -> "ValueGroup":
        return cls(aut or GroupAut.identity(dim))

    @property
    def dim(self) -> int:
        return self.aut.dim

    def zero(self) -> GroupElem:
        return GroupElem.zero(self.dim)

    def elem(self, *coords: Rational) -> GroupElem:
        if len(coords) == 1 and isinstance(coords[0], (tuple, list)):
            coords = tuple(coords[0])
        if len(coords) != self.dim:
            raise DimensionMismatch(f"expected {self.dim} coordinates, got {len(coords)}")
        return GroupElem(tuple(coords))

    def unit(self) -> GroupElem:
        """The element (1, 0, ..., 0); the default exponent of a bare `t`."""
        return GroupElem((Fraction(1),) + (Fraction(0),) * (self.dim - 1))

    def sigma(self, gamma: GroupElem, k: int = 1) -> GroupElem:
        return _cached_apply(self.aut, gamma, k)

    def sigma_multi(self, index: Sequence[int], gamma: GroupElem) -> GroupElem:
        """σ^i(γ) for a multi-index i over the shifts 0..n."""
        return poly_apply(self.aut, index, gamma)

    def divide(self, gamma: GroupElem, n: int) -> GroupElem:
        return gamma / n

    def check(self, gamma: GroupElem) -> GroupElem:
        if gamma.dim != self.dim:
            raise DimensionMismatch(f"element {gamma} does not belong to a group of dimension {self.dim}")
        return gamma

    def parse(self, text: str) -> GroupElem:
        body = text.strip()
        if body.startswith("(") and body.endswith(")"):
            body = body[1:-1]
        parts = [p for p in body.split(",") if p.strip()]
        try:
            return self.elem(*[Fraction(p.strip()) for p in parts])
        except (ValueError, ZeroDivisionError) as e:
            raise ValdiffError(f"invalid group element '{text}': {e}")


def is_order_preserving(aut: GroupAut, samples: Iterable[GroupElem]) -> bool:
    """Spot check: σ and σ^{-1} send positive samples to positive elements."""
    for gamma in samples:
        if gamma.sign() > 0 and (aut.apply(gamma, 1).sign() <= 0 or aut.apply(gamma, -1).sign() <= 0):
            return False
    return True


def parse_matrix(text: str) -> Matrix:
    """Parse "[[1,0],[1,1]]", "[[1/2,0],[1,1]]" or a bare scalar "2" into matrix rows."""
    body = text.replace(" ", "")
    try:
        if body.startswith("[["):
            rows = body[2:-2].split("],[")
        elif body.startswith("["):
            rows = [body[1:-1]]
        else:
            rows = [body]
        return tuple(tuple(_frac(x) for x in row.split(",")) for row in rows)
    except (ValueError, ZeroDivisionError) as e:
        raise ValdiffError(f"invalid automorphism matrix '{text}': {e}")
