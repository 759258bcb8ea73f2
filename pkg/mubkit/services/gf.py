"""
Finite Field Arithmetic

Exact arithmetic in F_{p^r}, realised as Z/p[t] modulo the lexicographically
smallest monic irreducible polynomial of degree r. Elements are coefficient
tuples, constant term first; the canonical element order is lexicographic on
those tuples with the constant term most significant.

The additive character is chi(x) = exp(2 pi i s_1 / p) with s_1 the constant
coefficient, and the bicharacter is <x, y> = chi(xy).
"""

from __future__ import annotations

import itertools
import math
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, PrivateAttr, field_validator, model_validator

from mubkit.config import get_settings
from mubkit.errors import (
    DimensionLimitError,
    FieldDivisionError,
    FieldMismatchError,
    InvalidDimensionError,
    InvalidPrimeError,
    UnsupportedDimensionError,
)

logger = structlog.get_logger()


# =============================================================================
# Integers
# =============================================================================

def is_prime(n: int) -> bool:
    """Deterministic trial division."""
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    return all(n % k for k in range(3, math.isqrt(n) + 1, 2))


class PrimePowerFactorization(BaseModel):
    """d = p_1^{m_1} ... p_n^{m_n} with p_1 < ... < p_n."""
    factors: Tuple[Tuple[int, int], ...]

    model_config = ConfigDict(frozen=True)

    @property
    def d(self) -> int:
        return math.prod(p**m for p, m in self.factors)

    @property
    def dims(self) -> List[int]:
        return [p**m for p, m in self.factors]

    @property
    def is_prime_power(self) -> bool:
        return len(self.factors) == 1


def factorize(d: int) -> PrimePowerFactorization:
    if d < 2:
        raise InvalidDimensionError(f"dimension must be at least 2, got {d}")
    factors = []
    rest = d
    k = 2
    while k * k <= rest:
        if rest % k == 0:
            m = 0
            while rest % k == 0:
                rest //= k
                m += 1
            factors.append((k, m))
        k += 1
    if rest > 1:
        factors.append((rest, 1))
    return PrimePowerFactorization(factors=tuple(factors))


# =============================================================================
# Polynomials over Z/p (coefficient lists, low degree first)
# =============================================================================

def _poly_trim(a: List[int]) -> List[int]:
    while len(a) > 1 and a[-1] == 0:
        a = a[:-1]
    return a


def _poly_mul(a: Sequence[int], b: Sequence[int], p: int) -> List[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % p
    return out


def _poly_rem(a: Sequence[int], m: Sequence[int], p: int) -> List[int]:
    """Remainder of a modulo the monic polynomial m."""
    rem = [c % p for c in a]
    deg_m = len(m) - 1
    for shift in range(len(rem) - 1 - deg_m, -1, -1):
        lead = rem[shift + deg_m]
        if lead:
            for k, mk in enumerate(m):
                rem[shift + k] = (rem[shift + k] - lead * mk) % p
    rem = rem[:deg_m] if deg_m > 0 else [0]
    return rem + [0] * (deg_m - len(rem))


def _monic_polys(p: int, degree: int) -> Iterator[List[int]]:
    """Monic polynomials of a degree, lexicographic from the constant term up."""
    for low in itertools.product(range(p), repeat=degree):
        yield list(low) + [1]


def is_irreducible(poly: Sequence[int], p: int) -> bool:
    poly = _poly_trim(list(poly))
    r = len(poly) - 1
    if r < 1:
        return False
    for k in range(1, r // 2 + 1):
        for f in _monic_polys(p, k):
            if not any(_poly_rem(poly, f, p)):
                return False
    return True


def smallest_irreducible(p: int, r: int) -> List[int]:
    for poly in _monic_polys(p, r):
        if is_irreducible(poly, p):
            return poly
    raise InvalidPrimeError(f"no irreducible polynomial of degree {r} over Z/{p}")


# =============================================================================
# Field realisation
# =============================================================================

class FieldSpec(BaseModel):
    """
    A realised finite field F_{p^r}.

    Serialises to {"p", "r", "modulus"}. Arithmetic tables are private and
    built on first use; two specs are equal when (p, r, modulus) agree.
    """
    p: int
    r: int
    modulus: Tuple[int, ...]

    model_config = ConfigDict(frozen=True)

    _coords: Optional[np.ndarray] = PrivateAttr(default=None)
    _products: Optional[np.ndarray] = PrivateAttr(default=None)
    _add_table: Optional[np.ndarray] = PrivateAttr(default=None)
    _mul_table: Optional[np.ndarray] = PrivateAttr(default=None)
    _chi_table: Optional[np.ndarray] = PrivateAttr(default=None)
    _bichar_table: Optional[np.ndarray] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_modulus(self):
        if len(self.modulus) != self.r + 1 or self.modulus[-1] != 1:
            raise ValueError(f"modulus must be monic of degree {self.r}")
        if any(not 0 <= c < self.p for c in self.modulus):
            raise ValueError("modulus coefficients must be reduced mod p")
        return self

    def __eq__(self, other):
        if not isinstance(other, FieldSpec):
            return NotImplemented
        return (self.p, self.r, self.modulus) == (other.p, other.r, other.modulus)

    def __hash__(self):
        return hash((self.p, self.r, self.modulus))

    def __repr__(self):
        return f"FieldSpec(p={self.p}, r={self.r}, modulus={list(self.modulus)})"

    @property
    def order(self) -> int:
        return self.p**self.r

    # ------------------------------------------------------------------
    # Elements
    # ------------------------------------------------------------------

    def element(self, coeffs: Sequence[int]) -> "FieldElement":
        if len(coeffs) != self.r:
            raise ValueError(f"element of F_{self.order} needs {self.r} coefficients, got {len(coeffs)}")
        return FieldElement(field=self, coeffs=tuple(int(c) % self.p for c in coeffs))

    def scalar(self, n: int) -> "FieldElement":
        return self.element([n] + [0] * (self.r - 1))

    @property
    def zero(self) -> "FieldElement":
        return self.scalar(0)

    @property
    def one(self) -> "FieldElement":
        return self.scalar(1)

    def basis_element(self, i: int) -> "FieldElement":
        """e_{i+1} = t^i."""
        coeffs = [0] * self.r
        coeffs[i] = 1
        return self.element(coeffs)

    def elements(self) -> List["FieldElement"]:
        return [self.element(c) for c in itertools.product(range(self.p), repeat=self.r)]

    def index(self, x: "FieldElement") -> int:
        self._require(x)
        idx = 0
        for c in x.coeffs:
            idx = idx * self.p + c
        return idx

    def element_at(self, idx: int) -> "FieldElement":
        coeffs = []
        for _ in range(self.r):
            idx, c = divmod(idx, self.p)
            coeffs.append(c)
        return self.element(coeffs[::-1])

    def _require(self, *xs: "FieldElement"):
        for x in xs:
            if x.field != self:
                raise FieldMismatchError(f"{x.field!r} is not {self!r}")

    # ------------------------------------------------------------------
    # Structure constants and tables
    # ------------------------------------------------------------------

    @property
    def basis_products(self) -> List[List["FieldElement"]]:
        """r x r table of e_i e_j."""
        return [
            [self.element(self.product_coords[i, j]) for j in range(self.r)]
            for i in range(self.r)
        ]

    @property
    def product_coords(self) -> np.ndarray:
        """Integer tensor B[i, j, :] = coordinates of e_i e_j."""
        if self._products is None:
            out = np.zeros((self.r, self.r, self.r), dtype=np.int64)
            for i in range(self.r):
                for j in range(self.r):
                    mono = [0] * (i + j) + [1]
                    out[i, j] = _poly_rem(mono, self.modulus, self.p)
            self._products = out
        return self._products

    @property
    def coords(self) -> np.ndarray:
        """(q, r) coefficient array in canonical element order."""
        if self._coords is None:
            self._coords = np.array(
                list(itertools.product(range(self.p), repeat=self.r)), dtype=np.int64
            ).reshape(self.order, self.r)
        return self._coords

    def _indices_of(self, coords: np.ndarray) -> np.ndarray:
        weights = self.p ** np.arange(self.r - 1, -1, -1, dtype=np.int64)
        return coords @ weights

    @property
    def add_table(self) -> np.ndarray:
        if self._add_table is None:
            c = self.coords
            sums = (c[:, None, :] + c[None, :, :]) % self.p
            self._add_table = self._indices_of(sums)
        return self._add_table

    @property
    def mul_table(self) -> np.ndarray:
        if self._mul_table is None:
            c = self.coords
            table = np.empty((self.order, self.order), dtype=np.int64)
            for i in range(self.order):
                prod = np.einsum("i,bj,ijk->bk", c[i], c, self.product_coords) % self.p
                table[i] = self._indices_of(prod)
            self._mul_table = table
        return self._mul_table

    @property
    def neg_table(self) -> np.ndarray:
        return self._indices_of((-self.coords) % self.p)

    @property
    def chi_table(self) -> np.ndarray:
        if self._chi_table is None:
            self._chi_table = np.exp(2j * np.pi * self.coords[:, 0] / self.p)
        return self._chi_table

    @property
    def bichar_table(self) -> np.ndarray:
        """B[i, j] = <x_i, x_j>."""
        if self._bichar_table is None:
            self._bichar_table = self.chi_table[self.mul_table]
        return self._bichar_table


class FieldElement(BaseModel):
    """Element of F_{p^r} as r coefficients mod p (s_1 .. s_r)."""
    field: FieldSpec
    coeffs: Tuple[int, ...]

    model_config = ConfigDict(frozen=True)

    @field_validator("coeffs")
    @classmethod
    def _non_negative(cls, v):
        if any(c < 0 for c in v):
            raise ValueError("coefficients must be reduced mod p")
        return v

    @model_validator(mode="after")
    def _check_reduced(self):
        if len(self.coeffs) != self.field.r:
            raise ValueError(f"expected {self.field.r} coefficients, got {len(self.coeffs)}")
        if any(c >= self.field.p for c in self.coeffs):
            raise ValueError("coefficients must be reduced mod p")
        return self

    def __hash__(self):
        return hash((self.field, self.coeffs))

    def __eq__(self, other):
        if not isinstance(other, FieldElement):
            return NotImplemented
        return self.field == other.field and self.coeffs == other.coeffs

    def __repr__(self):
        return f"FieldElement({list(self.coeffs)} in F_{self.field.order})"

    def __str__(self):
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if k == 0 else ("t" if k == 1 else f"t^{k}")
            if not mono:
                terms.append(str(c))
            else:
                terms.append(mono if c == 1 else f"{c}{mono}")
        return "+".join(terms) if terms else "0"

    def __bool__(self):
        return any(self.coeffs)

    @property
    def index(self) -> int:
        return self.field.index(self)

    def __add__(self, other: "FieldElement") -> "FieldElement":
        return add(self, other)

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        return add(self, neg(other))

    def __neg__(self) -> "FieldElement":
        return neg(self)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        return mul(self, other)

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        return mul(self, inv(other))

    def __pow__(self, n: int) -> "FieldElement":
        return power(self, n)


# =============================================================================
# Operations
# =============================================================================

def make_field(p: int, r: int = 1) -> FieldSpec:
    if not is_prime(p):
        raise InvalidPrimeError(f"{p} is not prime")
    if r < 1:
        raise InvalidDimensionError(f"extension degree must be at least 1, got {r}")
    limit = get_settings().MAX_DIM
    if p**r > limit:
        raise DimensionLimitError(f"p^r = {p**r} exceeds the dimension limit {limit}")
    modulus = smallest_irreducible(p, r)
    logger.debug("Realised finite field", p=p, r=r, modulus=modulus)
    return FieldSpec(p=p, r=r, modulus=tuple(modulus))


def field_for_dimension(d: int) -> FieldSpec:
    """F_d for a prime power d."""
    fac = factorize(d)
    if not fac.is_prime_power:
        raise UnsupportedDimensionError(
            f"d={d} is not a prime power; use the composite pipeline (factors {fac.dims})"
        )
    (p, r), = fac.factors
    return make_field(p, r)


def _same_field(x: FieldElement, y: FieldElement) -> FieldSpec:
    if x.field != y.field:
        raise FieldMismatchError(f"{x.field!r} and {y.field!r} differ")
    return x.field


def add(x: FieldElement, y: FieldElement) -> FieldElement:
    f = _same_field(x, y)
    return f.element([a + b for a, b in zip(x.coeffs, y.coeffs)])


def neg(x: FieldElement) -> FieldElement:
    return x.field.element([-c for c in x.coeffs])


def mul(x: FieldElement, y: FieldElement) -> FieldElement:
    f = _same_field(x, y)
    return f.element(_poly_rem(_poly_mul(x.coeffs, y.coeffs, f.p), f.modulus, f.p))


def power(x: FieldElement, n: int) -> FieldElement:
    if n < 0:
        return power(inv(x), -n)
    result = x.field.one
    base = x
    while n:
        if n & 1:
            result = mul(result, base)
        base = mul(base, base)
        n >>= 1
    return result


def inv(x: FieldElement) -> FieldElement:
    if not x:
        raise FieldDivisionError("zero has no multiplicative inverse")
    # x^(q-1) = 1 on the multiplicative group
    return power(x, x.field.order - 2)


def chi(x: FieldElement) -> complex:
    """exp(2 pi i s_1 / p), s_1 = constant coefficient."""
    return complex(np.exp(2j * np.pi * x.coeffs[0] / x.field.p))


def bichar(x: FieldElement, y: FieldElement) -> complex:
    _same_field(x, y)
    return chi(mul(x, y))
