"""Certified enclosures of real values with exact rational endpoints.

An :class:`Enclosure` is a pair ``lo <= hi`` of exact rationals (``gmpy2.mpq``)
guaranteed to bracket the real value it stands for.  Field arithmetic between
enclosures is exact (rational endpoints stay rational), so widening happens
only where a transcendental function enters:

* ``exp_enclosure`` / ``log_enclosure`` evaluate MPFR with directed rounding
  (round-down for the lower endpoint, round-up for the upper), so the bracket
  is rigorous at any requested precision;
* ``rootn_enclosure`` / ``pow_rat_enclosure`` bracket rational powers through
  exact integer k-th roots, giving ``hi - lo <= 2^(1-bits) * value``.

The default working precision is 128 bits; every constructor takes ``bits``
so callers can escalate until a comparison becomes decisive.
"""

from __future__ import annotations

from typing import Union

import gmpy2
from gmpy2 import mpfr, mpq, mpz

from .errors import InvalidArgumentError, PrecisionError

DEFAULT_BITS = 128

Rational = Union[int, mpq]


def _ctx_down(bits: int):
    return gmpy2.context(precision=bits, round=gmpy2.RoundDown)


def _ctx_up(bits: int):
    return gmpy2.context(precision=bits, round=gmpy2.RoundUp)


class Enclosure:
    """A closed interval [lo, hi] of exact rationals containing a real value."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = mpq(lo)
        hi = mpq(hi)
        if lo > hi:
            raise InvalidArgumentError(f"enclosure endpoints out of order: [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def exact(cls, x) -> "Enclosure":
        x = mpq(x)
        return cls(x, x)

    def width(self) -> mpq:
        return self.hi - self.lo

    def mid(self) -> mpq:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        x = mpq(x)
        return self.lo <= x <= self.hi

    def __repr__(self) -> str:
        return f"Enclosure({self.lo}, {self.hi})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Enclosure) and self.lo == other.lo and self.hi == other.hi
        )

    def __hash__(self):
        return hash((self.lo, self.hi))

    # -- exact interval arithmetic ------------------------------------------

    def __add__(self, other) -> "Enclosure":
        other = _as_enclosure(other)
        return Enclosure(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self) -> "Enclosure":
        return Enclosure(-self.hi, -self.lo)

    def __sub__(self, other) -> "Enclosure":
        return self + (-_as_enclosure(other))

    def __rsub__(self, other) -> "Enclosure":
        return _as_enclosure(other) + (-self)

    def __mul__(self, other) -> "Enclosure":
        other = _as_enclosure(other)
        products = (
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        )
        return Enclosure(min(products), max(products))

    __rmul__ = __mul__

    def reciprocal(self) -> "Enclosure":
        if self.lo <= 0 <= self.hi:
            raise InvalidArgumentError("reciprocal of an enclosure containing 0")
        return Enclosure(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other) -> "Enclosure":
        return self * _as_enclosure(other).reciprocal()

    def __rtruediv__(self, other) -> "Enclosure":
        return _as_enclosure(other) * self.reciprocal()

    def __pow__(self, n: int) -> "Enclosure":
        if not isinstance(n, int):
            raise InvalidArgumentError("only integer powers are exact; use pow_rat_enclosure")
        if n == 0:
            return Enclosure.exact(1)
        if n < 0:
            return self.reciprocal() ** (-n)
        if self.lo >= 0:
            return Enclosure(self.lo**n, self.hi**n)
        if self.hi <= 0:
            lo, hi = self.lo**n, self.hi**n
            return Enclosure(min(lo, hi), max(lo, hi))
        # straddles 0
        hi = max(self.lo**n, self.hi**n)
        lo = min(mpq(0), self.lo**n, self.hi**n)
        return Enclosure(lo, hi)

    # -- certified order tests ----------------------------------------------

    def certainly_lt(self, other) -> bool:
        return self.hi < _as_enclosure(other).lo

    def certainly_le(self, other) -> bool:
        return self.hi <= _as_enclosure(other).lo

    def certainly_gt(self, other) -> bool:
        return self.lo > _as_enclosure(other).hi

    def certainly_ge(self, other) -> bool:
        return self.lo >= _as_enclosure(other).hi

    def overlaps(self, other: "Enclosure") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def to_json(self) -> dict:
        return {
            "lo": [str(self.lo.numerator), str(self.lo.denominator)],
            "hi": [str(self.hi.numerator), str(self.hi.denominator)],
            "float": float(self.mid()),
        }


def _as_enclosure(x) -> Enclosure:
    if isinstance(x, Enclosure):
        return x
    return Enclosure.exact(x)


# -- transcendental constructors (directed MPFR rounding) --------------------


def exp_enclosure(x, bits: int = DEFAULT_BITS) -> Enclosure:
    """Certified bracket of exp(x) for exact rational or enclosed x."""
    x = _as_enclosure(x)
    with _ctx_down(bits):
        lo = gmpy2.exp(mpfr(x.lo))
    with _ctx_up(bits):
        hi = gmpy2.exp(mpfr(x.hi))
    return Enclosure(mpq(lo), mpq(hi))


def log_enclosure(x, bits: int = DEFAULT_BITS) -> Enclosure:
    """Certified bracket of the natural log of a positive rational/enclosure."""
    x = _as_enclosure(x)
    if x.lo <= 0:
        raise InvalidArgumentError("log requires a strictly positive argument")
    with _ctx_down(bits):
        lo = gmpy2.log(mpfr(x.lo))
    with _ctx_up(bits):
        hi = gmpy2.log(mpfr(x.hi))
    return Enclosure(mpq(lo), mpq(hi))


def rootn_enclosure(x, n: int, bits: int = DEFAULT_BITS) -> Enclosure:
    """Certified bracket of x**(1/n) for rational x >= 0, via exact integer roots.

    Scales x by 2**(n*bits) and takes the integer n-th root, so both endpoints
    are dyadic rationals and the bracket width is at most 2**(1-bits) * root.
    """
    x = mpq(x)
    if n <= 0:
        raise InvalidArgumentError("root order must be a positive integer")
    if x < 0:
        raise InvalidArgumentError("even/odd root handling restricted to x >= 0")
    if x == 0:
        return Enclosure.exact(0)
    scaled, rem = divmod(x.numerator << (n * bits), x.denominator)
    root, exact = gmpy2.iroot(mpz(scaled), n)
    lo = mpq(root, mpz(1) << bits)
    if exact and rem == 0:
        return Enclosure(lo, lo)
    return Enclosure(lo, mpq(root + 1, mpz(1) << bits))


def sqrt_enclosure(x, bits: int = DEFAULT_BITS) -> Enclosure:
    return rootn_enclosure(x, 2, bits)


def pow_rat_enclosure(x, exponent, bits: int = DEFAULT_BITS) -> Enclosure:
    """Certified bracket of x**(p/q) for rational x >= 0 and rational exponent."""
    x = mpq(x)
    exponent = mpq(exponent)
    num = int(exponent.numerator)
    den = int(exponent.denominator)
    if x == 0:
        if exponent <= 0:
            raise InvalidArgumentError("0 cannot be raised to a non-positive power")
        return Enclosure.exact(0)
    if x < 0:
        raise InvalidArgumentError("rational powers restricted to x >= 0")
    if num < 0:
        return pow_rat_enclosure(1 / x, -exponent, bits)
    base = x**num
    return rootn_enclosure(base, den, bits)


def separate(f_left, f_right, bits: int = DEFAULT_BITS, max_bits: int = 1 << 16) -> int:
    """Escalate precision until two enclosure-valued thunks separate.

    ``f_left(bits)`` and ``f_right(bits)`` must return enclosures of two real
    values known (by the caller) to be unequal.  Returns -1 if left < right,
    +1 if left > right.  Raises PrecisionError at ``max_bits``, which for the
    intended callers signals a defect rather than a tight comparison.
    """
    while bits <= max_bits:
        a = f_left(bits)
        b = f_right(bits)
        if a.certainly_lt(b):
            return -1
        if a.certainly_gt(b):
            return 1
        bits *= 2
    raise PrecisionError(
        f"enclosures failed to separate below {max_bits} bits; "
        "values may be equal (caller contract violated)"
    )
