"""Continued fraction expansions with certified convergent errors.

Supports three kinds of values:

* exact rationals p/q (Euclid's algorithm, expansion terminates);
* quadratic surds (P + sqrt(D))/Q with integer data, expanded by the exact
  integer recurrence, so partial quotients and all error comparisons are
  certified without any working precision;
* values known only through a certified enclosure (named constants such as
  e and pi) where an ambiguous integer part raises PrecisionError instead of
  silently guessing.

Convergents a_j/q_j follow the standard recurrence a_j = n_j a_{j-1} + a_{j-2},
q_j = n_j q_{j-1} + q_{j-2}.  For each convergent the toolkit can certify the
two-sided error bracket 1/(2 q_j q_{j+1}) <= |x - a_j/q_j| <= 1/(q_j q_{j+1})
and can scan all reduced fractions with small denominator to confirm that
every a/q with |x - a/q| < 1/(2 q^2) is a convergent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import gmpy2
from gmpy2 import isqrt, mpfr, mpq

from .enclosure import DEFAULT_BITS, Enclosure, sqrt_enclosure
from .errors import InvalidArgumentError, PrecisionError


@dataclass(frozen=True)
class Surd:
    """The quadratic irrational (p + sqrt(d)) / q with integer p, d, q.

    d must be positive and not a perfect square (rationals take the exact
    path instead); q must be nonzero.
    """

    p: int
    d: int
    q: int

    def __post_init__(self):
        if self.q == 0:
            raise InvalidArgumentError("surd denominator must be nonzero")
        if self.d <= 0:
            raise InvalidArgumentError("surd radicand must be positive")
        r = isqrt(self.d)
        if r * r == self.d:
            raise InvalidArgumentError(
                f"{self.d} is a perfect square; use a rational value instead"
            )

    def floor(self) -> int:
        """Exact integer part, valid because sqrt(d) is irrational."""
        s = int(isqrt(self.d))
        if self.q > 0:
            return (self.p + s) // self.q
        return -((self.p + s) // (-self.q)) - 1

    def compare_rational(self, r) -> int:
        """Exact sign of self - r; never 0 since self is irrational."""
        r = mpq(r)
        # (p + sqrt(d))/q - n/m has the sign of m*p - n*q + m*sqrt(d), times sign(q*m)
        n, m = r.numerator, r.denominator
        t = m * self.p - n * self.q  # compare m*sqrt(d) vs -t
        sign_qm = 1 if (self.q > 0) == (m > 0) else -1
        lhs_sq = m * m * self.d
        if t >= 0:
            return sign_qm  # m sqrt(d) > 0 >= -t
        # both sides positive: compare squares
        return sign_qm if lhs_sq > t * t else -sign_qm

    def compare_abs_err(self, a: int, q: int, s) -> int:
        """Exact sign of |self - a/q| - s for rational s > 0."""
        r = mpq(a, q)
        s = mpq(s)
        if self.compare_rational(r - s) < 0 or self.compare_rational(r + s) > 0:
            return 1
        return -1

    def enclosure(self, bits: int = DEFAULT_BITS) -> Enclosure:
        root = sqrt_enclosure(self.d, bits)
        return (root + self.p) * Enclosure.exact(mpq(1, self.q))

    def error_enclosure(self, a: int, q: int, bits: int = DEFAULT_BITS) -> Enclosure:
        """Enclosure of |self - a/q|."""
        e = self.enclosure(bits) - mpq(a, q)
        if e.lo >= 0:
            return e
        if e.hi <= 0:
            return -e
        return Enclosure(mpq(0), max(-e.lo, e.hi))

    def expand(self, max_terms: int) -> "Expansion":
        """Partial quotients by the exact recurrence on (P, Q) pairs."""
        if max_terms < 1:
            raise InvalidArgumentError("need at least one term")
        p, d, q = self.p, self.d, self.q
        if (d - p * p) % q:
            # rescale so that q | d - p^2, preserving the value
            p, d, q = p * abs(q), d * q * q, q * abs(q)
        terms = []
        for _ in range(max_terms):
            n = Surd(p, d, q).floor()
            terms.append(n)
            p1 = n * q - p
            q1 = (d - p1 * p1) // q
            p, q = p1, q1
        return Expansion(terms=tuple(terms), exact=False)


@dataclass(frozen=True)
class Expansion:
    """Partial quotients [n_0; n_1, n_2, ...] of a continued fraction.

    ``exact`` is True when the expansion terminated (rational input).
    """

    terms: tuple[int, ...]
    exact: bool

    def convergents(self) -> tuple[tuple[int, int], ...]:
        return convergents(self.terms)


def convergents(terms: Sequence[int]) -> tuple[tuple[int, int], ...]:
    """Reduced convergents (a_j, q_j) of the given partial quotients."""
    out: list[tuple[int, int]] = []
    a_prev2, q_prev2 = 1, 0
    a_prev, q_prev = terms[0] if terms else 0, 1
    if terms:
        out.append((a_prev, q_prev))
    for n in terms[1:]:
        a = n * a_prev + a_prev2
        q = n * q_prev + q_prev2
        out.append((a, q))
        a_prev2, q_prev2 = a_prev, q_prev
        a_prev, q_prev = a, q
    return tuple(out)


def expand_rational(value, max_terms: int) -> Expansion:
    """Euclid's algorithm; stops early when the expansion terminates."""
    if max_terms < 1:
        raise InvalidArgumentError("need at least one term")
    value = mpq(value)
    num, den = value.numerator, value.denominator
    terms = []
    while den and len(terms) < max_terms:
        n, rem = divmod(num, den)
        terms.append(int(n))
        num, den = den, rem
    return Expansion(terms=tuple(terms), exact=(den == 0))


def expand_enclosure(enc: Enclosure, max_terms: int) -> Expansion:
    """Expansion of a value known only inside [enc.lo, enc.hi].

    Each emitted term is certified: if the bracket does not pin down the
    integer part, or collapses onto an endpoint, PrecisionError explains
    that the caller must supply a tighter enclosure.
    """
    if max_terms < 1:
        raise InvalidArgumentError("need at least one term")
    lo, hi = enc.lo, enc.hi
    terms: list[int] = []
    while len(terms) < max_terms:
        n_lo = lo.numerator // lo.denominator
        n_hi = hi.numerator // hi.denominator
        if n_lo != n_hi:
            raise PrecisionError(
                f"integer part ambiguous after {len(terms)} terms; "
                "increase the working precision"
            )
        terms.append(int(n_lo))
        frac_lo, frac_hi = lo - n_lo, hi - n_lo
        if frac_lo == 0:
            raise PrecisionError(
                f"enclosure touches an integer after {len(terms)} terms; "
                "increase the working precision"
            )
        lo, hi = 1 / frac_hi, 1 / frac_lo
    return Expansion(terms=tuple(terms), exact=False)


def constant_enclosure(name: str, bits: int) -> Enclosure:
    """Certified enclosure of a named constant (e or pi)."""
    if name == "e":
        with gmpy2.context(precision=bits, round=gmpy2.RoundDown):
            lo = gmpy2.exp(mpfr(1))
        with gmpy2.context(precision=bits, round=gmpy2.RoundUp):
            hi = gmpy2.exp(mpfr(1))
    elif name == "pi":
        with gmpy2.context(precision=bits, round=gmpy2.RoundDown):
            lo = gmpy2.const_pi()
        with gmpy2.context(precision=bits, round=gmpy2.RoundUp):
            hi = gmpy2.const_pi()
    else:
        raise InvalidArgumentError(f"unknown constant {name!r}; available: e, pi")
    return Enclosure(mpq(lo), mpq(hi))


Value = Union[mpq, Surd, Enclosure]


@dataclass(frozen=True)
class ConvergentRow:
    """One line of a convergent table with its certified error bracket."""

    j: int
    term: int
    a: int
    q: int
    err: Optional[Enclosure]  # None for the final convergent of a rational
    lower_ok: Optional[bool]  # 1/(2 q_j q_{j+1}) <= err
    upper_ok: Optional[bool]  # err <= 1/(q_j q_{j+1})

    def to_json(self) -> dict:
        return {
            "j": self.j,
            "term": self.term,
            "a": str(self.a),
            "q": str(self.q),
            "err": None if self.err is None else self.err.to_json(),
            "lower_ok": self.lower_ok,
            "upper_ok": self.upper_ok,
        }


def convergent_table(value: Value, terms: int, bits: int = DEFAULT_BITS) -> list[ConvergentRow]:
    """Expansion, convergents, error enclosures, and two-sided bound checks.

    The bound checks certify 1/(2 q_j q_{j+1}) <= |x - a_j/q_j| <= 1/(q_j q_{j+1})
    for every j with a successor convergent.  For surds the comparisons are
    exact; for enclosure-backed constants an undecidable comparison raises
    PrecisionError.
    """
    if isinstance(value, Surd):
        exp = value.expand(terms)
    elif isinstance(value, Enclosure):
        exp = expand_enclosure(value, terms)
    else:
        exp = expand_rational(mpq(value), terms)
    conv = convergents(exp.terms)
    rows: list[ConvergentRow] = []
    for j, (a, q) in enumerate(conv):
        err: Optional[Enclosure]
        lower_ok = upper_ok = None
        if isinstance(value, Surd):
            err = value.error_enclosure(a, q, bits)
        elif isinstance(value, Enclosure):
            err = _abs_err_enclosure(value, mpq(a, q))
        else:
            diff = mpq(value) - mpq(a, q)
            err = Enclosure.exact(abs(diff))
        if j + 1 < len(conv):
            q_next = conv[j + 1][1]
            lower = mpq(1, 2 * q * q_next)
            upper = mpq(1, q * q_next)
            if isinstance(value, Surd):
                lower_ok = value.compare_abs_err(a, q, lower) > 0
                upper_ok = value.compare_abs_err(a, q, upper) < 0
            elif isinstance(value, Enclosure):
                if err.certainly_ge(Enclosure.exact(lower)):
                    lower_ok = True
                elif err.certainly_lt(Enclosure.exact(lower)):
                    lower_ok = False
                else:
                    raise PrecisionError("error bracket too wide for bound check")
                if err.certainly_le(Enclosure.exact(upper)):
                    upper_ok = True
                elif err.certainly_gt(Enclosure.exact(upper)):
                    upper_ok = False
                else:
                    raise PrecisionError("error bracket too wide for bound check")
            else:
                lower_ok = err.lo >= lower
                upper_ok = err.hi <= upper
        rows.append(
            ConvergentRow(
                j=j, term=exp.terms[j], a=a, q=q, err=err, lower_ok=lower_ok, upper_ok=upper_ok
            )
        )
    return rows


def _abs_err_enclosure(enc: Enclosure, r: mpq) -> Enclosure:
    e = enc - r
    if e.lo >= 0:
        return e
    if e.hi <= 0:
        return -e
    return Enclosure(mpq(0), max(-e.lo, e.hi))


def good_approximations(x: Surd, qmax: int) -> list[tuple[int, int]]:
    """All reduced a/q with q <= qmax and |x - a/q| < 1/(2 q^2), exactly.

    By the classical theorem every such fraction is a convergent; this scan
    is the brute-force side of that check.
    """
    out = []
    for q in range(1, qmax + 1):
        # only the nearest integers to x*q can qualify
        xq = Surd(x.p * q, x.d * q * q, x.q)
        n = xq.floor()
        for a in (n, n + 1):
            if math.gcd(a, q) != 1:
                continue
            if x.compare_abs_err(a, q, mpq(1, 2 * q * q)) < 0:
                out.append((a, q))
    return out


def best_approximation(x: Surd, q_limit: int) -> tuple[int, int]:
    """argmin over 1 <= q <= q_limit of |x - a/q|, by exact midpoint tests.

    Used to cross-check that convergents are best approximations among all
    fractions with denominator up to q_j.
    """
    best: Optional[tuple[int, int]] = None
    for q in range(1, q_limit + 1):
        xq = Surd(x.p * q, x.d * q * q, x.q)
        n = xq.floor()
        for a in (n, n + 1):
            if best is None:
                best = (a, q)
                continue
            # compare |x - a/q| vs |x - best|: exact via midpoint sign tests
            if _abs_err_less(x, (a, q), best):
                best = (a, q)
    assert best is not None
    return best


def _abs_err_less(x: Surd, left: tuple[int, int], right: tuple[int, int]) -> bool:
    """Exact test |x - l| < |x - r| for distinct rationals l, r."""
    l = mpq(left[0], left[1])
    r = mpq(right[0], right[1])
    if l == r:
        return False
    # |x-l| < |x-r|  iff  x is on l's side of the midpoint
    mid = (l + r) / 2
    return (x.compare_rational(mid) < 0) == (l < r)


def irrationality_exponents(conv: Sequence[tuple[int, int]]) -> list[float]:
    """Estimator nu_j = 1 + log q_{j+1} / log q_j from consecutive convergents.

    |x - a_j/q_j| is within a factor 2 of 1/(q_j q_{j+1}), so nu_j tracks the
    exponent nu with |x - a/q| ~ q^{-nu}; for badly approximable numbers the
    sequence hovers near 2.  A float estimator is adequate here.
    """
    out = []
    for (a1, q1), (a2, q2) in zip(conv, conv[1:]):
        if q1 > 1:
            out.append(1.0 + math.log(q2) / math.log(q1))
    return out
