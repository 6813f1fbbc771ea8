"""Exact integer and rational number-theoretic primitives.

Sieves, factorization through a smallest-prime-factor table, Euler's totient
and the ratio phi(q)/q = prod_{p|q} (1 - 1/p), Mertens-type prime-reciprocal
sums, the tail sums lambda_t(q) = sum_{p|q, p>t} 1/p over large prime factors,
and the Chernoff-style exceeder counts used to bound how often lambda_t can be
large.  Everything is exact: rationals are gmpy2.mpq, and the only enclosed
quantity is the exponential inside the Chernoff bound.

"log" means the natural logarithm throughout the package.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from gmpy2 import mpq

from .enclosure import DEFAULT_BITS, Enclosure, exp_enclosure
from .errors import InvalidArgumentError, ResourceLimitError

# sieve memory budget: spf table is int32, so this is ~200 MB
DEFAULT_SIEVE_BUDGET = 50_000_000


@dataclass(frozen=True)
class PrimeTable:
    """Primes up to ``limit`` plus a smallest-prime-factor table.

    ``spf[n]`` is the least prime factor of n for 2 <= n <= limit; primes are
    ascending.  Immutable and shareable across threads.
    """

    limit: int
    primes: tuple[int, ...]
    spf: np.ndarray

    def __post_init__(self):
        self.spf.setflags(write=False)

    def is_prime(self, n: int) -> bool:
        return 2 <= n <= self.limit and int(self.spf[n]) == n

    def primes_leq(self, t) -> list[int]:
        """All primes p <= t for a rational or integer bound t <= limit."""
        t = mpq(t)
        if t > self.limit:
            raise InvalidArgumentError(f"bound {t} exceeds table limit {self.limit}")
        cut = int(t.numerator // t.denominator)  # floor
        idx = bisect.bisect_right(self.primes, cut)
        return list(self.primes[:idx])

    def __repr__(self) -> str:
        return f"PrimeTable(limit={self.limit}, n_primes={len(self.primes)})"


@dataclass(frozen=True)
class FactoredInt:
    """A positive integer together with its full prime factorization.

    ``factors`` is an ascending tuple of (prime, exponent >= 1) pairs whose
    product of prime powers equals ``value``; 1 carries the empty tuple.
    """

    value: int
    factors: tuple[tuple[int, int], ...]

    @property
    def squarefree(self) -> bool:
        return all(e == 1 for _, e in self.factors)

    def prime_divisors(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    def to_json(self) -> dict:
        return {
            "value": str(self.value),
            "factors": [[int(p), int(e)] for p, e in self.factors],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FactoredInt":
        value = int(doc["value"])
        factors = tuple((int(p), int(e)) for p, e in doc["factors"])
        f = cls(value, factors)
        f.check()
        return f

    def check(self) -> None:
        prod = 1
        prev = 1
        for p, e in self.factors:
            if p <= prev or e < 1:
                raise InvalidArgumentError(f"malformed factorization of {self.value}")
            prod *= p**e
            prev = p
        if prod != self.value or self.value < 1:
            raise InvalidArgumentError(
                f"factorization product {prod} != value {self.value}"
            )


def sieve(limit: int, budget: int = DEFAULT_SIEVE_BUDGET) -> PrimeTable:
    """Smallest-prime-factor sieve for 2..limit."""
    if limit < 2:
        raise InvalidArgumentError("sieve limit must be >= 2")
    if limit > budget:
        raise ResourceLimitError(f"sieve limit {limit} exceeds budget {budget}")
    spf = np.zeros(limit + 1, dtype=np.int32)
    spf[2::2] = 2
    for i in range(3, int(limit**0.5) + 1, 2):
        if spf[i] == 0:
            spf[i * i :: 2 * i][spf[i * i :: 2 * i] == 0] = i
    odd = np.arange(3, limit + 1, 2)
    unmarked = odd[spf[3::2] == 0]
    spf[unmarked] = unmarked
    primes = tuple(int(p) for p in np.nonzero(spf == np.arange(limit + 1))[0] if p >= 2)
    return PrimeTable(limit=limit, primes=primes, spf=spf)


def factor(n: int, table: PrimeTable) -> FactoredInt:
    """Factor n <= limit**2 by the spf table (fast path) or trial division."""
    if n < 1:
        raise InvalidArgumentError("factor requires n >= 1")
    if n > table.limit * table.limit:
        raise InvalidArgumentError(
            f"{n} exceeds limit^2 = {table.limit**2}; trial division cannot certify"
        )
    factors: list[tuple[int, int]] = []
    m = n
    if n <= table.limit:
        spf = table.spf
        while m > 1:
            p = int(spf[m])
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            factors.append((p, e))
    else:
        for p in table.primes:
            if p * p > m:
                break
            if m % p == 0:
                e = 0
                while m % p == 0:
                    m //= p
                    e += 1
                factors.append((p, e))
        if m > 1:
            # m is prime: no prime <= sqrt(n) <= limit divides it
            factors.append((m, 1))
    return FactoredInt(value=n, factors=tuple(factors))


def totient(n: FactoredInt) -> int:
    """Euler's phi: the count of 1 <= a <= n coprime to n."""
    out = 1
    for p, e in n.factors:
        out *= p ** (e - 1) * (p - 1)
    return out


def phi_ratio(n: FactoredInt) -> mpq:
    """phi(n)/n = prod_{p|n} (1 - 1/p), exactly."""
    out = mpq(1)
    for p, _ in n.factors:
        out *= mpq(p - 1, p)
    return out


def mertens_sum(t, table: PrimeTable) -> mpq:
    """sum_{p <= t} 1/p as an exact rational, for t <= table.limit."""
    if mpq(t) <= 0:
        raise InvalidArgumentError("mertens_sum requires t > 0")
    out = mpq(0)
    for p in table.primes_leq(t):
        out += mpq(1, p)
    return out


def lambda_t(q: FactoredInt, t) -> mpq:
    """sum of 1/p over prime divisors p of q with p > t."""
    t = mpq(t)
    out = mpq(0)
    for p, _ in q.factors:
        if p > t:
            out += mpq(1, p)
    return out


def correlation_prime_sum(q: FactoredInt, r: FactoredInt, t, variant: str = "gcd_squared") -> mpq:
    """Reciprocal sum over large primes of qr/gcd(q,r)^2 (or qr/gcd(q,r)).

    ``gcd_squared`` sums 1/p over primes p > t of q*r/gcd(q,r)^2; for
    square-free q, r these are the primes dividing exactly one of the two.
    ``gcd`` uses the weaker quotient q*r/gcd(q,r), i.e. every prime of qr.
    The two variants differ by the primes of gcd(q,r); both appear in the
    correlation analysis and the discrepancy is deliberately surfaced.
    """
    if variant not in ("gcd", "gcd_squared"):
        raise InvalidArgumentError(f"unknown variant {variant!r}")
    t = mpq(t)
    qp = dict(q.factors)
    rp = dict(r.factors)
    out = mpq(0)
    for p in sorted(set(qp) | set(rp)):
        if p <= t:
            continue
        eq = qp.get(p, 0)
        er = rp.get(p, 0)
        # multiplicity in qr/gcd^2 is |eq - er|; in qr/gcd it is max(eq, er)
        mult = abs(eq - er) if variant == "gcd_squared" else max(eq, er)
        if mult > 0:
            out += mpq(1, p)
    return out


def primorial(j: int, table: PrimeTable) -> int:
    """Product of the first j primes; primorial(0) = 1."""
    if j < 0:
        raise InvalidArgumentError("primorial order must be >= 0")
    if j > len(table.primes):
        raise InvalidArgumentError(
            f"table holds {len(table.primes)} primes; cannot take first {j}"
        )
    out = 1
    for p in table.primes[:j]:
        out *= p
    return out


def sieve_weight_sum(x: int, weight: Callable[[int], object], table: PrimeTable) -> mpq:
    """sum_{n <= x} prod_{p|n} a_p with a_p = weight(p), exactly.

    Serves as the brute-force side of the multiplicative sieve upper bound
    sum <= C * x * exp(sum_{p<=x} (a_p - 1)/p).
    """
    if x < 1:
        raise InvalidArgumentError("sieve_weight_sum requires x >= 1")
    if x > table.limit:
        raise InvalidArgumentError("x exceeds table limit")
    cache: dict[int, mpq] = {}

    def a(p: int) -> mpq:
        if p not in cache:
            val = mpq(weight(p))
            if val < 0:
                raise InvalidArgumentError("weights must be non-negative")
            cache[p] = val
        return cache[p]

    out = mpq(1)  # n = 1 contributes the empty product
    spf = table.spf
    for n in range(2, x + 1):
        m = n
        term = mpq(1)
        while m > 1:
            p = int(spf[m])
            term *= a(p)
            while m % p == 0:
                m //= p
        out += term
    return out


@dataclass(frozen=True)
class ExceederReport:
    """Count of q <= x with lambda_t(q) > threshold, plus its Chernoff bound."""

    count: int
    chernoff_bound: Enclosure

    def to_json(self) -> dict:
        return {"count": self.count, "chernoff_bound": self.chernoff_bound.to_json()}


def count_lambda_exceeders(
    x: int, t, threshold, table: PrimeTable, bits: int = DEFAULT_BITS
) -> ExceederReport:
    """Exact exceeder count against sum_q exp(-threshold*t + t*lambda_t(q)).

    The bound is a true majorant: each counted q contributes a term > 1.
    """
    if x < 1 or x > table.limit:
        raise InvalidArgumentError("x must satisfy 1 <= x <= table.limit")
    t = mpq(t)
    threshold = mpq(threshold)
    count = 0
    bound = Enclosure.exact(0)
    exp_cache: dict[mpq, Enclosure] = {}
    spf = table.spf
    for q in range(1, x + 1):
        lam = mpq(0)
        m = q
        while m > 1:
            p = int(spf[m])
            if p > t:
                lam += mpq(1, p)
            while m % p == 0:
                m //= p
        if lam > threshold:
            count += 1
        arg = t * lam - threshold * t
        if arg not in exp_cache:
            exp_cache[arg] = exp_enclosure(arg, bits)
        bound = bound + exp_cache[arg]
    return ExceederReport(count=count, chernoff_bound=bound)


def prime_factor_band_counts(
    q: FactoredInt, bands: Sequence[tuple[object, object]]
) -> list[int]:
    """Count prime divisors of q in each half-open band (lo, hi].

    Band edges are exact rationals; callers tracking transcendental edges
    (e.g. powers of e) evaluate this once per enclosure endpoint and compare.
    """
    edges = [(mpq(lo), mpq(hi)) for lo, hi in bands]
    for i, (lo, hi) in enumerate(edges):
        if lo >= hi:
            raise InvalidArgumentError(f"band {i} is empty or reversed")
        for j, (lo2, hi2) in enumerate(edges):
            if i < j and lo < hi2 and lo2 < hi:
                raise InvalidArgumentError(f"bands {i} and {j} overlap")
    counts = [0] * len(edges)
    for p, _ in q.factors:
        for i, (lo, hi) in enumerate(edges):
            if lo < p <= hi:
                counts[i] += 1
    return counts


def coprime_residues(q: int) -> np.ndarray:
    """Ascending array of 0 <= a <= q with gcd(a, q) = 1 (both ends for q = 1)."""
    if q < 1:
        raise InvalidArgumentError("q must be >= 1")
    if q == 1:
        return np.array([0, 1], dtype=np.int64)
    a = np.arange(1, q, dtype=np.int64)
    return a[np.gcd(a, q) == 1]


def squarefree_in(lo: int, hi: int, table: PrimeTable) -> list[FactoredInt]:
    """All square-free integers in [lo, hi], factored."""
    if hi > table.limit:
        raise InvalidArgumentError("range exceeds table limit")
    out = []
    for n in range(max(lo, 1), hi + 1):
        f = factor(n, table)
        if f.squarefree:
            out.append(f)
    return out
