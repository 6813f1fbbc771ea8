"""Approximation sets, their exact measures, correlations, and experiments.

For a radius sequence q -> Delta_q the set A_q collects the x in [0,1] within
Delta_q of some fraction a/q (A_q* restricts to reduced fractions).  Under the
standing normalization Delta_q <= 1/(2q) these sets have exact measures
2 q Delta_q and 2 phi(q) Delta_q, and this module constructs them exactly,
computes pairwise intersection measures, second-moment lower bounds for union
measures, windows [Q, R] with total mass in [1, 2], the divisor-supported
radius family that defeats the non-reduced heuristic, the sup-over-multiples
transform linking reduced and non-reduced sets, and deterministic Monte Carlo
counting experiments.

Radii are exact rationals.  Radii defined through logarithms are stored as
certified rational lower enclosures with relative width <= 2^-64.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import gcd, isqrt, lcm
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from gmpy2 import mpq

from . import numtheory as nt
from .enclosure import DEFAULT_BITS, Enclosure, exp_enclosure, log_enclosure, rootn_enclosure
from .errors import (
    InternalInvariantError,
    InvalidArgumentError,
    SaturationError,
)
from .intervals import (
    EMPTY,
    ONE,
    ZERO,
    IntervalUnion,
    intersect,
    measure,
    normalize,
    union_all,
    union_unchecked,
)

_U64 = np.uint64
_TWO63 = 1 << 63
_TWO64 = 1 << 64


# ---------------------------------------------------------------------------
# radius sequences


@dataclass(frozen=True)
class DeltaSequence:
    """Finitely supported map q -> Delta_q of exact non-negative rationals.

    ``clipped`` lists the q where a constructor reduced a larger true value
    to the saturation bound 1/(2q).
    """

    qmax: int
    values: Mapping[int, mpq]
    label: str
    clipped: frozenset = frozenset()

    def __post_init__(self):
        for q, v in self.values.items():
            if not (1 <= q <= self.qmax):
                raise InvalidArgumentError(f"support point {q} outside [1, qmax]")
            if v < 0:
                raise InvalidArgumentError(f"negative radius at q={q}")

    def get(self, q: int) -> mpq:
        return self.values.get(q, mpq(0))

    def support(self) -> tuple[int, ...]:
        return tuple(sorted(q for q, v in self.values.items() if v > 0))

    def is_saturated(self, q: int) -> bool:
        return self.get(q) > mpq(1, 2 * q)

    def saturated_support(self) -> tuple[int, ...]:
        return tuple(q for q in self.support() if self.is_saturated(q))

    def require_unsaturated(self) -> None:
        bad = self.saturated_support()
        if bad:
            raise SaturationError(f"radius exceeds 1/(2q) at q={bad[0]}")

    def restricted(self, lo: int, hi: int) -> "DeltaSequence":
        vals = {q: v for q, v in self.values.items() if lo <= q <= hi}
        return DeltaSequence(
            qmax=self.qmax,
            values=vals,
            label=f"{self.label}|[{lo},{hi}]",
            clipped=frozenset(q for q in self.clipped if lo <= q <= hi),
        )

    def to_json(self) -> dict:
        return {
            "schema": "delta-sequence/v1",
            "qmax": self.qmax,
            "label": self.label,
            "clipped": sorted(self.clipped),
            "values": [
                [q, str(v.numerator), str(v.denominator)]
                for q, v in sorted(self.values.items())
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DeltaSequence":
        vals = {int(q): mpq(int(n), int(d)) for q, n, d in doc["values"]}
        return cls(
            qmax=int(doc["qmax"]),
            values=vals,
            label=str(doc.get("label", "file")),
            clipped=frozenset(int(q) for q in doc.get("clipped", [])),
        )

    def csv_rows(self, reduced: bool = True):
        """(q, Delta_q, measure) rows over the support."""
        for q in self.support():
            v = self.get(q)
            m = 2 * (_phi(q) if reduced else q) * v
            yield q, v, m


def delta_khinchin(c, qmax: int, bits: int = DEFAULT_BITS) -> DeltaSequence:
    """Delta_q = 1/(q^2 log^c q) for 2 <= q <= qmax, clipped at 1/(2q).

    Stored values are certified rational lower enclosures of the true radii
    (relative width <= 2^-64); q = 2 is clipped to 1/4 for c = 1 since
    4 log 2 < 2.  Clipped q's are flagged.
    """
    c = mpq(c)
    if c <= 0:
        raise InvalidArgumentError("khinchin exponent must be positive")
    if qmax < 2:
        raise InvalidArgumentError("qmax must be >= 2")
    work = max(bits, 80)
    values: dict[int, mpq] = {}
    clipped = set()
    for q in range(2, qmax + 1):
        cap = mpq(1, 2 * q)
        dq = _khinchin_value(q, c, work)
        while True:
            if dq.lo > cap:
                values[q] = cap
                clipped.add(q)
                break
            if dq.hi <= cap:
                values[q] = dq.lo
                break
            work2 = 2 * work
            dq = _khinchin_value(q, c, work2)  # boundary case: refine
            if work2 > 4096:
                raise InternalInvariantError("khinchin clip comparison stuck")
    return DeltaSequence(
        qmax=qmax, values=values, label=f"khinchin:{c}", clipped=frozenset(clipped)
    )


def _khinchin_value(q: int, c: mpq, bits: int) -> Enclosure:
    ln = log_enclosure(q, bits)
    if c == 1:
        powed = ln
    elif c.denominator == 1:
        powed = ln ** int(c)
    else:
        lo = _rat_pow_lo(ln.lo, c, bits)
        hi = _rat_pow_hi(ln.hi, c, bits)
        powed = Enclosure(lo, hi)
    return (Enclosure.exact(q * q) * powed).reciprocal()


def _rat_pow_lo(x: mpq, e: mpq, bits: int) -> mpq:
    return rootn_enclosure(x ** int(e.numerator), int(e.denominator), bits).lo


def _rat_pow_hi(x: mpq, e: mpq, bits: int) -> mpq:
    return rootn_enclosure(x ** int(e.numerator), int(e.denominator), bits).hi


@dataclass(frozen=True)
class CounterexampleLevel:
    """One level of the divisor-supported counterexample family.

    Members are q = d * p_j over divisors d of the previous primorial; all
    share the radius (primorial_j * j * log^2 j)^-1.  The exact identity
    sum_{q} q * Delta_q * (j log^2 j) = prod_{i<j} (1 + 1/p_i) splits into the
    stored rational factor and the common log^2 j enclosure.
    """

    j: int
    prime: int
    primorial: int
    members: tuple[int, ...]
    delta: Enclosure  # enclosure of the common radius
    delta_lo: mpq  # stored radius (lower endpoint)
    identity_lhs: mpq  # sum of members / primorial_j
    identity_rhs: mpq  # prod_{i <= j-1} (1 + 1/p_i)
    log_sq: Enclosure  # enclosure of log^2 j

    def to_json(self) -> dict:
        return {
            "j": self.j,
            "prime": self.prime,
            "primorial": str(self.primorial),
            "members": [str(m) for m in self.members],
            "delta": self.delta.to_json(),
            "identity_lhs": [str(self.identity_lhs.numerator), str(self.identity_lhs.denominator)],
            "identity_rhs": [str(self.identity_rhs.numerator), str(self.identity_rhs.denominator)],
        }


@dataclass(frozen=True)
class CounterexampleResult:
    delta: DeltaSequence
    levels: tuple[CounterexampleLevel, ...]


def delta_counterexample(
    J: int, table: nt.PrimeTable, bits: int = DEFAULT_BITS
) -> CounterexampleResult:
    """Radius family supported on S_j = {d p_j : d | p_1...p_{j-1}}, j = 2..J.

    Every member of S_j gets the radius 1/(primorial_j * j * log^2 j), stored
    as the lower endpoint of a certified enclosure.  The linear mass
    sum q Delta_q diverges in j while the reduced mass stays summable, which
    is the classical obstruction to dropping the reduced-fraction restriction.
    """
    if J < 2:
        raise InvalidArgumentError("need at least two levels")
    if J > len(table.primes):
        raise InvalidArgumentError("prime table too small for requested levels")
    work = max(bits, 80)
    values: dict[int, mpq] = {}
    levels = []
    primorial_prev = table.primes[0]  # q_1 = 2
    rhs = mpq(1) + mpq(1, table.primes[0])  # prod over i <= 1
    for j in range(2, J + 1):
        p_j = table.primes[j - 1]
        primorial_j = primorial_prev * p_j
        divisors = _divisors_of_squarefree(table.primes[: j - 1])
        members = tuple(sorted(d * p_j for d in divisors))
        ln = log_enclosure(j, work)
        log_sq = ln * ln
        delta_enc = (Enclosure.exact(primorial_j * j) * log_sq).reciprocal()
        for q in members:
            values[q] = delta_enc.lo
        levels.append(
            CounterexampleLevel(
                j=j,
                prime=p_j,
                primorial=primorial_j,
                members=members,
                delta=delta_enc,
                delta_lo=delta_enc.lo,
                identity_lhs=mpq(sum(members), primorial_j),
                identity_rhs=rhs,
                log_sq=log_sq,
            )
        )
        rhs *= mpq(1) + mpq(1, p_j)
        primorial_prev = primorial_j
    delta = DeltaSequence(
        qmax=primorial_prev,
        values=values,
        label=f"counterexample:{J}",
    )
    return CounterexampleResult(delta=delta, levels=tuple(levels))


def _divisors_of_squarefree(primes: Sequence[int]) -> list[int]:
    divs = [1]
    for p in primes:
        divs += [d * p for d in divs]
    return divs


def delta_uniform_support(S: Iterable[int], N, qmax: Optional[int] = None) -> DeltaSequence:
    """Delta_q = 1/(qN) on S, zero elsewhere; requires N >= 2 for saturation."""
    N = mpq(N)
    S = sorted(set(int(q) for q in S))
    if any(q < 1 for q in S):
        raise InvalidArgumentError("support must consist of positive integers")
    if N < 2:
        raise SaturationError("1/(qN) exceeds 1/(2q) when N < 2")
    if qmax is None:
        qmax = max(S) if S else 1
    values = {q: mpq(1, q) / N for q in S}
    return DeltaSequence(qmax=qmax, values=values, label=f"uniform:{N}")


# ---------------------------------------------------------------------------
# set construction and exact measures


def build_Aq(q: int, dq, reduced: bool) -> IntervalUnion:
    """The exact interval union around fractions a/q with radius dq.

    Reduced mode keeps only gcd(a, q) = 1.  Saturated radii (dq > 1/(2q)) are
    an error here: callers that want the paper's standing normalization clip
    first (delta_khinchin does).
    """
    if q < 1:
        raise InvalidArgumentError("q must be >= 1")
    dq = mpq(dq)
    if dq < 0:
        raise InvalidArgumentError("radius must be non-negative")
    if dq > mpq(1, 2 * q):
        raise SaturationError(f"radius {dq} exceeds 1/(2q) for q={q}")
    if dq == 0:
        return EMPTY
    centers = nt.coprime_residues(q) if reduced else np.arange(0, q + 1, dtype=np.int64)
    if dq < mpq(1, 2 * q) and q >= 2:
        # consecutive centers differ by >= 1/q > 2 dq: disjoint by construction,
        # and only the non-reduced family touches 0 and 1 (where it is clipped)
        pairs = []
        first = int(centers[0])
        last = int(centers[-1])
        for a in centers:
            c = mpq(int(a), q)
            lo = c - dq
            hi = c + dq
            if a == first and lo < 0:
                lo = ZERO
            if a == last and hi > 1:
                hi = ONE
            pairs.append((lo, hi))
        return union_unchecked(pairs)
    parts = []
    for a in centers:
        c = mpq(int(a), q)
        parts.append((c - dq, c + dq))
    return normalize(parts)


@dataclass(frozen=True)
class PairData:
    """Exact intersection measure of two reduced sets plus comparison data.

    ``overlap_bound`` is 2 * max(Delta_q, Delta_r) * lcm(q, r); at most 1
    forces an empty intersection.  ``pv_term`` is the product
    phi(q) Delta_q phi(r) Delta_r exp(sum 1/p) whose ratio against the exact
    measure stays bounded.
    """

    q: int
    r: int
    exact_meas: mpq
    M: mpq
    pv_term: Enclosure

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "r": self.r,
            "exact_meas": [str(self.exact_meas.numerator), str(self.exact_meas.denominator)],
            "M": [str(self.M.numerator), str(self.M.denominator)],
            "pv_term": self.pv_term.to_json(),
        }


_AMBIENT_TABLE: list[nt.PrimeTable] = [nt.sieve(1024)]


def _table_for(n: int) -> nt.PrimeTable:
    """A shared prime table able to factor every integer up to n."""
    need = max(2, isqrt(n) + 1)
    if _AMBIENT_TABLE[0].limit < need:
        _AMBIENT_TABLE[0] = nt.sieve(max(need, 2 * _AMBIENT_TABLE[0].limit))
    return _AMBIENT_TABLE[0]


def _phi(q: int) -> int:
    # prefer the spf fast path when sieving up to q is affordable
    if q <= 20_000_000:
        return nt.totient(nt.factor(q, _table_for(q * q)))
    return nt.totient(nt.factor(q, _table_for(q)))


def rational_sum(terms) -> mpq:
    """Exact sum by balanced pairwise reduction.

    Summing many rationals with unrelated denominators left-to-right makes
    every partial sum carry the full common denominator; pairwise reduction
    keeps the big-number work at the top of the tree.
    """
    items = [mpq(t) for t in terms]
    if not items:
        return mpq(0)
    while len(items) > 1:
        nxt = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def pair_data(
    q: int,
    r: int,
    delta: DeltaSequence,
    bits: int = DEFAULT_BITS,
    table: Optional[nt.PrimeTable] = None,
) -> PairData:
    """Exact |A_q* cap A_r*| with the disjointness threshold and bound term."""
    if q == r or q < 2 or r < 2:
        raise InvalidArgumentError("need distinct q, r >= 2")
    dq, dr = delta.get(q), delta.get(r)
    if dq > mpq(1, 2 * q) or dr > mpq(1, 2 * r):
        raise SaturationError("pair correlation requires unsaturated radii")
    ell = lcm(q, r)
    M = 2 * max(dq, dr) * ell
    exact = pair_intersection_measure(q, dq, r, dr)
    if M <= 1 and exact != 0:
        raise InternalInvariantError(
            f"threshold {M} <= 1 but measured intersection {exact} != 0"
        )
    if table is None:
        table = _table_for(max(q, r) ** 2)
    fq = nt.factor(q, table)
    fr = nt.factor(r, table)
    prime_sum = nt.correlation_prime_sum(fq, fr, M, variant="gcd")
    pv = (
        Enclosure.exact(_phi(q) * dq * _phi(r) * dr)
        * exp_enclosure(prime_sum, bits)
    )
    return PairData(q=q, r=r, exact_meas=exact, M=M, pv_term=pv)


def pair_intersection_measure(q: int, dq, r: int, dr) -> mpq:
    """measure(A_q*(dq) cap A_r*(dr)) exactly.

    Scales both families to a common integer denominator and integrates one
    against the cumulative width function of the other; falls back to the
    generic interval machinery when the common denominator would overflow
    the vectorized integer path.
    """
    dq, dr = mpq(dq), mpq(dr)
    if dq == 0 or dr == 0:
        return mpq(0)
    D = lcm(lcm(q, int(dq.denominator)), lcm(r, int(dr.denominator)))
    if D <= 1 << 60:
        return _pair_measure_scaled(q, dq, r, dr, D)
    a = build_Aq(q, dq, True)
    b = build_Aq(r, dr, True)
    return measure(intersect(a, b))


def _scaled_family(q: int, dq: mpq, D: int) -> tuple[np.ndarray, np.ndarray]:
    rho = int(dq * D)
    centers = nt.coprime_residues(q) * (D // q)
    lo = np.maximum(centers - rho, 0)
    hi = np.minimum(centers + rho, D)
    return lo, hi


def _pair_measure_scaled(q: int, dq: mpq, r: int, dr: mpq, D: int) -> mpq:
    lq, hq = _scaled_family(q, dq, D)
    lr, hr = _scaled_family(r, dr, D)
    # cumulative width of the r-family up to each interval start
    widths = hr - lr
    cum = np.concatenate(([0], np.cumsum(widths)))

    def cum_measure(x: np.ndarray) -> np.ndarray:
        # total r-family length inside [0, x]
        pos = np.searchsorted(lr, x, side="right") - 1
        base = cum[np.maximum(pos, 0)] * (pos >= 0)
        inside = np.clip(np.minimum(x, hr[np.maximum(pos, 0)]) - lr[np.maximum(pos, 0)], 0, None)
        return base + inside * (pos >= 0)

    overlap = int(np.sum(cum_measure(hq) - cum_measure(lq)))
    return mpq(overlap, D)


def cs_lower_bound(measures: Sequence, pair_measures: Sequence[Sequence]) -> mpq:
    """Second-moment lower bound (sum P(E_j))^2 / sum_{i,j} P(E_i cap E_j)."""
    measures = [mpq(m) for m in measures]
    k = len(measures)
    if any(len(row) != k for row in pair_measures):
        raise InvalidArgumentError("pair matrix must be k x k")
    total = mpq(0)
    for i in range(k):
        for j in range(k):
            entry = mpq(pair_measures[i][j])
            if entry < 0:
                raise InvalidArgumentError("pair measures must be non-negative")
            if i == j and entry != measures[i]:
                raise InvalidArgumentError("diagonal must equal the event measures")
            if mpq(pair_measures[i][j]) != mpq(pair_measures[j][i]):
                raise InvalidArgumentError("pair matrix must be symmetric")
            total += entry
    num = sum(measures, mpq(0)) ** 2
    if num == 0:
        return mpq(0)
    return num / total


def find_window(delta: DeltaSequence, Q: int) -> Optional[tuple[int, int]]:
    """Smallest R >= Q with sum of reduced measures over [Q, R] in [1, 2].

    Each term 2 phi(q) Delta_q is at most 1 for an unsaturated sequence, so
    the first crossing of 1 cannot overshoot 2.  Returns None when the mass
    up to qmax never reaches 1 (finite truncation, not an error).
    """
    delta.require_unsaturated()
    partial = mpq(0)
    for q in delta.support():
        if q < Q:
            continue
        partial += 2 * _phi(q) * delta.get(q)
        if partial >= 1:
            if partial > 2:
                raise InternalInvariantError("window overshot [1, 2]")
            return (Q, q)
    return None


@dataclass(frozen=True)
class WindowReport:
    """Mass, correlation, and union data for the events A_q*, q in [Q, R]."""

    Q: int
    R: int
    sum_meas: mpq
    pair_sum: mpq  # C = sum over q < r of intersection measures
    cs_bound: mpq
    union_meas: mpq

    def to_json(self) -> dict:
        def rat(x):
            return [str(x.numerator), str(x.denominator)]

        return {
            "schema": "window-report/v1",
            "Q": self.Q,
            "R": self.R,
            "sum_meas": rat(self.sum_meas),
            "pair_sum": rat(self.pair_sum),
            "cs_bound": rat(self.cs_bound),
            "union_meas": rat(self.union_meas),
        }


def window_report(
    delta: DeltaSequence, Q: int, R: int, bits: int = DEFAULT_BITS
) -> WindowReport:
    """Exact window statistics with the internal dominance checks."""
    delta.require_unsaturated()
    if not (1 <= Q <= R <= delta.qmax):
        raise InvalidArgumentError("window outside the supported range")
    qs = [q for q in delta.support() if Q <= q <= R]
    measures = [2 * _phi(q) * delta.get(q) for q in qs]
    k = len(qs)
    pair_sum = mpq(0)
    matrix = [[mpq(0)] * k for _ in range(k)]
    for i in range(k):
        matrix[i][i] = measures[i]
    for i in range(k):
        for j in range(i + 1, k):
            m = pair_intersection_measure(qs[i], delta.get(qs[i]), qs[j], delta.get(qs[j]))
            matrix[i][j] = matrix[j][i] = m
            pair_sum += m
    cs = cs_lower_bound(measures, matrix)
    union_meas = measure(union_all([build_Aq(q, delta.get(q), True) for q in qs]))
    if cs > union_meas:
        raise InternalInvariantError("second-moment bound exceeded the union measure")
    total = sum(measures, mpq(0))
    if 1 <= total <= 2 and union_meas < 1 / (2 + 2 * pair_sum):
        raise InternalInvariantError("union fell below the 1/(2+2C) guarantee")
    return WindowReport(
        Q=Q, R=R, sum_meas=total, pair_sum=pair_sum, cs_bound=cs, union_meas=union_meas
    )


def catlin_transform(delta: DeltaSequence) -> DeltaSequence:
    """Delta'_q = max over m >= 1 with qm <= qmax of Delta_{qm}.

    Truncation of the supremum at qmax; flagged in the label, no tail
    extrapolation.
    """
    out: dict[int, mpq] = {}
    for s in delta.support():
        v = delta.get(s)
        for d in _divisors(s):
            if v > out.get(d, mpq(-1)):
                out[d] = v
    return DeltaSequence(
        qmax=delta.qmax,
        values=out,
        label=f"catlin({delta.label})@{delta.qmax}",
    )


def _divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
        d += 1
    return small + large[::-1]


# ---------------------------------------------------------------------------
# Monte Carlo counting


@dataclass(frozen=True)
class MonteCarloResult:
    """Counting experiment: how many support q's solve |x - a/q| <= Delta_q."""

    samples: int
    seed: int
    reduced: bool
    mean: mpq
    expected: mpq
    variance: mpq  # sample variance of the per-x counts
    histogram: dict[int, int]

    @property
    def stddev(self) -> float:
        return float(self.variance) ** 0.5

    def within_3_sigma(self) -> bool:
        """Exact test |mean - expected| <= 3 * stddev(mean estimator)."""
        if self.variance == 0:
            return self.mean == self.expected
        return (self.mean - self.expected) ** 2 * self.samples <= 9 * self.variance

    def to_json(self) -> dict:
        def rat(x):
            return [str(x.numerator), str(x.denominator)]

        return {
            "schema": "montecarlo/v1",
            "samples": self.samples,
            "seed": self.seed,
            "reduced": self.reduced,
            "mean": rat(self.mean),
            "mean_float": float(self.mean),
            "expected": rat(self.expected),
            "expected_float": float(self.expected),
            "stddev": self.stddev,
            "within_3_sigma": self.within_3_sigma(),
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = x.copy()
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def sample_points(seed: int, start: int, count: int) -> np.ndarray:
    """Deterministic per-index uniform 64-bit samples: splitmix64 stream."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    state = np.uint64(seed & (_TWO64 - 1)) + idx * _SPLITMIX_GAMMA
    return _splitmix64(state)


def _membership_threshold(q: int, dq: mpq) -> int:
    # closed membership: scaled distance d qualifies iff d < floor(q*dq*2^64)+1
    x = dq * q * _TWO64
    return int(x.numerator // x.denominator) + 1


def monte_carlo_counts(
    delta: DeltaSequence,
    reduced: bool,
    samples: int,
    seed: int,
    threads: int = 1,
) -> MonteCarloResult:
    """Count, for uniform x = k/2^64, the support q's whose set contains x.

    Sampling is a per-index splitmix64 stream of ``seed``, so results are
    bit-identical for any thread count.  Membership is exact integer
    arithmetic: x is in A_q exactly when the scaled distance of k*q to the
    nearest multiple of 2^64 stays within q * Delta_q * 2^64, with endpoint
    ties resolved closed.
    """
    if samples < 1:
        raise InvalidArgumentError("need at least one sample")
    delta.require_unsaturated()
    support = delta.support()
    qs = np.array(support, dtype=np.uint64)
    if len(qs) and int(qs.max()) >= 1 << 31:
        raise InvalidArgumentError("support exceeds the 2^31 kernel bound")
    thresholds = np.array(
        [_membership_threshold(q, delta.get(q)) for q in support], dtype=np.uint64
    )
    # exact tie data: d == X possible only when X = q*dq*2^64 is an integer
    tie_exact = np.array(
        [
            int((delta.get(q) * q * _TWO64).denominator) == 1
            for q in support
        ],
        dtype=bool,
    )

    def run_chunk(start: int, count: int) -> np.ndarray:
        ks = sample_points(seed, start, count)
        counts = np.zeros(count, dtype=np.int64)
        if not len(qs):
            return counts
        block = max(1, (1 << 21) // len(qs))
        for b0 in range(0, count, block):
            kb = ks[b0 : b0 + block]
            counts[b0 : b0 + len(kb)] = _count_block(
                kb, qs, thresholds, tie_exact, reduced
            )
        return counts

    if threads <= 1:
        counts = run_chunk(0, samples)
    else:
        chunk = (samples + threads - 1) // threads
        jobs = [(s, min(chunk, samples - s)) for s in range(0, samples, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda sc: run_chunk(*sc), jobs))
        counts = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    expected = rational_sum(
        2 * (_phi(q) if reduced else q) * delta.get(q) for q in support
    )
    total = int(counts.sum())
    mean = mpq(total, samples)
    if samples > 1:
        sq = int(np.dot(counts, counts))
        variance = (mpq(sq) - mpq(total * total, samples)) / (samples - 1)
    else:
        variance = mpq(0)
    hist = np.bincount(counts) if len(counts) else np.zeros(1, dtype=np.int64)
    histogram = {int(i): int(v) for i, v in enumerate(hist) if v}
    return MonteCarloResult(
        samples=samples,
        seed=seed,
        reduced=reduced,
        mean=mean,
        expected=expected,
        variance=variance,
        histogram=histogram,
    )


def _count_block(
    ks: np.ndarray,
    qs: np.ndarray,
    thresholds: np.ndarray,
    tie_exact: np.ndarray,
    reduced: bool,
) -> np.ndarray:
    """Membership counts for a block of samples against the whole support.

    All arithmetic is uint64 with natural wrap-around; the high product half
    is assembled from 32-bit limbs, so q must stay below 2^31.
    """
    k = ks[:, None]
    qrow = qs[None, :]
    r = (k >> np.uint64(32)) * qrow  # high limb product, < 2^63
    r <<= np.uint64(32)
    r += (k & np.uint64(0xFFFFFFFF)) * qrow  # now k*q mod 2^64
    d = np.minimum(r, -r)
    member = d < thresholds[None, :]
    if not reduced:
        return member.sum(axis=1).astype(np.int64)
    rows, cols = np.nonzero(member)
    counts = np.zeros(len(ks), dtype=np.int64)
    if not len(rows):
        return counts
    # hits are sparse; rebuild the 128-bit product pieces just for them
    k_hit = ks[rows]
    q_hit = qs[cols]
    lo_hi = (k_hit >> np.uint64(32)) * q_hit
    lo_lo = (k_hit & np.uint64(0xFFFFFFFF)) * q_hit
    hi = (lo_hi + (lo_lo >> np.uint64(32))) >> np.uint64(32)
    carry = (r[rows, cols] >= np.uint64(_TWO63)).astype(np.uint64)
    a = hi + carry
    ok = np.gcd((a % q_hit).astype(np.int64), q_hit.astype(np.int64)) == 1
    # at an exact endpoint tie the other neighbour also attains the distance
    tie = tie_exact[cols] & (d[rows, cols] + np.uint64(1) == thresholds[cols])
    if np.any(tie & ~ok):
        other = np.where(carry.astype(bool), a - np.uint64(1), a + np.uint64(1))
        other_ok = np.gcd((other % q_hit).astype(np.int64), q_hit.astype(np.int64)) == 1
        ok |= tie & other_ok
    np.add.at(counts, rows, ok.astype(np.int64))
    return counts
