"""Exact arithmetic on finite unions of rational subintervals of [0, 1].

Endpoints are exact rationals throughout; there is no floating point in this
module.  Intervals are treated as closed for membership and merging, and
touching intervals are merged, so the normal form is canonical: structural
equality of two unions is set equality.  Closed-vs-open makes no difference
to any measure identity since endpoints have measure zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from gmpy2 import mpq

from .errors import InvalidArgumentError

ZERO = mpq(0)
ONE = mpq(1)


@dataclass(frozen=True)
class RatInterval:
    """Closed rational interval [lo, hi] inside [0, 1]."""

    lo: mpq
    hi: mpq

    def __post_init__(self):
        object.__setattr__(self, "lo", mpq(self.lo))
        object.__setattr__(self, "hi", mpq(self.hi))
        if not (ZERO <= self.lo <= self.hi <= ONE):
            raise InvalidArgumentError(
                f"interval [{self.lo}, {self.hi}] violates 0 <= lo <= hi <= 1"
            )

    def width(self) -> mpq:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        x = mpq(x)
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted union of pairwise disjoint closed intervals with strict gaps."""

    parts: tuple[RatInterval, ...]

    def measure(self) -> mpq:
        total = mpq(0)
        for iv in self.parts:
            total += iv.hi - iv.lo
        return total

    def __contains__(self, x) -> bool:
        x = mpq(x)
        lo, hi = 0, len(self.parts) - 1
        while lo <= hi:
            mid = (lo + hi) // 2
            iv = self.parts[mid]
            if x < iv.lo:
                hi = mid - 1
            elif x > iv.hi:
                lo = mid + 1
            else:
                return True
        return False

    def is_empty(self) -> bool:
        return not self.parts

    def to_json(self) -> dict:
        return {
            "parts": [
                [
                    str(iv.lo.numerator),
                    str(iv.lo.denominator),
                    str(iv.hi.numerator),
                    str(iv.hi.denominator),
                ]
                for iv in self.parts
            ]
        }

    @classmethod
    def from_json(cls, doc: dict) -> "IntervalUnion":
        raw = [
            (mpq(int(ln), int(ld)), mpq(int(hn), int(hd)))
            for ln, ld, hn, hd in doc["parts"]
        ]
        return normalize(raw)


EMPTY = IntervalUnion(parts=())


def _interval_unchecked(lo: mpq, hi: mpq) -> RatInterval:
    # internal fast path for callers that guarantee 0 <= lo <= hi <= 1
    iv = object.__new__(RatInterval)
    object.__setattr__(iv, "lo", lo)
    object.__setattr__(iv, "hi", hi)
    return iv


def union_unchecked(pairs: Iterable[tuple[mpq, mpq]]) -> IntervalUnion:
    """Wrap pre-sorted, pairwise-disjoint, in-range pairs without re-checking.

    Callers must guarantee the IntervalUnion invariants; build_Aq uses this
    when strict radii make disjointness provable.
    """
    return IntervalUnion(parts=tuple(_interval_unchecked(lo, hi) for lo, hi in pairs))


def normalize(raw: Iterable) -> IntervalUnion:
    """Clip raw (lo, hi) pairs to [0, 1], sort, and merge touching intervals.

    Inputs may be RatInterval or plain rational pairs; pairs may extend
    outside [0, 1] and are clipped.  The measure of the set union is
    preserved exactly.
    """
    cleaned: list[tuple[mpq, mpq]] = []
    for item in raw:
        if isinstance(item, RatInterval):
            lo, hi = item.lo, item.hi
        else:
            lo, hi = mpq(item[0]), mpq(item[1])
        if lo > hi:
            raise InvalidArgumentError(f"interval has lo {lo} > hi {hi}")
        lo = max(lo, ZERO)
        hi = min(hi, ONE)
        if lo > hi:  # entirely outside [0, 1]
            continue
        cleaned.append((lo, hi))
    cleaned.sort()
    merged: list[tuple[mpq, mpq]] = []
    for lo, hi in cleaned:
        if merged and lo <= merged[-1][1]:
            if hi > merged[-1][1]:
                merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return IntervalUnion(parts=tuple(RatInterval(lo, hi) for lo, hi in merged))


def measure(u: IntervalUnion) -> mpq:
    return u.measure()


def intersect(u: IntervalUnion, v: IntervalUnion) -> IntervalUnion:
    """Exact set intersection by a two-pointer sweep over sorted parts."""
    out: list[RatInterval] = []
    i = j = 0
    up, vp = u.parts, v.parts
    while i < len(up) and j < len(vp):
        a, b = up[i], vp[j]
        lo = max(a.lo, b.lo)
        hi = min(a.hi, b.hi)
        if lo <= hi:
            out.append(RatInterval(lo, hi))
        if a.hi < b.hi:
            i += 1
        else:
            j += 1
    # adjacent outputs can touch at a point when parts of u and v interleave
    return normalize(out)


def union(u: IntervalUnion, v: IntervalUnion) -> IntervalUnion:
    return normalize(list(u.parts) + list(v.parts))


def union_all(unions: Sequence[IntervalUnion]) -> IntervalUnion:
    parts: list[RatInterval] = []
    for u in unions:
        parts.extend(u.parts)
    return normalize(parts)
