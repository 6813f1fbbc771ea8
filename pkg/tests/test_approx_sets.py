import math

import pytest
from gmpy2 import mpq

from diophapprox import approx_sets as ap
from diophapprox import numtheory as nt
from diophapprox.enclosure import Enclosure, log_enclosure
from diophapprox.errors import (
    InvalidArgumentError,
    SaturationError,
)
from diophapprox.intervals import intersect, measure, normalize, union_all


@pytest.fixture(scope="module")
def table():
    return nt.sieve(10_000)


def phi(q):
    return sum(1 for a in range(1, q + 1) if math.gcd(a, q) == 1)


# -- delta constructors --------------------------------------------------------


def test_khinchin_clipping_and_monotonicity():
    d = ap.delta_khinchin(1, 50)
    # q=2: 1/(4 ln 2) ~ 0.3607 > 1/4 -> clipped
    assert d.get(2) == mpq(1, 4)
    assert 2 in d.clipped
    # strictly decreasing for q >= 2
    sup = d.support()
    vals = [d.get(q) for q in sup]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    # certified lower enclosure: value below true 1/(q^2 ln q)
    for q in (3, 10, 50):
        ln = log_enclosure(q, 128)
        assert d.get(q) * q * q * ln.hi <= 1
        # relative width of the stored enclosure is tiny: lower bound close to truth
        assert d.get(q) * q * q * ln.lo >= 1 - mpq(1, 2**60)


def test_khinchin_c2_below_c1():
    d1 = ap.delta_khinchin(1, 120)
    d2 = ap.delta_khinchin(2, 120)
    assert d2.get(100) < d1.get(100)
    with pytest.raises(InvalidArgumentError):
        ap.delta_khinchin(0, 100)
    with pytest.raises(InvalidArgumentError):
        ap.delta_khinchin(-1, 100)


def test_counterexample_levels(table):
    res = ap.delta_counterexample(2, table)
    (level,) = res.levels
    assert level.members == (3, 6)
    assert res.delta.get(3) == res.delta.get(6) == level.delta_lo
    # delta is an enclosure of 1/(6 * 2 * ln^2 2)
    ln2 = log_enclosure(2, 128)
    truth_hi = 1 / (12 * ln2.lo * ln2.lo)
    truth_lo = 1 / (12 * ln2.hi * ln2.hi)
    assert level.delta.lo <= truth_lo <= truth_hi <= level.delta.hi
    # per-level identity, rational part: sum q / primorial = prod (1 + 1/p_i)
    assert level.identity_lhs == mpq(9, 6) == level.identity_rhs == mpq(3, 2)


def test_counterexample_disjoint_levels(table):
    res = ap.delta_counterexample(6, table)
    seen = set()
    for level in res.levels:
        overlap = seen & set(level.members)
        assert not overlap
        seen |= set(level.members)
        assert level.identity_lhs == level.identity_rhs


def test_counterexample_errors(table):
    with pytest.raises(InvalidArgumentError):
        ap.delta_counterexample(1, table)


def test_uniform_support():
    d = ap.delta_uniform_support(range(10, 21), 10)
    assert d.get(10) == mpq(1, 100)
    assert d.get(9) == 0
    empty = ap.delta_uniform_support([], 5)
    assert empty.support() == ()
    boundary = ap.delta_uniform_support([7], 2)
    assert boundary.get(7) == mpq(1, 14)
    assert not boundary.is_saturated(7)
    with pytest.raises(SaturationError):
        ap.delta_uniform_support([3], mpq(3, 2))


# -- build_Aq -------------------------------------------------------------------


def test_build_aq_example_q4():
    u = ap.build_Aq(4, mpq(1, 8), reduced=True)
    assert [(p.lo, p.hi) for p in u.parts] == [
        (mpq(1, 8), mpq(3, 8)),
        (mpq(5, 8), mpq(7, 8)),
    ]
    assert measure(u) == mpq(1, 2) == 2 * phi(4) * mpq(1, 8)


def test_build_aq_q1_clipped():
    u = ap.build_Aq(1, mpq(1, 8), reduced=True)
    assert [(p.lo, p.hi) for p in u.parts] == [
        (mpq(0), mpq(1, 8)),
        (mpq(7, 8), mpq(1)),
    ]
    assert measure(u) == mpq(1, 4)


def test_build_aq_zero_radius():
    assert ap.build_Aq(2, 0, reduced=True).is_empty()


def test_build_aq_saturation_error():
    with pytest.raises(SaturationError):
        ap.build_Aq(3, mpq(1, 5), reduced=True)


def test_measure_identities_sample():
    for q in [1, 2, 3, 6, 12, 30, 97, 128]:
        dq = mpq(1, 4 * q)
        assert measure(ap.build_Aq(q, dq, True)) == 2 * phi(q) * dq
        assert measure(ap.build_Aq(q, dq, False)) == 2 * q * dq


def test_nesting_of_multiples():
    # equal radii at 3 and 15: every interval of A_3 sits inside A_15
    dq = mpq(1, 40)
    a3 = ap.build_Aq(3, dq, False)
    a15 = ap.build_Aq(15, dq, False)
    for part in a3.parts:
        assert part.lo in a15 and part.hi in a15
    assert intersect(a3, a15) == a3


# -- pair_data --------------------------------------------------------------------


def test_pair_disjoint_below_threshold():
    d = ap.DeltaSequence(qmax=10, values={2: mpq(1, 100), 3: mpq(1, 100)}, label="t")
    pd = ap.pair_data(2, 3, d)
    assert pd.M == mpq(3, 25)
    assert pd.exact_meas == 0


def test_pair_q2_r4():
    d = ap.DeltaSequence(qmax=10, values={2: mpq(1, 16), 4: mpq(1, 16)}, label="t")
    pd = ap.pair_data(2, 4, d)
    assert pd.M == mpq(1, 2)
    assert pd.exact_meas == 0
    # verified by exact interval intersection
    direct = measure(
        intersect(ap.build_Aq(2, mpq(1, 16), True), ap.build_Aq(4, mpq(1, 16), True))
    )
    assert direct == 0


def test_pair_overlapping_case():
    # radius 1/11 keeps both sets unsaturated while M = 30/11 > 1
    d = ap.DeltaSequence(qmax=10, values={3: mpq(1, 11), 5: mpq(1, 11)}, label="t")
    pd = ap.pair_data(3, 5, d)
    assert pd.M == mpq(30, 11)
    direct = measure(
        intersect(ap.build_Aq(3, mpq(1, 11), True), ap.build_Aq(5, mpq(1, 11), True))
    )
    assert pd.exact_meas == direct > 0
    # bound term dominates reasonably: ratio below the regression scale
    assert pd.exact_meas <= pd.pv_term.hi * 50


def test_pair_fast_path_matches_interval_oracle():
    # cross-check the scaled integer kernel against the generic machinery
    d = ap.delta_uniform_support(range(2, 40), 7)
    for q, r in [(2, 3), (4, 6), (6, 15), (10, 35), (12, 18), (7, 11), (24, 36)]:
        pd = ap.pair_data(q, r, d)
        direct = measure(
            intersect(ap.build_Aq(q, d.get(q), True), ap.build_Aq(r, d.get(r), True))
        )
        assert pd.exact_meas == direct


def test_pair_data_errors():
    d = ap.DeltaSequence(qmax=10, values={2: mpq(1, 2), 3: mpq(1, 100)}, label="t")
    with pytest.raises(SaturationError):
        ap.pair_data(2, 3, d)
    with pytest.raises(InvalidArgumentError):
        ap.pair_data(3, 3, ap.delta_uniform_support([3], 4))


# -- cs_lower_bound -----------------------------------------------------------------


def test_cs_single_event():
    assert ap.cs_lower_bound([mpq(3, 10)], [[mpq(3, 10)]]) == mpq(3, 10)


def test_cs_two_disjoint():
    m = [mpq(3, 10), mpq(3, 10)]
    mat = [[mpq(3, 10), mpq(0)], [mpq(0), mpq(3, 10)]]
    assert ap.cs_lower_bound(m, mat) == mpq(3, 5)


def test_cs_two_identical():
    m = [mpq(3, 10), mpq(3, 10)]
    mat = [[mpq(3, 10), mpq(3, 10)], [mpq(3, 10), mpq(3, 10)]]
    assert ap.cs_lower_bound(m, mat) == mpq(3, 10)


def test_cs_all_zero():
    assert ap.cs_lower_bound([mpq(0)], [[mpq(0)]]) == 0


def test_cs_validation():
    with pytest.raises(InvalidArgumentError):
        ap.cs_lower_bound([mpq(1, 2)], [[mpq(1, 3)]])


# -- find_window / window_report -----------------------------------------------------


def test_find_window_half_over_q():
    vals = {q: mpq(1, 2 * q) for q in range(1, 50)}
    d = ap.DeltaSequence(qmax=49, values=vals, label="t")
    assert ap.find_window(d, 2) == (2, 3)
    # phi(2)/2 + 2 phi(3)/6 = 1/2 + 2/3 = 7/6 in [1, 2]


def test_find_window_zero_sequence():
    d = ap.DeltaSequence(qmax=10, values={}, label="z")
    assert ap.find_window(d, 1) is None


def test_find_window_sparse():
    d = ap.DeltaSequence(
        qmax=10,
        values={2: mpq(1, 4), 5: mpq(1, 10)},
        label="t",
    )
    # measures: 1/2 at q=2, 2*4/10 = 4/5 at q=5; sum 13/10
    assert ap.find_window(d, 2) == (2, 5)


def test_window_report_small():
    vals = {q: mpq(1, 2 * q) for q in range(1, 10)}
    d = ap.DeltaSequence(qmax=9, values=vals, label="t")
    rep = ap.window_report(d, 2, 3)
    assert rep.sum_meas == mpq(7, 6)
    assert rep.cs_bound <= rep.union_meas <= rep.sum_meas
    # postcondition of the proposition: union >= 1/(2+2C)
    assert rep.union_meas >= 1 / (2 + 2 * rep.pair_sum)


def test_window_report_single_event():
    d = ap.DeltaSequence(qmax=10, values={5: mpq(1, 20)}, label="t")
    rep = ap.window_report(d, 5, 5)
    assert rep.union_meas == rep.sum_meas == rep.cs_bound == mpq(2 * 4, 20)
    assert rep.pair_sum == 0


def test_window_report_disjoint_family():
    d = ap.DeltaSequence(
        qmax=20, values={2: mpq(1, 1000), 3: mpq(1, 1000)}, label="t"
    )
    rep = ap.window_report(d, 2, 3)
    assert rep.pair_sum == 0
    assert rep.cs_bound == rep.sum_meas == rep.union_meas


# -- catlin ---------------------------------------------------------------------------


def test_catlin_decreasing_fixed_point():
    vals = {q: mpq(1, q * q) for q in range(1, 60)}
    d = ap.DeltaSequence(qmax=59, values=vals, label="t")
    t = ap.catlin_transform(d)
    for q in range(1, 60):
        assert t.get(q) == d.get(q)


def test_catlin_even_support():
    vals = {q: mpq(1, q * q) for q in range(2, 50, 2)}
    d = ap.DeltaSequence(qmax=49, values=vals, label="t")
    t = ap.catlin_transform(d)
    assert t.get(3) == mpq(1, 36)  # best multiple of 3 is 6
    assert t.get(1) == mpq(1, 4)
    assert t.get(2) == mpq(1, 4)


def test_catlin_zero():
    d = ap.DeltaSequence(qmax=10, values={}, label="z")
    assert ap.catlin_transform(d).support() == ()


def test_catlin_membership_equivalence():
    # truncated two-sided inclusion between the plain union and the
    # transformed reduced union, checked on a grid of sample points
    vals = {q: mpq(1, q * q + 7) for q in range(2, 40)}
    d = ap.DeltaSequence(qmax=39, values=vals, label="t")
    t = ap.catlin_transform(d)
    plain = union_all([ap.build_Aq(q, d.get(q), False) for q in d.support()])
    reduced = union_all([ap.build_Aq(q, t.get(q), True) for q in t.support()])
    for k in range(0, 1000):
        x = mpq(k, 999)
        assert (x in plain) == (x in reduced)


# -- monte carlo -----------------------------------------------------------------------


def test_monte_carlo_single_event():
    d = ap.DeltaSequence(qmax=5, values={2: mpq(1, 4)}, label="t")
    res = ap.monte_carlo_counts(d, reduced=True, samples=4000, seed=11)
    assert res.expected == mpq(1, 2)
    assert res.within_3_sigma()
    assert set(res.histogram) <= {0, 1}


def test_monte_carlo_zero_sequence():
    d = ap.DeltaSequence(qmax=5, values={}, label="z")
    res = ap.monte_carlo_counts(d, reduced=True, samples=100, seed=3)
    assert res.mean == 0 and res.expected == 0
    assert res.histogram == {0: 100}


def test_monte_carlo_exact_membership_against_intervals():
    d = ap.DeltaSequence(
        qmax=12,
        values={2: mpq(1, 5), 3: mpq(1, 7), 8: mpq(1, 33), 12: mpq(1, 30)},
        label="t",
    )
    for reduced in (True, False):
        sets = {
            q: ap.build_Aq(q, d.get(q), reduced) for q in d.support()
        }
        ks = ap.sample_points(5, 0, 300)
        import numpy as np

        qs = np.array(d.support(), dtype=np.uint64)
        thr = np.array(
            [ap._membership_threshold(q, d.get(q)) for q in d.support()],
            dtype=np.uint64,
        )
        tie = np.array(
            [(d.get(q) * q * (1 << 64)).denominator == 1 for q in d.support()],
            dtype=bool,
        )
        kernel_counts = ap._count_block(ks, qs, thr, tie, reduced)
        for k, kernel in zip(ks, kernel_counts):
            x = mpq(int(k), 1 << 64)
            direct = sum(1 for q in d.support() if x in sets[q])
            assert kernel == direct


def test_monte_carlo_threads_bit_identical():
    d = ap.delta_uniform_support(range(2, 200), 9)
    a = ap.monte_carlo_counts(d, True, 500, seed=7, threads=1)
    b = ap.monte_carlo_counts(d, True, 500, seed=7, threads=4)
    assert a.mean == b.mean and a.histogram == b.histogram


def test_monte_carlo_mean_converges():
    d = ap.delta_uniform_support(range(2, 100), 4)
    res = ap.monte_carlo_counts(d, True, 20000, seed=42)
    assert res.within_3_sigma()


# -- serialization -----------------------------------------------------------------------


def test_delta_json_roundtrip():
    d = ap.delta_khinchin(1, 30)
    doc = d.to_json()
    back = ap.DeltaSequence.from_json(doc)
    assert back.values == d.values
    assert back.qmax == d.qmax
    assert back.clipped == d.clipped


def test_csv_rows_measures():
    d = ap.delta_uniform_support([4, 9], 4)
    rows = list(d.csv_rows(reduced=True))
    assert rows[0][0] == 4 and rows[0][2] == 2 * 2 * mpq(1, 16)
    assert rows[1][0] == 9 and rows[1][2] == 2 * 6 * mpq(1, 36)
