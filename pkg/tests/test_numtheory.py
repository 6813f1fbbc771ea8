import math

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from diophapprox import numtheory as nt
from diophapprox.errors import InvalidArgumentError, ResourceLimitError


def trial_division_primes(limit):
    out = []
    for n in range(2, limit + 1):
        if all(n % d for d in range(2, int(n**0.5) + 1)):
            out.append(n)
    return out


def brute_totient(n):
    return sum(1 for a in range(1, n + 1) if math.gcd(a, n) == 1)


@pytest.fixture(scope="module")
def table():
    return nt.sieve(10_000)


# -- sieve ---------------------------------------------------------------


def test_sieve_10():
    assert list(nt.sieve(10).primes) == [2, 3, 5, 7]


def test_sieve_smallest_case():
    assert list(nt.sieve(2).primes) == [2]


def test_sieve_30_and_spf():
    t = nt.sieve(30)
    assert list(t.primes) == trial_division_primes(30)
    assert int(t.spf[15]) == 3
    assert int(t.spf[29]) == 29
    assert int(t.spf[4]) == 2


def test_sieve_matches_trial_division_to_2000():
    t = nt.sieve(2000)
    assert list(t.primes) == trial_division_primes(2000)
    for n in range(2, 2001):
        p = int(t.spf[n])
        assert n % p == 0
        assert all(n % d for d in range(2, p))


def test_sieve_errors():
    with pytest.raises(InvalidArgumentError):
        nt.sieve(1)
    with pytest.raises(ResourceLimitError):
        nt.sieve(100, budget=50)


# -- factor ----------------------------------------------------------------


def test_factor_examples(table):
    assert nt.factor(12, table).factors == ((2, 2), (3, 1))
    assert nt.factor(1, table).factors == ()
    f30 = nt.factor(30, table)
    assert f30.factors == ((2, 1), (3, 1), (5, 1))
    assert f30.squarefree
    assert not nt.factor(12, table).squarefree


def test_factor_above_limit_uses_trial_division():
    t = nt.sieve(100)
    # 9409 = 97^2 is within limit^2
    assert nt.factor(9409, t).factors == ((97, 2),)
    big_prime = 9973
    assert nt.factor(big_prime, t).factors == ((big_prime, 1),)
    with pytest.raises(InvalidArgumentError):
        nt.factor(100**2 + 1, t)
    with pytest.raises(InvalidArgumentError):
        nt.factor(0, t)


@given(st.integers(min_value=1, max_value=10_000))
@settings(max_examples=200, deadline=None)
def test_factor_reconstructs(n):
    table = nt.sieve(200)
    f = nt.factor(n, table)
    prod = 1
    for p, e in f.factors:
        prod *= p**e
    assert prod == n
    f.check()


# -- totient / phi_ratio -----------------------------------------------------


def test_totient_examples(table):
    assert nt.totient(nt.factor(1, table)) == 1
    assert nt.totient(nt.factor(12, table)) == brute_totient(12) == 4
    assert nt.totient(nt.factor(7, table)) == brute_totient(7) == 6


def test_phi_ratio_examples(table):
    assert nt.phi_ratio(nt.factor(1, table)) == 1
    assert nt.phi_ratio(nt.factor(30, table)) == mpq(4, 15)
    assert nt.phi_ratio(nt.factor(8, table)) == mpq(1, 2)
    assert brute_totient(30) == 8 and mpq(8, 30) == mpq(4, 15)


def test_totient_multiplicative(table):
    pairs = [(3, 8), (5, 12), (7, 9), (11, 13), (25, 36), (49, 100), (101, 99)]
    for m, n in pairs:
        assert math.gcd(m, n) == 1
        tm = nt.totient(nt.factor(m, table))
        tn = nt.totient(nt.factor(n, table))
        assert nt.totient(nt.factor(m * n, table)) == tm * tn


def test_phi_ratio_vs_brute_force(table):
    for q in range(1, 2001):
        f = nt.factor(q, table)
        assert nt.phi_ratio(f) == mpq(brute_totient(q), q)
        assert nt.totient(f) == brute_totient(q)


# -- mertens / lambda / correlation -------------------------------------------


def test_mertens_examples(table):
    assert nt.mertens_sum(2, table) == mpq(1, 2)
    assert nt.mertens_sum(10, table) == mpq(1, 2) + mpq(1, 3) + mpq(1, 5) + mpq(1, 7)
    assert nt.mertens_sum(10, table) == mpq(247, 210)
    assert nt.mertens_sum(1, table) == 0
    with pytest.raises(InvalidArgumentError):
        nt.mertens_sum(table.limit + 1, table)


def test_lambda_t_examples(table):
    f30 = nt.factor(30, table)
    assert nt.lambda_t(f30, 2) == mpq(1, 3) + mpq(1, 5) == mpq(8, 15)
    assert nt.lambda_t(f30, 10) == 0
    assert nt.lambda_t(nt.factor(1, table), 1) == 0


def test_correlation_prime_sum_examples(table):
    f6, f10 = nt.factor(6, table), nt.factor(10, table)
    # qr/gcd^2 = 60/4 = 15 -> primes 3,5
    assert nt.correlation_prime_sum(f6, f10, 1, "gcd_squared") == mpq(8, 15)
    assert nt.correlation_prime_sum(f6, f6, 1, "gcd_squared") == 0
    # qr/gcd = 30 -> primes 2,3,5
    assert nt.correlation_prime_sum(f6, f10, 1, "gcd") == mpq(31, 30)
    with pytest.raises(InvalidArgumentError):
        nt.correlation_prime_sum(f6, f10, 1, "bogus")


# -- primorial ---------------------------------------------------------------


def test_primorial(table):
    assert nt.primorial(0, table) == 1
    assert nt.primorial(3, table) == 30
    assert nt.primorial(5, table) == 2310
    for j in range(8):
        assert nt.primorial(j + 1, table) == nt.primorial(j, table) * table.primes[j]
    with pytest.raises(InvalidArgumentError):
        nt.primorial(10**6, table)


# -- sieve_weight_sum ----------------------------------------------------------


def test_sieve_weight_sum_examples(table):
    assert nt.sieve_weight_sum(10, lambda p: 1, table) == 10
    assert nt.sieve_weight_sum(10, lambda p: 0, table) == 1
    assert nt.sieve_weight_sum(6, lambda p: 2 if p == 2 else 1, table) == 9


def test_sieve_weight_sum_brute(table):
    # brute-force oracle with a_p = 1/2
    def brute(x):
        total = mpq(1)
        for n in range(2, x + 1):
            term = mpq(1)
            m, d = n, 2
            while d * d <= m:
                if m % d == 0:
                    term *= mpq(1, 2)
                    while m % d == 0:
                        m //= d
                d += 1
            if m > 1:
                term *= mpq(1, 2)
            total += term
        return total

    assert nt.sieve_weight_sum(50, lambda p: mpq(1, 2), table) == brute(50)


# -- count_lambda_exceeders -----------------------------------------------------


def test_exceeders_threshold_one(table):
    rep = nt.count_lambda_exceeders(100, 10, 1, table)
    assert rep.count == 0


def test_exceeders_threshold_zero(table):
    rep = nt.count_lambda_exceeders(50, 1, 0, table)
    assert rep.count == 49  # every q >= 2 has a prime factor > 1


def test_exceeders_small_case(table):
    # q=3: lambda_2(3)=1/3 > 1/4; q=2: lambda_2(2)=0
    rep = nt.count_lambda_exceeders(30, 2, mpq(1, 4), table)
    exhaustive = sum(
        1 for q in range(1, 31) if nt.lambda_t(nt.factor(q, table), 2) > mpq(1, 4)
    )
    assert rep.count == exhaustive
    assert nt.lambda_t(nt.factor(3, table), 2) == mpq(1, 3)
    assert nt.lambda_t(nt.factor(2, table), 2) == 0


def test_exceeders_chernoff_dominates(table):
    for x, t, thr in [(100, 1, mpq(1, 2)), (500, 2, mpq(1, 4)), (1000, 3, 1)]:
        rep = nt.count_lambda_exceeders(x, t, thr, table)
        assert rep.count <= rep.chernoff_bound.hi


# -- prime_factor_band_counts ----------------------------------------------------


def test_band_counts_examples(table):
    f30 = nt.factor(30, table)
    # bands approximating (1, e], (e, e^2], (e^2, e^3]
    e_lo, e_hi = mpq(271, 100), mpq(272, 100)
    bands_lo = [(1, e_lo), (e_lo, e_lo**2), (e_lo**2, e_lo**3)]
    bands_hi = [(1, e_hi), (e_hi, e_hi**2), (e_hi**2, e_hi**3)]
    assert nt.prime_factor_band_counts(f30, bands_lo) == [1, 2, 0]
    assert nt.prime_factor_band_counts(f30, bands_hi) == [1, 2, 0]
    assert nt.prime_factor_band_counts(nt.factor(1, table), bands_lo) == [0, 0, 0]
    f210 = nt.factor(210, table)
    assert nt.prime_factor_band_counts(f210, [(1, 10), (10, 100)]) == [4, 0]


def test_band_counts_rejects_overlap(table):
    with pytest.raises(InvalidArgumentError):
        nt.prime_factor_band_counts(nt.factor(6, table), [(1, 5), (4, 9)])


# -- helpers -------------------------------------------------------------------


def test_coprime_residues():
    assert list(nt.coprime_residues(1)) == [0, 1]
    assert list(nt.coprime_residues(4)) == [1, 3]
    assert list(nt.coprime_residues(12)) == [1, 5, 7, 11]


def test_squarefree_in(table):
    sf = nt.squarefree_in(1, 20, table)
    assert [f.value for f in sf] == [1, 2, 3, 5, 6, 7, 10, 11, 13, 14, 15, 17, 19]


def test_factored_int_json(table):
    f = nt.factor(360, table)
    doc = f.to_json()
    assert doc == {"value": "360", "factors": [[2, 3], [3, 2], [5, 1]]}
    assert nt.FactoredInt.from_json(doc) == f
