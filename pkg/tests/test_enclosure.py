import gmpy2
import pytest
from gmpy2 import mpq

from diophapprox.enclosure import (
    Enclosure,
    exp_enclosure,
    log_enclosure,
    pow_rat_enclosure,
    rootn_enclosure,
    separate,
    sqrt_enclosure,
)
from diophapprox.errors import InvalidArgumentError, PrecisionError


def test_exact_and_arithmetic():
    a = Enclosure.exact(mpq(1, 3))
    b = Enclosure(mpq(1, 4), mpq(1, 2))
    s = a + b
    assert s.lo == mpq(7, 12) and s.hi == mpq(5, 6)
    p = a * b
    assert p.lo == mpq(1, 12) and p.hi == mpq(1, 6)
    d = a - b
    assert d.lo == mpq(-1, 6) and d.hi == mpq(1, 12)
    assert (b.reciprocal()).lo == 2 and (b.reciprocal()).hi == 4


def test_integer_powers_sign_cases():
    pos = Enclosure(mpq(1, 2), mpq(2))
    assert (pos**2).lo == mpq(1, 4) and (pos**2).hi == 4
    neg = Enclosure(mpq(-2), mpq(-1))
    assert (neg**2).lo == 1 and (neg**2).hi == 4
    assert (neg**3).lo == -8 and (neg**3).hi == -1
    straddle = Enclosure(mpq(-1), mpq(2))
    assert (straddle**2).lo == 0 and (straddle**2).hi == 4
    assert (pos**-1).lo == mpq(1, 2) and (pos**-1).hi == 2
    with pytest.raises(InvalidArgumentError):
        Enclosure(mpq(-1), mpq(1)).reciprocal()


def test_exp_log_bracket_truth():
    # e = 2.718281828459045235360287...
    e = exp_enclosure(1, bits=128)
    assert e.lo < e.hi
    assert mpq("2.718281828459045235360287") < e.lo < e.hi < mpq(
        "2.718281828459045235360288"
    )
    assert e.width() < mpq(1, 2**100)
    ln2 = log_enclosure(2, bits=128)
    assert mpq("0.693147180559945309417232") < ln2.lo < ln2.hi < mpq(
        "0.693147180559945309417233"
    )
    # exp(log(x)) brackets x
    x = mpq(7, 3)
    roundtrip = exp_enclosure(log_enclosure(x, 160), 160)
    assert roundtrip.contains(x)


def test_rootn_sqrt_exactness():
    r = sqrt_enclosure(2, bits=128)
    assert r.lo**2 <= 2 <= r.hi**2
    assert r.width() <= mpq(1, 2**128)
    exact = sqrt_enclosure(mpq(9, 4), bits=64)
    assert exact.lo == exact.hi == mpq(3, 2)
    cube = rootn_enclosure(mpq(27, 8), 3, bits=64)
    assert cube.lo == cube.hi == mpq(3, 2)
    r10 = rootn_enclosure(1000, 10, bits=96)
    assert r10.lo**10 <= 1000 <= r10.hi**10


def test_pow_rat_enclosure():
    # x^{9/10} on [0,1]; oracle: (x^{9/10})^10 = x^9
    x = mpq(1, 2)
    e = pow_rat_enclosure(x, mpq(9, 10), bits=128)
    assert e.lo**10 <= x**9 <= e.hi**10
    # negative exponent: (1/2)^{-3/2} = sqrt(8)
    inv = pow_rat_enclosure(x, mpq(-3, 2), bits=128)
    assert inv.lo**2 <= 8 <= inv.hi**2
    assert pow_rat_enclosure(0, mpq(1, 2)).lo == 0
    with pytest.raises(InvalidArgumentError):
        pow_rat_enclosure(0, mpq(-1, 2))


def test_separate_escalates():
    # sqrt(2) vs 1.41421356 (rational below sqrt 2)
    target = mpq(141421356, 10**8)
    assert separate(
        lambda b: sqrt_enclosure(2, b), lambda b: Enclosure.exact(target), bits=8
    ) == 1
    with pytest.raises(PrecisionError):
        separate(
            lambda b: Enclosure.exact(1),
            lambda b: Enclosure.exact(1),
            bits=8,
            max_bits=64,
        )


def test_width_reporting():
    e = exp_enclosure(mpq(1, 7), bits=64)
    w = e.width()
    assert w > 0
    finer = exp_enclosure(mpq(1, 7), bits=256)
    assert finer.width() < w


def test_json_roundtrip_fields():
    e = sqrt_enclosure(5, bits=64)
    doc = e.to_json()
    assert mpq(int(doc["lo"][0]), int(doc["lo"][1])) == e.lo
    assert mpq(int(doc["hi"][0]), int(doc["hi"][1])) == e.hi
