from arith import clamp, gcd
from assertions import assert_equals


def test_gcd():
    assert_equals(6, gcd(12, 18))
    assert_equals(2, gcd(4, -6))


def test_clamp():
    assert_equals(5, clamp(5, 0, 10))
    assert_equals(10, clamp(15, 0, 10))
