from assertions import assert_equals
from stats import mean, median, running_max, variance


def test_mean():
    assert_equals(2.0, mean([1, 2, 3]))
    assert_equals(1.5, mean([1, 2]))


def test_median():
    assert_equals(2, median([3, 1, 2]))
    assert_equals(2.5, median([4, 1, 3, 2]))


def test_running_max():
    assert_equals([1, 3], running_max([1, 3]))


def test_variance():
    assert_equals(4.0, variance([2, 4, 6]))
