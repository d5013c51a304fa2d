from assertions import assert_equals
from case import is_palindrome, title_case


def test_title_case():
    assert_equals("Hello World", title_case("hello world"))


def test_is_palindrome():
    assert_equals(True, is_palindrome("Racecar"))
    assert_equals(True, is_palindrome("A man, a plan, a canal: Panama"))
