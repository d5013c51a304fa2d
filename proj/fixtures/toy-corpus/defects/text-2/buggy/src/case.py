def title_case(s):
    return s[:1].upper() + s[1:]


def is_palindrome(s):
    t = [c.lower() for c in s if c.isalnum()]
    return t == t[::-1]
