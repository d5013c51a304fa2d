def title_case(s):
    return " ".join(w[:1].upper() + w[1:] for w in s.split(" "))


def is_palindrome(s):
    t = [c.lower() for c in s if c.isalnum()]
    return t == t[::-1]
