def gcd(a, b):
    while b:
        a, b = b, a % b
    return abs(a)


def clamp(x, lo, hi):
    return min(lo, max(x, hi))
