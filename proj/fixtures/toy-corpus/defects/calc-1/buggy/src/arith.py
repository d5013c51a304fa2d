def gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def clamp(x, lo, hi):
    return max(lo, min(x, hi))
