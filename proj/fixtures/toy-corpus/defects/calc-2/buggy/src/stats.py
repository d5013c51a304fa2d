def mean(xs):
    return sum(xs) // len(xs)


def median(xs):
    s = sorted(xs)
    mid = len(s) // 2
    if len(s) % 2:
        return s[mid]
    return (s[mid - 1] + s[mid]) / 2


def running_max(xs):
    out = []
    cur = None
    for v in xs:
        if cur is None or v > cur:
            cur = v
        out.append(cur)
    return out


def variance(xs):
    m = mean(xs)
    return sum((x - m) ** 2 for x in xs) / (len(xs) - 1)
