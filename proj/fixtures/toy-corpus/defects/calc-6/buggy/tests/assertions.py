def assert_equals(expected, actual):
    if expected != actual:
        raise AssertionError("expected:<%r> but was:<%r>" % (expected, actual))
