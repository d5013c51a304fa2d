"""Runs every test_* function in tests/test_*.py and reports failures."""
import importlib
import os
import sys
import traceback

sys.dont_write_bytecode = True
ROOT = os.path.dirname(os.path.abspath(__file__))
sys.path[:0] = [os.path.join(ROOT, "src"), os.path.join(ROOT, "tests")]


def main():
    names = sorted(f[:-3] for f in os.listdir(os.path.join(ROOT, "tests"))
                   if f.startswith("test_") and f.endswith(".py"))
    ran = 0
    failing = []
    for name in names:
        module = importlib.import_module(name)
        for attr in sorted(vars(module)):
            fn = getattr(module, attr)
            if not attr.startswith("test_") or not callable(fn):
                continue
            ran += 1
            test_id = name + "::" + attr
            try:
                fn()
            except Exception:
                failing.append(test_id)
                print("--- " + test_id)
                print(traceback.format_exc().replace(ROOT + os.sep, "").rstrip())
    print("Ran %d tests" % ran)
    if failing:
        print("Failing tests: %d" % len(failing))
        for test_id in failing:
            print("  - " + test_id)
        return 1
    print("OK")
    return 0


if __name__ == "__main__":
    sys.exit(main())
