"""Prints repr(eval(expr)) for a "module.call(...)" expression, or the
name of the exception it raises. Run from a workspace root."""
import importlib
import os
import sys

sys.dont_write_bytecode = True
sys.path.insert(0, os.path.join(os.getcwd(), "src"))

expr = sys.argv[1]
name = expr.split(".", 1)[0]
try:
    print(repr(eval(expr, {name: importlib.import_module(name)})))
except Exception as e:
    print(type(e).__name__)
