"""Kernel backend selection: compiled extension with a pure-numpy fallback.

The compiled ``trishare._core`` module fuses the replicated-product cross
terms; the numpy fallback computes the same values with three passes. Both
are exact ring arithmetic (wrapping uint64), so selection never changes
results. Set ``TRISHARE_BACKEND=numpy`` or ``=compiled`` to force one;
``benchmarks/bench_backends.py`` compares their throughput.
"""

from __future__ import annotations

import os

import numpy as np


def _np_rep_mul(x_lo, x_hi, y_lo, y_hi):
    return x_lo * y_lo + x_hi * y_lo + x_lo * y_hi


def _np_rep_square(x_lo, x_hi):
    return x_lo * x_lo + np.uint64(2) * x_lo * x_hi


def _np_rep_matmul(x_lo, x_hi, y_lo, y_hi):
    return x_lo @ y_lo + x_hi @ y_lo + x_lo @ y_hi


_forced = os.environ.get("TRISHARE_BACKEND", "").lower()

_core = None
if _forced != "numpy":
    try:
        from trishare import _core  # type: ignore
    except ImportError:
        _core = None
        if _forced == "compiled":
            raise

if _core is not None:
    BACKEND = "compiled"
    rep_mul = _core.rep_mul
    rep_square = _core.rep_square
    rep_matmul = _core.rep_matmul
else:
    BACKEND = "numpy"
    rep_mul = _np_rep_mul
    rep_square = _np_rep_square
    rep_matmul = _np_rep_matmul

# The fallback implementations stay importable for equivalence tests and
# benchmarks regardless of which backend was selected.
numpy_impl = {"rep_mul": _np_rep_mul, "rep_square": _np_rep_square, "rep_matmul": _np_rep_matmul}
