"""Pick the stepping kernel once at import.

The compiled kernel is used when it was built; ``AMT_LAB_PURE_PYTHON=1``
forces the fallback (used by the benchmark and the parity tests).
"""
import os

from . import _pykernel

python_integrate = _pykernel.integrate

try:
    from ._ckernel import integrate as compiled_integrate
except ImportError:  # extension not built
    compiled_integrate = None

if compiled_integrate is not None and not os.environ.get("AMT_LAB_PURE_PYTHON"):
    integrate = compiled_integrate
    BACKEND = "cython"
else:
    integrate = python_integrate
    BACKEND = "python"

NCOL = _pykernel.NCOL
