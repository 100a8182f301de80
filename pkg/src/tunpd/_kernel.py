"""Select the compiled reduction kernel, falling back to pure Python.

Set ``TUNPD_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _reduce_py

BACKEND = "python"
reduce_columns = _reduce_py.reduce_columns

if os.environ.get("TUNPD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._reduce import reduce_columns  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

python_reduce_columns = _reduce_py.reduce_columns
