"""Kernel selection: the compiled extension when it was built, numpy otherwise.

Set ``CLICKGBS_PURE_PYTHON=1`` to force the numpy path.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
char_accumulate = _kernels_py.char_accumulate

if not os.environ.get("CLICKGBS_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        char_accumulate = _ckernels.char_accumulate

__all__ = ["BACKEND", "char_accumulate"]
