"""Pure numpy versions of the compiled kernels."""

from __future__ import annotations

import numpy as np

_CHUNK = 256


def char_accumulate(p0, p1, p2, x, y, start, stop):
    """Sum over samples ``start..stop`` of ``prod_i (p0 + p1 x_g + p2 y_g)``
    for every grid point ``g``; samples with a non-finite product are
    skipped and counted."""
    out = np.zeros(len(x), dtype=complex)
    rejected = 0
    for lo in range(start, stop, _CHUNK):
        hi = min(lo + _CHUNK, stop)
        terms = p0[lo:hi, :, None] + p1[lo:hi, :, None] * x + p2[lo:hi, :, None] * y
        with np.errstate(invalid="ignore", over="ignore"):
            prod = terms.prod(axis=1)
        ok = np.isfinite(prod).all(axis=1)
        rejected += int((~ok).sum())
        out += prod[ok].sum(axis=0)
    return out, rejected
