"""Hafnians of complex symmetric matrices.

Two independent routes are provided: an explicit sum over perfect matchings
(the oracle, and the fast path for tiny matrices) and the power-trace
inclusion-exclusion formula, which costs ``O(n^3 2^n)`` for a ``2n x 2n``
matrix.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

__all__ = [
    "MAX_HAFNIAN_PAIRS",
    "hafnian",
    "hafnian_batch",
    "hafnian_matchings",
    "hafnian_power_trace",
    "perfect_matchings",
]

MAX_HAFNIAN_PAIRS = 16
# up to this many pairs the vectorised matching sum beats the power-trace route
_MATCHING_PATH_PAIRS = 4


def _check(B: np.ndarray) -> int:
    if B.shape[-1] != B.shape[-2]:
        raise ValueError("hafnian needs square matrices")
    dim = B.shape[-1]
    if dim % 2:
        raise ValueError(f"hafnian of odd dimension {dim} is undefined")
    n = dim // 2
    if n > MAX_HAFNIAN_PAIRS:
        raise ValueError(
            f"hafnian with {n} pairs exceeds the supported limit of {MAX_HAFNIAN_PAIRS}"
        )
    return n


def hafnian_matchings(B) -> complex:
    """Sum over all perfect matchings of ``range(2n)``. Exponential; oracle use."""
    B = np.asarray(B)
    _check(B)

    def rec(idx: tuple) -> complex:
        if not idx:
            return 1.0
        i, rest = idx[0], idx[1:]
        total = 0.0
        for pos, j in enumerate(rest):
            total += B[i, j] * rec(rest[:pos] + rest[pos + 1 :])
        return total

    return complex(rec(tuple(range(B.shape[0]))))


@lru_cache(maxsize=None)
def perfect_matchings(dim: int) -> np.ndarray:
    """All perfect matchings of ``range(dim)`` as an array ``(count, dim//2, 2)``."""

    def rec(items):
        if not items:
            yield ()
            return
        first, rest = items[0], items[1:]
        for pos, j in enumerate(rest):
            for tail in rec(rest[:pos] + rest[pos + 1 :]):
                yield ((first, j),) + tail

    out = np.array(list(rec(tuple(range(dim)))), dtype=np.intp)
    return out.reshape(-1, dim // 2, 2)


def _hafnian_by_matchings(B: np.ndarray) -> np.ndarray:
    dim = B.shape[-1]
    if dim == 0:
        return np.ones(B.shape[:-2], dtype=complex)
    pm = perfect_matchings(dim)
    vals = B[..., pm[:, :, 0], pm[:, :, 1]]
    return vals.prod(axis=-1).sum(axis=-1)


def _exp_series_coefficient(power_sums: np.ndarray, n: int) -> np.ndarray:
    """Coefficient of ``x^n`` in ``exp(sum_j p_j x^j / (2j))`` for each row."""
    batch = power_sums.shape[0]
    a = power_sums / (2.0 * np.arange(1, n + 1))
    e = np.zeros((batch, n + 1), dtype=complex)
    e[:, 0] = 1.0
    for t in range(1, n + 1):
        j = np.arange(1, t + 1)
        e[:, t] = (j * a[:, :t] * e[:, t - j]).sum(axis=1) / t
    return e[:, n]


def _power_traces(C: np.ndarray, n: int) -> np.ndarray:
    """``tr(C^j)`` for ``j = 1..n`` by repeated batched products."""
    out = np.empty((C.shape[0], n), dtype=complex)
    P = C
    for j in range(n):
        out[:, j] = np.trace(P, axis1=-2, axis2=-1)
        if j + 1 < n:
            P = P @ C
    return out


def _power_trace_batch(B: np.ndarray) -> np.ndarray:
    """Power-trace formula for a stack ``(batch, 2n, 2n)``."""
    n = B.shape[-1] // 2
    out = np.zeros(B.shape[0], dtype=complex)
    if n == 0:
        return out + 1.0
    BX = np.concatenate([B[..., n:], B[..., :n]], axis=-1)
    for k in range(1, n + 1):
        subs = np.array(list(combinations(range(n), k)), dtype=np.intp)
        idx = np.concatenate([subs, subs + n], axis=1)
        C = BX[:, idx[:, :, None], idx[:, None, :]]
        coeff = _exp_series_coefficient(_power_traces(C.reshape(-1, 2 * k, 2 * k), n), n)
        out += (-1) ** (n - k) * coeff.reshape(B.shape[0], -1).sum(axis=1)
    return out


def hafnian_power_trace(B) -> complex:
    """Power-trace formula with pairs ``(j, j + n)``.

    ``haf(B) = sum_Z (-1)^(n-|Z|) f((B X)_Z)`` where ``f(C)`` is the ``x^n``
    coefficient of ``exp(sum_k tr(C^k) x^k / (2k))``.
    """
    B = np.asarray(B, dtype=complex)
    _check(B)
    return complex(_power_trace_batch(B[None])[0])


def hafnian_batch(B) -> np.ndarray:
    """Hafnians of a stack of matrices with shape ``(..., 2n, 2n)``."""
    B = np.asarray(B, dtype=complex)
    n = _check(B)
    if n <= _MATCHING_PATH_PAIRS:
        return _hafnian_by_matchings(B)
    flat = B.reshape(-1, 2 * n, 2 * n)
    # bound the eigenvalue workspace
    step = max(1, 2**18 // (2**n * n * n))
    out = np.concatenate([_power_trace_batch(flat[i : i + step]) for i in range(0, len(flat), step)])
    return out.reshape(B.shape[:-2])


def hafnian(B) -> complex:
    B = np.asarray(B, dtype=complex)
    n = _check(B)
    if n <= _MATCHING_PATH_PAIRS:
        return complex(_hafnian_by_matchings(B))
    return hafnian_power_trace(B)
