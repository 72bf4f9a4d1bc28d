"""Power-set enumeration for the inclusion-exclusion functionals.

Subsets of ``range(N)`` are bitmasks visited in reflected Gray-code order and
cut into fixed-size chunks. Chunk sums are combined by a pairwise tree, so a
result does not depend on how many workers processed the chunks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

__all__ = [
    "gray_code",
    "gray_masks",
    "popcount",
    "mask_indices",
    "pairwise_sum",
    "subset_lattice_sum",
    "default_threads",
]

CHUNK = 1 << 12


def default_threads() -> int:
    env = os.environ.get("CLICKGBS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def gray_code(i):
    i = np.asarray(i, dtype=np.int64)
    return i ^ (i >> 1)


def gray_masks(start: int, stop: int) -> np.ndarray:
    return gray_code(np.arange(start, stop, dtype=np.int64))


def popcount(masks: np.ndarray) -> np.ndarray:
    m = np.asarray(masks, dtype=np.int64)
    count = np.zeros(m.shape, dtype=np.int64)
    while np.any(m):
        count += m & 1
        m = m >> 1
    return count


def mask_indices(masks: np.ndarray, N: int, k: int) -> np.ndarray:
    """Member indices of each mask (all with ``k`` members), shape ``(len, k)``."""
    bits = (masks[:, None] >> np.arange(N)) & 1
    return np.nonzero(bits)[1].reshape(len(masks), k)


def pairwise_sum(values) -> complex:
    """Deterministic tree reduction."""
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def subset_lattice_sum(
    N: int,
    evaluate: Callable[[np.ndarray, int], np.ndarray],
    threads: int | None = None,
    chunk: int = CHUNK,
) -> tuple[complex, int]:
    """Sum ``evaluate(idx, k)`` over every subset of ``range(N)``.

    ``evaluate`` receives the member indices of a batch of same-size subsets,
    shape ``(batch, k)``, and returns one value per subset. Returns the sum and
    the number of subsets visited.
    """
    total = 1 << N
    bounds = [(s, min(s + chunk, total)) for s in range(0, total, chunk)]

    def run(bound):
        masks = gray_masks(*bound)
        sizes = popcount(masks)
        parts = []
        for k in np.unique(sizes):
            sel = masks[sizes == k]
            idx = mask_indices(sel, N, int(k)) if k else np.zeros((len(sel), 0), dtype=np.int64)
            parts.append(np.sum(evaluate(idx, int(k))))
        return pairwise_sum(parts), len(masks)

    threads = threads or 1
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, bounds))
    else:
        results = [run(b) for b in bounds]
    return pairwise_sum([r[0] for r in results]), sum(r[1] for r in results)
