r"""Validation statistics comparing a quantum orbit table with classical data.

* :func:`chi_square` - Pearson statistic on the distribution of total clicks
  ``n`` conditioned on the number ``l`` of outputs with two clicks.
* :func:`bayesian_confidence` - ``Delta H``, the mean log-likelihood ratio
  of the quantum over the classical hypothesis on orbit labels drawn from the
  normalised quantum table.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .orbits import OrbitId, OrbitTable
from .sampling import ClassicalSampleSet, block_rng

__all__ = [
    "ConditionalDist",
    "Chi2Result",
    "BayesResult",
    "orbit_counts",
    "orbit_table_from_samples",
    "conditional",
    "chi_square",
    "chi_square_counts",
    "bayesian_confidence",
    "confidence_gain",
    "on_off_orbit",
    "draw_orbits",
]


@dataclass(frozen=True)
class ConditionalDist:
    """``P(n | l)`` on the listed support."""

    l: int
    probs: dict

    @property
    def support(self) -> list:
        return sorted(self.probs)

    def __post_init__(self):
        total = math.fsum(self.probs.values())
        if self.probs and abs(total - 1.0) > 1e-10:
            raise ValueError(f"conditional distribution sums to {total}")


@dataclass(frozen=True)
class Chi2Result:
    chi2: float
    k: int
    N: int
    l: int

    @property
    def reduced(self) -> float:
        return self.chi2 / self.k


@dataclass(frozen=True)
class BayesResult:
    delta_h: float
    stderr: float
    N_O: int
    floored: int
    seed: int


def orbit_counts(samples: ClassicalSampleSet) -> Counter:
    """Counts per orbit over patterns whose outputs all show at most two clicks."""
    n, l, ok = samples.orbit_labels()
    return Counter(OrbitId.from_nl(int(a), int(b)) for a, b in zip(n[ok], l[ok]))


def orbit_table_from_samples(samples: ClassicalSampleSet) -> OrbitTable:
    """Empirical orbit frequencies relative to all ``N`` samples."""
    N = samples.N
    entries = {}
    for o, c in sorted(orbit_counts(samples).items()):
        p = c / N
        entries[o] = (p, math.sqrt(p * (1 - p) / N))
    return OrbitTable(entries, "classical-frequency", samples.seed, N)


def conditional(table: OrbitTable, l: int, support=None) -> ConditionalDist:
    """``P(n | l)`` from a table, renormalised over ``support`` if given."""
    rows = {o.n: table.probability(o) for o in table.entries if o.l == l}
    if support is not None:
        rows = {n: rows.get(n, 0.0) for n in support}
    total = math.fsum(rows.values())
    if total <= 0:
        raise ValueError(f"no probability mass at l={l} on the requested support")
    return ConditionalDist(l, {n: p / total for n, p in rows.items()})


def chi_square_counts(quantum: OrbitTable, counts: dict, l: int, min_count: int = 10) -> Chi2Result:
    """Pearson statistic from orbit counts.

    Only orbits seen more than ``min_count`` times at this ``l`` enter; ``N_l``
    counts the patterns in those orbits and the quantum conditional law is
    renormalised over the same support.
    """
    sel = {o.n: c for o, c in counts.items() if o.l == l and c > min_count}
    if not sel:
        raise ValueError(f"no orbit at l={l} appears more than {min_count} times")
    N_l = int(sum(sel.values()))
    support = sorted(sel)
    q = conditional(quantum, l, support).probs
    chi2 = 0.0
    for n in support:
        if q[n] <= 0:
            raise ValueError(f"quantum table has no mass at (n={n}, l={l})")
        chi2 += (q[n] - sel[n] / N_l) ** 2 / q[n]
    return Chi2Result(N_l * chi2, len(support), N_l, l)


def chi_square(quantum: OrbitTable, classical: ClassicalSampleSet, l: int, min_count: int = 10) -> Chi2Result:
    if classical.N == 0:
        raise ValueError("classical sample set is empty")
    return chi_square_counts(quantum, orbit_counts(classical), l, min_count)


def _normalised(table: OrbitTable) -> tuple[list, np.ndarray]:
    orbits = [o for o in table.orbits() if table.probability(o) > 0]
    p = np.array([table.probability(o) for o in orbits])
    return orbits, p / p.sum()


def draw_orbits(table: OrbitTable, N_O: int, seed: int) -> list:
    """``N_O`` orbit labels from the normalised table."""
    orbits, p = _normalised(table)
    idx = block_rng(seed, 0, stream=7).choice(len(orbits), size=N_O, p=p)
    return [orbits[i] for i in idx]


class _LogRatio:
    """``ln[P(o) / P_cl(o)]`` on normalised tables with zero entries floored."""

    def __init__(self, quantum: OrbitTable, classical: OrbitTable, floor: float | None):
        self.q = dict(zip(*_normalised(quantum)))
        self.c = dict(zip(*_normalised(classical)))
        self.fq = self._floor(quantum, floor)
        self.fc = self._floor(classical, floor)
        self.floored = 0

    @staticmethod
    def _floor(t: OrbitTable, floor: float | None) -> float:
        if floor is not None:
            return floor
        return 1.0 / (10 * t.samples) if t.samples else 1e-300

    def __call__(self, o: OrbitId) -> float:
        pq = self.q.get(o, 0.0)
        pc = self.c.get(o, 0.0)
        if pq <= 0:
            pq, self.floored = self.fq, self.floored + 1
        if pc <= 0:
            pc, self.floored = self.fc, self.floored + 1
        return math.log(pq / pc)


def _result(vals: np.ndarray, floored: int, seed: int) -> BayesResult:
    N_O = len(vals)
    se = float(vals.std(ddof=1) / math.sqrt(N_O)) if N_O > 1 else 0.0
    return BayesResult(float(vals.mean()), se, N_O, floored, seed)


def bayesian_confidence(
    quantum: OrbitTable,
    classical: OrbitTable,
    N_O: int,
    seed: int,
    floor: float | None = None,
    swap: bool = False,
) -> BayesResult:
    """``mean ln[P(n,l) / P_cl(n,l)]`` over ``N_O`` draws from ``P``.

    Both tables are normalised over their own entries. Entries absent from
    (or zero in) a table are floored at ``floor``, by default
    ``1 / (10 N)`` with ``N`` the sample count behind that table. With
    ``swap`` the draws come from the classical table instead, so the
    expected sign flips.
    """
    draws = draw_orbits(classical if swap else quantum, N_O, seed)
    ratio = _LogRatio(quantum, classical, floor)
    vals = np.array([ratio(o) for o in draws])
    return _result(vals, ratio.floored, seed)


def confidence_gain(
    fine: tuple[OrbitTable, OrbitTable],
    coarse: tuple[OrbitTable, OrbitTable],
    coarsen,
    N_O: int,
    seed: int,
    floor: float | None = None,
) -> BayesResult:
    """Paired estimate of ``Delta H(fine) - Delta H(coarse)``.

    ``fine`` and ``coarse`` are ``(quantum, classical)`` table pairs for two
    detectors, the coarse outcome being a function of the fine one
    (``coarsen`` maps a fine orbit to its coarse orbit, e.g. an on-off
    reading of a two-bin click detector). Each draw from the fine quantum
    table is then also a draw from the coarse one, and the per-draw
    difference of log ratios has a far smaller spread than either term.
    """
    draws = draw_orbits(fine[0], N_O, seed)
    rf = _LogRatio(*fine, floor)
    rc = _LogRatio(*coarse, floor)
    vals = np.array([rf(o) - rc(coarsen(o)) for o in draws])
    return _result(vals, rf.floored + rc.floored, seed)


def on_off_orbit(o: OrbitId) -> OrbitId:
    """Orbit seen by on-off detectors when each output has at most two clicks."""
    return OrbitId(o.m1 + o.m2, 0)
