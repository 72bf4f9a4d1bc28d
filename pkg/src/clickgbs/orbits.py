r"""Orbit probabilities.

An orbit ``(m1, m2)`` collects every click pattern with ``m1`` outputs showing
one click, ``m2`` outputs showing two and zeros elsewhere; in the ``O_l^n``
labelling ``n = m1 + 2 m2`` and ``l = m2``.

Two estimators are provided:

* :func:`estimate_orbit_direct` averages exact pattern probabilities over
  uniformly drawn members of the orbit;
* :func:`characteristic_function` + :func:`inverse_dft` average the product
  of detector symbols over positive-P samples on a Fourier grid, either the
  full ``(M+1) x (M+1)`` grid or the folded 1-D grid of size ``J floor(M/D)``.
"""

from __future__ import annotations

import io
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import _kernels
from .detectors import DetectorModel
from .gaussian import GaussianState, kernel, photon_number_moments
from .probability import pattern_probability
from .sampling import PhaseSpaceBatch, block_rng

__all__ = [
    "OrbitId",
    "OrbitTable",
    "CharTable",
    "FoldingChoice",
    "orbit_cardinality",
    "log_orbit_cardinality",
    "orbit_members",
    "estimate_orbit_direct",
    "direct_orbit_table",
    "characteristic_function",
    "inverse_dft",
    "forward_dft",
    "select_folding_params",
    "N_BATCHES",
    "MAX_REJECT_RATE",
]

log = logging.getLogger(__name__)

N_BATCHES = 100
MAX_REJECT_RATE = 1e-3


@dataclass(frozen=True, order=True)
class OrbitId:
    m1: int
    m2: int

    def __post_init__(self):
        if self.m1 < 0 or self.m2 < 0:
            raise ValueError("orbit counts must be non-negative")

    @property
    def n(self) -> int:
        return self.m1 + 2 * self.m2

    @property
    def l(self) -> int:
        return self.m2

    @classmethod
    def from_nl(cls, n: int, l: int) -> "OrbitId":
        return cls(n - 2 * l, l)

    @classmethod
    def of_pattern(cls, pattern) -> "OrbitId":
        p = np.asarray(pattern)
        if np.any(p > 2):
            raise ValueError("pattern has an output with more than two clicks")
        return cls(int((p == 1).sum()), int((p == 2).sum()))


def orbit_cardinality(M: int, m1: int, m2: int) -> int:
    """``M! / (m1! m2! (M - m1 - m2)!)`` in exact integer arithmetic."""
    if m1 < 0 or m2 < 0 or m1 + m2 > M:
        raise ValueError("need 0 <= m1, m2 and m1 + m2 <= M")
    return math.comb(M, m1) * math.comb(M - m1, m2)


def log_orbit_cardinality(M: int, m1: int, m2: int) -> float:
    return float(gammaln(M + 1) - gammaln(m1 + 1) - gammaln(m2 + 1) - gammaln(M - m1 - m2 + 1))


def orbit_members(M: int, orbit: OrbitId) -> Iterable[np.ndarray]:
    """Every pattern of the orbit, in lexicographic placement order."""
    for ones in itertools.combinations(range(M), orbit.m1):
        rest = [i for i in range(M) if i not in ones]
        for twos in itertools.combinations(rest, orbit.m2):
            p = np.zeros(M, dtype=int)
            p[list(ones)] = 1
            p[list(twos)] = 2
            yield p


@dataclass
class OrbitTable:
    """``entries[OrbitId] = (probability, stderr)`` plus provenance."""

    entries: dict
    method: str
    seed: int | None = None
    samples: int | None = None
    meta: dict = field(default_factory=dict)

    def probability(self, orbit: OrbitId) -> float:
        return self.entries.get(orbit, (0.0, 0.0))[0]

    def stderr(self, orbit: OrbitId) -> float:
        return self.entries.get(orbit, (0.0, 0.0))[1]

    def orbits(self) -> list:
        return sorted(self.entries, key=lambda o: (o.n, o.l))

    def total(self) -> float:
        return math.fsum(p for p, _ in self.entries.values())

    def to_csv(self, stream=None, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        buf.write("n,l,probability,stderr,method,seed,E_S\n")
        seed = "" if self.seed is None else str(self.seed)
        samples = "" if self.samples is None else str(self.samples)
        for o in self.orbits():
            p, se = self.entries[o]
            buf.write(f"{o.n},{o.l},{p:.17g},{se:.17g},{self.method},{seed},{samples}\n")
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "OrbitTable":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        entries, method, seed, samples = {}, "", None, None
        for ln in lines[1:]:
            n, l, p, se, method, s, e = ln.split(",")
            entries[OrbitId.from_nl(int(n), int(l))] = (float(p), float(se))
            seed = int(s) if s else None
            samples = int(e) if e else None
        return cls(entries, method, seed, samples)


# --------------------------------------------------------------------------
# direct estimator
# --------------------------------------------------------------------------


def estimate_orbit_direct(
    state,
    det: DetectorModel,
    orbit: OrbitId,
    N_S: int,
    seed: int,
    threads: int | None = None,
) -> tuple[float, float]:
    """``|O| * mean P(n)`` over ``N_S`` uniformly placed members.

    Orbits with at most ``N_S`` members are summed exhaustively (zero error).
    """
    K = state if not isinstance(state, GaussianState) else kernel(state)
    M = K.M
    if orbit.m1 + orbit.m2 > M:
        return 0.0, 0.0
    size = orbit_cardinality(M, orbit.m1, orbit.m2)

    def prob(p):
        return pattern_probability(K, det, p, threads=threads)

    if size <= N_S:
        return math.fsum(prob(p) for p in orbit_members(M, orbit)), 0.0
    rng = block_rng(seed, orbit.m1, stream=1000 + orbit.m2)
    vals = np.empty(N_S)
    base = np.zeros(M, dtype=int)
    base[: orbit.m1] = 1
    base[orbit.m1 : orbit.m1 + orbit.m2] = 2
    for s in range(N_S):
        vals[s] = prob(rng.permutation(base))
    mean = vals.mean()
    se = vals.std(ddof=1) / np.sqrt(N_S)
    return float(size * mean), float(size * se)


def direct_orbit_table(
    state, det: DetectorModel, orbits: Iterable[OrbitId], N_S: int, seed: int, threads=None
) -> OrbitTable:
    K = kernel(state) if isinstance(state, GaussianState) else state
    entries = {o: estimate_orbit_direct(K, det, o, N_S, seed, threads) for o in orbits}
    return OrbitTable(entries, "direct", seed, N_S)


# --------------------------------------------------------------------------
# phase-space estimator
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CharTable:
    """Characteristic function on a full or folded grid.

    ``values`` has shape ``(M+1, M+1)`` (full) or ``(J*G,)`` (folded);
    ``batch_means`` adds a leading batch axis used for standard errors.
    """

    values: np.ndarray
    batch_means: np.ndarray
    kind: str
    M: int
    E: int
    rejected: int
    seed: int | None = None
    D: int | None = None
    J: int | None = None

    @property
    def G(self) -> int | None:
        return None if self.D is None else self.M // self.D

    @property
    def stderr(self) -> np.ndarray:
        nb = self.batch_means.shape[0]
        re = self.batch_means.real.std(axis=0, ddof=1)
        im = self.batch_means.imag.std(axis=0, ddof=1)
        return np.hypot(re, im) / np.sqrt(nb)


def _grid(M: int, kind: str, D: int | None, J: int | None):
    if kind == "full":
        theta = 2 * np.pi / (M + 1)
        k1, k2 = np.meshgrid(np.arange(M + 1), np.arange(M + 1), indexing="ij")
        return np.exp(-1j * k1.ravel() * theta), np.exp(-1j * k2.ravel() * theta), (M + 1, M + 1)
    G = M // D
    if G < 1 or J < 1:
        raise ValueError("folding needs floor(M/D) >= 1 and J >= 1")
    size = J * G
    theta = 2 * np.pi / size
    k = np.arange(size)
    return np.exp(-1j * k * theta), np.exp(-1j * k * G * theta), (size,)


def characteristic_function(
    batch: PhaseSpaceBatch,
    det: DetectorModel,
    grid: str = "full",
    D: int | None = None,
    J: int | None = None,
    n_batches: int = N_BATCHES,
    threads: int | None = None,
) -> CharTable:
    """Mean over samples of ``prod_i [pi0 + pi1 e^{-i k1 theta} + pi2 e^{-i k2 theta}]``
    with ``pi_q = pi(q | alpha_i beta_i)``."""
    if grid not in ("full", "folded"):
        raise ValueError("grid must be 'full' or 'folded'")
    mu = batch.mu
    # non-finite samples are rejected below, so silence their arithmetic warnings here
    with np.errstate(invalid="ignore", over="ignore"):
        p0, p1, p2 = (np.ascontiguousarray(det.symbol(q, mu), dtype=complex) for q in (0, 1, 2))
    x, y, shape = _grid(batch.M, grid, D, J)
    E = batch.E
    n_batches = max(1, min(n_batches, E))
    edges = np.linspace(0, E, n_batches + 1).astype(int)

    def run(b):
        return _kernels.char_accumulate(p0, p1, p2, x, y, int(edges[b]), int(edges[b + 1]))

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, range(n_batches)))
    else:
        parts = [run(b) for b in range(n_batches)]
    sums = np.stack([p[0] for p in parts])
    rej = np.array([p[1] for p in parts])
    counts = np.diff(edges) - rej
    rejected = int(rej.sum())
    if rejected > MAX_REJECT_RATE * E:
        raise FloatingPointError(
            f"{rejected} of {E} samples gave non-finite products (limit {MAX_REJECT_RATE:.1%})"
        )
    if rejected:
        log.info("rejected %d non-finite samples", rejected)
    means = sums / np.maximum(counts, 1)[:, None]
    total = sums.sum(axis=0) / counts.sum()
    return CharTable(
        total.reshape(shape),
        means.reshape((n_batches,) + shape),
        grid,
        batch.M,
        E,
        rejected,
        batch.seed,
        D if grid == "folded" else None,
        J if grid == "folded" else None,
    )


def _invert(values: np.ndarray, kind: str) -> np.ndarray:
    if kind == "full":
        return np.fft.ifft2(values, axes=(-2, -1))
    return np.fft.ifft(values, axis=-1)


def inverse_dft(table: CharTable, imag_warn: float = 1e-6) -> OrbitTable:
    """Orbit probabilities from the characteristic function.

    Folded grids are unfolded by ``m -> (m mod G, m // G)``; orbits outside
    ``m1 < G``, ``m2 < J`` alias onto these indices by construction.
    """
    P = _invert(table.values, table.kind)
    Pb = _invert(table.batch_means, table.kind).real
    nb = Pb.shape[0]
    se = Pb.std(axis=0, ddof=1) / np.sqrt(nb) if nb > 1 else np.zeros(P.shape)
    resid = float(np.max(np.abs(P.imag)))
    if resid > imag_warn:
        log.info("inverse DFT imaginary residue %.3g", resid)
    M = table.M
    entries = {}
    if table.kind == "full":
        for m1 in range(M + 1):
            for m2 in range(M + 1 - m1):
                entries[OrbitId(m1, m2)] = (max(0.0, float(P[m1, m2].real)), float(se[m1, m2]))
    else:
        G = table.G
        for m in range(P.shape[0]):
            m1, m2 = m % G, m // G
            if m1 + m2 <= M:
                entries[OrbitId(m1, m2)] = (max(0.0, float(P[m].real)), float(se[m]))
    meta = {"imag_residue": resid, "rejected": table.rejected, "grid": table.kind}
    if table.kind == "folded":
        meta.update(D=table.D, J=table.J)
    return OrbitTable(entries, f"phase-space-{table.kind}", table.seed, table.E, meta)


def forward_dft(orbit_table: OrbitTable, M: int) -> np.ndarray:
    """Full-grid characteristic function of a table (the exact inverse of
    :func:`inverse_dft` on the full grid)."""
    P = np.zeros((M + 1, M + 1), dtype=complex)
    for o, (p, _) in orbit_table.entries.items():
        P[o.m1, o.m2] = p
    return np.fft.fft2(P)


# --------------------------------------------------------------------------
# folding parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldingChoice:
    D: int | None
    J: int | None
    G: int | None
    feasible: bool
    mean: float
    var: float
    surrogate: str
    params: tuple


def _surrogate(mean: float, var: float):
    if var > mean * (1 + 1e-12) and mean > 0:
        size = mean * mean / (var - mean)
        p = size / (size + mean)
        return stats.nbinom(size, p), "negative-binomial", (size, p)
    return stats.poisson(mean), "poisson", (mean,)


def select_folding_params(state: GaussianState, E_S: int, J_max: int = 64) -> FoldingChoice:
    """Largest ``D`` and smallest ``J`` for which the surrogate photon-number
    law makes both aliasing channels rarer than one sample in ``E_S``.

    ``D``: ``P(n >= floor(M/D)) < 1/E_S``. ``J``: ``p(floor(<n>)) / J! < 1/E_S``
    or ``P(n >= 2J) < 1/E_S``.
    """
    M = state.M
    mean, var = photon_number_moments(state)
    dist, name, params = _surrogate(mean, var)
    target = 1.0 / E_S
    G_min = next((G for G in range(1, M + 1) if dist.sf(G - 1) < target), None)
    p_mode = float(dist.pmf(int(math.floor(mean))))
    # J two-click outputs need at least 2J photons, so the tail bounds the aliased mass too
    J = next(
        (j for j in range(1, J_max + 1) if min(p_mode / math.factorial(j), dist.sf(2 * j - 1)) < target),
        None,
    )
    D = None if G_min is None else M // G_min
    G = None if D is None else M // D
    feasible = D is not None and J is not None
    if not feasible:
        log.warning("no feasible folding for E_S=%d (D=%s, J=%s); using the full grid", E_S, D, J)
    return FoldingChoice(D, J, G, feasible, mean, var, name, params)
