"""Positive-P phase-space samples and direct sampling of classical states.

Random numbers come from counter-based Philox streams, one per fixed block of
``BLOCK`` samples, keyed by ``(seed, block index)``. A batch is therefore the
same whatever the thread count or the order in which blocks are generated.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .detectors import DetectorModel
from .gaussian import Interferometer

__all__ = [
    "BLOCK",
    "PhaseSpaceBatch",
    "ClassicalSampleSet",
    "block_rng",
    "squeezed_deltas",
    "sample_positive_p",
    "sample_classical_p",
    "propagate_batch",
    "sample_classical_patterns",
    "save_batch",
    "load_batch",
]

BLOCK = 1 << 14
_MAGIC = b"CGBSPSB1"
_HEADER = struct.Struct("<8sQQq")


def block_rng(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    """Independent Philox generator for sample block ``block``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def _blocks(E: int):
    return [(b, b * BLOCK, min((b + 1) * BLOCK, E)) for b in range((E + BLOCK - 1) // BLOCK)]


def _run_blocks(fn, E: int, threads: int | None):
    blocks = _blocks(E)
    if threads and threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, blocks))
    return [fn(b) for b in blocks]


@dataclass(frozen=True)
class PhaseSpaceBatch:
    """Paired amplitudes; ``mu = alpha * beta`` feeds the detector symbols."""

    alphas: np.ndarray
    betas: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def E(self) -> int:
        return self.alphas.shape[0]

    @property
    def M(self) -> int:
        return self.alphas.shape[1]

    @property
    def mu(self) -> np.ndarray:
        return self.alphas * self.betas


def squeezed_deltas(r: float, epsilon: float) -> tuple[complex, complex]:
    """``delta_pm = sqrt((sinh^2 r +- (1 - eps) sinh r cosh r) / 2)``.

    ``delta_-^2`` is negative whenever ``(1 - eps) cosh r > sinh r``; the
    complex root keeps ``alpha~`` and ``beta~`` as a valid positive-P pair.
    """
    s, c = np.sinh(r), np.cosh(r)
    dp = np.sqrt(complex((s * s + (1 - epsilon) * s * c) / 2))
    dm = np.sqrt(complex((s * s - (1 - epsilon) * s * c) / 2))
    return dp, dm


def sample_positive_p(
    inputs: Sequence[tuple[float, float]],
    M: int,
    E: int,
    seed: int,
    threads: int | None = None,
) -> PhaseSpaceBatch:
    """Input-plane samples for thermalized squeezed states on the first ports.

    ``inputs`` lists ``(r, epsilon)`` per squeezed port; the remaining ports
    are vacuum. A common phase ``exp(+-i pi/4)`` aligns the samples with the
    squeezing axis of the quadrature covariance (``<a^2> = i (1-eps) s c``).
    """
    if E < 1:
        raise ValueError("E must be >= 1")
    if len(inputs) > M:
        raise ValueError("more inputs than modes")
    Mp = len(inputs)
    dp = np.zeros(M, dtype=complex)
    dm = np.zeros(M, dtype=complex)
    for j, (r, eps) in enumerate(inputs):
        if r < 0 or not 0 <= eps <= 1:
            raise ValueError("need r >= 0 and epsilon in [0, 1]")
        dp[j], dm[j] = squeezed_deltas(r, eps)
    phase = np.exp(0.25j * np.pi)

    def block(b):
        idx, lo, hi = b
        w = block_rng(seed, idx).standard_normal((hi - lo, 2 * Mp))
        a = np.zeros((hi - lo, M), dtype=complex)
        bt = np.zeros((hi - lo, M), dtype=complex)
        w1, w2 = w[:, :Mp], w[:, Mp:]
        a[:, :Mp] = phase * (dp[:Mp] * w1 + 1j * dm[:Mp] * w2)
        bt[:, :Mp] = np.conj(phase) * (dp[:Mp] * w1 - 1j * dm[:Mp] * w2)
        return a, bt

    parts = _run_blocks(block, E, threads)
    alphas = np.concatenate([p[0] for p in parts])
    betas = np.concatenate([p[1] for p in parts])
    return PhaseSpaceBatch(alphas, betas, seed, {"plane": "input", "inputs": list(inputs)})


def _p_function_amplitudes(stateclass: str, n_th: np.ndarray, rng, n: int) -> np.ndarray:
    """Coherent amplitudes from the non-negative P function of each input."""
    Mp = len(n_th)
    if stateclass == "thermal":
        z = rng.standard_normal((n, 2 * Mp))
        return np.sqrt(n_th / 2) * (z[:, :Mp] + 1j * z[:, Mp:])
    if stateclass == "squashed":
        # excess noise along (x + p)/sqrt(2): x = p = sqrt(n_th) z
        z = rng.standard_normal((n, Mp))
        return np.sqrt(n_th) * z * (1 + 1j) / np.sqrt(2.0)
    raise ValueError(
        f"state class {stateclass!r} is not classical; quantum pattern sampling is out of scope"
    )


def sample_classical_p(
    stateclass: str, n_th: Sequence[float], M: int, E: int, seed: int, threads: int | None = None
) -> PhaseSpaceBatch:
    """Input-plane samples of a classical state with ``beta = conj(alpha)``."""
    n_th = np.asarray(n_th, dtype=float)
    if np.any(n_th < 0):
        raise ValueError("thermal photon numbers must be non-negative")
    if len(n_th) > M:
        raise ValueError("more inputs than modes")

    def block(b):
        idx, lo, hi = b
        a = np.zeros((hi - lo, M), dtype=complex)
        a[:, : len(n_th)] = _p_function_amplitudes(stateclass, n_th, block_rng(seed, idx), hi - lo)
        return a

    alphas = np.concatenate(_run_blocks(block, E, threads))
    return PhaseSpaceBatch(alphas, alphas.conj(), seed, {"plane": "input", "class": stateclass})


def propagate_batch(batch: PhaseSpaceBatch, U, eta: float = 1.0) -> PhaseSpaceBatch:
    """``alpha -> sqrt(eta) U alpha``, ``beta -> sqrt(eta) U* beta``."""
    if not isinstance(U, Interferometer):
        U = Interferometer(U)
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    g = np.sqrt(eta)
    a = g * batch.alphas @ U.U.T
    b = g * batch.betas @ U.U.conj().T
    meta = dict(batch.meta, plane="output", eta=eta)
    return PhaseSpaceBatch(a, b, batch.seed, meta)


# --------------------------------------------------------------------------
# classical states
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalSampleSet:
    """Click patterns of a classical input, one row per sample."""

    patterns: np.ndarray
    source: str
    seed: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def N(self) -> int:
        return self.patterns.shape[0]

    def orbit_labels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(n, l, ok)``: total clicks, outputs with two clicks, and whether
        every output registered at most two clicks."""
        p = self.patterns
        return p.sum(axis=1), (p == 2).sum(axis=1), (p <= 2).all(axis=1)


class _ResponseSampler:
    """Categorical draws ``n ~ P(.|m)`` from a cached cumulative table."""

    def __init__(self, det: DetectorModel):
        self.det = det
        self.m_max = -1
        self.cdf = None

    def ensure(self, m_max: int):
        if m_max <= self.m_max:
            return
        m_max = max(m_max, 2 * self.m_max, 16)
        top = self.det.max_outcome
        n_max = m_max if top is None else min(top, m_max)
        R = self.det.fock_response(n_max, m_max).matrix
        cdf = np.cumsum(R, axis=0)
        cdf[-1] = np.maximum(cdf[-1], 1.0)
        self.cdf = cdf
        self.m_max = m_max

    def draw(self, m: np.ndarray, u: np.ndarray) -> np.ndarray:
        cols = self.cdf[:, m.ravel()]
        n = (u.ravel()[None, :] >= cols).sum(axis=0)
        return np.minimum(n, self.cdf.shape[0] - 1).reshape(m.shape)


def sample_classical_patterns(
    stateclass: str,
    n_th: Sequence[float],
    U,
    eta: float,
    det: DetectorModel,
    N: int,
    seed: int,
    threads: int | None = None,
) -> ClassicalSampleSet:
    """Click patterns for thermal or squashed inputs on the first ports.

    Coherent amplitudes come from the non-negative P function (``sigma - I/2``
    as a real covariance), pass through ``U`` and ``sqrt(eta)``; photon numbers
    are Poisson and outcomes are drawn from the detector's Fock response.
    """
    if stateclass not in ("thermal", "squashed"):
        raise ValueError(
            f"state class {stateclass!r} is not classical; quantum pattern sampling is out of scope"
        )
    if not isinstance(U, Interferometer):
        U = Interferometer(U)
    M = U.M
    n_th = np.asarray(n_th, dtype=float)
    if np.any(n_th < 0):
        raise ValueError("thermal photon numbers must be non-negative")
    Mp = len(n_th)
    if Mp > M:
        raise ValueError("more inputs than modes")
    g = np.sqrt(eta) * U.U
    sampler = _ResponseSampler(det)

    def photons(b):
        idx, lo, hi = b
        rng = block_rng(seed, idx)
        n = hi - lo
        a = np.zeros((n, M), dtype=complex)
        a[:, :Mp] = _p_function_amplitudes(stateclass, n_th, rng, n)
        out = a @ g.T
        m = rng.poisson(np.abs(out) ** 2)
        u = rng.random((n, M))
        return m, u

    parts = _run_blocks(photons, N, threads)
    sampler.ensure(max(int(p[0].max(initial=0)) for p in parts))
    patterns = np.concatenate([sampler.draw(m, u) for m, u in parts]).astype(np.int16)
    meta = {"n_th": n_th.tolist(), "eta": eta, "detector": det.to_spec()}
    return ClassicalSampleSet(patterns, stateclass, seed, meta)


# --------------------------------------------------------------------------
# binary cache
# --------------------------------------------------------------------------


def save_batch(batch: PhaseSpaceBatch, path) -> None:
    """Header ``(magic, M, E, seed)`` then row-major ``(alpha, beta)`` pairs
    as little-endian complex128, shape ``(E, M, 2)``."""
    data = np.stack([batch.alphas, batch.betas], axis=-1).astype("<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, batch.M, batch.E, int(batch.seed)))
        fh.write(np.ascontiguousarray(data).tobytes())


def load_batch(path) -> PhaseSpaceBatch:
    with open(path, "rb") as fh:
        magic, M, E, seed = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a phase-space batch file")
        data = np.frombuffer(fh.read(), dtype="<c16").reshape(E, M, 2)
    return PhaseSpaceBatch(data[..., 0].copy(), data[..., 1].copy(), seed, {"plane": "cache"})
