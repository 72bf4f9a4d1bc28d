r"""Click-pattern probabilities and the Fock-space oracle.

``pattern_probability`` evaluates ``P(n) = F[A] / sqrt|sigma_Q|`` through the
functional matching the detector. The oracle ``brute_force_probability``
convolves the detector response ``P(n|m)`` with the photon-number
distribution ``P(m)``. The latter is obtained from the generating function

.. math:: G(z) = \sum_m P(m) z^m = |I - Z A|^{-1/2} / \sqrt{|\sigma_Q|},

sampled on a torus and inverted by an FFT, so no Hafnian is involved.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import functionals as fn
from .detectors import APD, PNR, SNSPD, Click, DetectorModel
from .gaussian import KernelMatrix, kernel
from .hafnian import MAX_HAFNIAN_PAIRS

__all__ = [
    "pattern_probability",
    "ideal_distribution",
    "brute_force_probability",
    "fock_lattice",
    "FockLattice",
    "IdealDistribution",
    "UnsupportedRoute",
    "NEGATIVE_TOL",
]

log = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-10
LATTICE_TAIL = 1e-12
MAX_LATTICE = 96


class UnsupportedRoute(ValueError):
    pass


def _kernel(state) -> KernelMatrix:
    return state if isinstance(state, KernelMatrix) else kernel(state)


def _clamp(p: float, what: str) -> float:
    if p < -NEGATIVE_TOL:
        raise fn.FunctionalError(f"{what} returned a negative probability {p:.3g}")
    if p < 0:
        log.debug("clamped negative residue %.3g in %s", p, what)
        return 0.0
    return p


def pattern_probability(state, det: DetectorModel, pattern, threads: int | None = None) -> float:
    """``P(n)`` for the Gaussian ``state`` (or its kernel) and detector ``det``."""
    K = _kernel(state)
    rk = fn.reduce(K, pattern)
    top = det.max_outcome
    if top is not None and any(c > top for c in rk.clicks):
        return 0.0
    if rk.N == 0:
        F = 1.0
    elif isinstance(det, PNR):
        if rk.total_clicks > 2 * MAX_HAFNIAN_PAIRS:
            raise UnsupportedRoute(
                f"{rk.total_clicks} photons exceed the hafnian limit of {2 * MAX_HAFNIAN_PAIRS}"
            )
        F = fn.hafnian_functional(rk)
    elif isinstance(det, Click):
        if det.K == 1:
            F = fn.torontonian(rk.A_S, threads=threads)
        else:
            F = fn.kensingtonian(rk, det.K)
    elif isinstance(det, APD):
        if max(rk.clicks) == 1:
            F = fn.apd_functional(rk, det.adjustment_efficiency(1), threads=threads)
        else:
            F = fn.expansion_functional(rk, det)
    elif isinstance(det, SNSPD):
        F, _ = fn.snspd_functional(rk, det)
    else:
        try:
            F = fn.expansion_functional(rk, det)
        except NotImplementedError as exc:
            raise UnsupportedRoute(f"no functional route for {type(det).__name__}") from exc
    return _clamp(F / K.normQ, "pattern_probability")


# --------------------------------------------------------------------------
# photon-number distribution
# --------------------------------------------------------------------------


def _pgf(A: np.ndarray, normQ: float, z: np.ndarray) -> np.ndarray:
    """``G`` at points ``z`` (shape ``(npts, M)``); |z_i| <= 1."""
    zz = np.concatenate([z, z], axis=1)
    mu = np.linalg.eigvals(zz[:, :, None] * A[None])
    # every eigenvalue has |mu| < 1, so the principal log of 1 - mu is continuous
    return np.exp(-0.5 * np.log1p(-mu).sum(axis=1)) / normQ


def _total_tail(A: np.ndarray, normQ: float, L: int, n_fft: int = 512) -> float:
    z = np.exp(-2j * np.pi * np.arange(n_fft) / n_fft)
    M = A.shape[0] // 2
    p = np.fft.ifft(_pgf(A, normQ, np.repeat(z[:, None], M, axis=1))).real
    return float(max(0.0, 1.0 - p[:L].sum()))


@dataclass(frozen=True)
class FockLattice:
    """``probs[m_1, ..., m_M]`` for ``m_i < L``; ``tail`` bounds the missing mass."""

    probs: np.ndarray
    tail: float

    @property
    def L(self) -> int:
        return self.probs.shape[0]


def fock_lattice(state, tail: float = LATTICE_TAIL, L: int | None = None) -> FockLattice:
    K = _kernel(state)
    return _fock_lattice(K.A.tobytes(), K.A.shape[0], K.normQ, tail, L)


@lru_cache(maxsize=64)
def _fock_lattice(Abytes: bytes, dim: int, normQ: float, tail: float, L: int | None) -> FockLattice:
    A = np.frombuffer(Abytes, dtype=complex).reshape(dim, dim)
    M = dim // 2
    if L is None:
        L = 8
        while _total_tail(A, normQ, L) > tail and L < MAX_LATTICE:
            L += 8
    miss = _total_tail(A, normQ, L)
    if miss > tail:
        log.warning("Fock lattice truncated at L=%d with tail %.3g", L, miss)
    if L**M > 4_000_000:
        raise UnsupportedRoute(f"Fock lattice {L}^{M} is beyond oracle scale")
    k = np.stack(np.meshgrid(*[np.arange(L)] * M, indexing="ij"), axis=-1).reshape(-1, M)
    z = np.exp(-2j * np.pi * k / L)
    G = _pgf(A, normQ, z).reshape((L,) * M)
    # sum_m P(m) exp(-2 pi i k m / L) is the forward DFT of P
    P = np.fft.ifftn(G).real
    P.setflags(write=False)
    return FockLattice(P, miss)


@dataclass(frozen=True)
class IdealDistribution:
    probs: dict
    cutoff: int
    tail: float
    warning: str | None = None


def ideal_distribution(state, cutoff: int, route: str = "hafnian") -> IdealDistribution:
    """``P(m)`` for every ``m`` with ``m_i <= cutoff``.

    ``route="hafnian"`` uses ``Haf(X A_m) / (m! sqrt|sigma_Q|)``;
    ``route="pgf"`` uses the torus FFT of the generating function.
    """
    K = _kernel(state)
    M = K.M
    probs = {}
    if route == "hafnian":
        for m in itertools.product(range(cutoff + 1), repeat=M):
            if sum(m) == 0:
                probs[m] = 1.0 / K.normQ
                continue
            if sum(m) > 2 * MAX_HAFNIAN_PAIRS:
                raise UnsupportedRoute("cutoff too large for the hafnian route")
            rk = fn.reduce(K, m)
            probs[m] = _clamp(fn.hafnian_functional(rk) / K.normQ, "ideal_distribution")
    elif route == "pgf":
        lat = fock_lattice(K, L=max(cutoff + 1, fock_lattice(K).L))
        for m in itertools.product(range(cutoff + 1), repeat=M):
            probs[m] = max(0.0, float(lat.probs[m]))
    else:
        raise ValueError(f"unknown route {route!r}")
    tail = max(0.0, 1.0 - math.fsum(probs.values()))
    warning = f"cutoff {cutoff} leaves tail mass {tail:.3g}" if tail > 1e-8 else None
    return IdealDistribution(probs, cutoff, tail, warning)


def brute_force_probability(state, det: DetectorModel, pattern, tail: float = LATTICE_TAIL) -> float:
    """``sum_m prod_i P(n_i|m_i) P(m)`` over a Fock lattice whose truncated
    mass is below ``tail``."""
    lat = fock_lattice(state, tail=tail)
    pattern = [int(v) for v in pattern]
    if len(pattern) != lat.probs.ndim:
        raise ValueError("pattern length does not match the mode count")
    R = det.fock_response(max(pattern), lat.L - 1).matrix
    out = lat.probs
    for n in pattern:
        # contract the leading axis each time; the remaining axes shift down
        out = np.tensordot(R[n], out, axes=(0, 0))
    return float(out)
