r"""Matrix functionals ``F[A]`` with ``P(n) = F[A] / sqrt|sigma_Q|``.

All routes reduce the kernel to the triggered outputs first. Pair ``(i, i+N)``
of a ``2N x 2N`` reduced matrix always refers to the amplitude and its
conjugate for output ``support[i]``.

Sign conventions are fixed against the Fock-space oracle: the
inclusion-exclusion sums carry ``(-1)^(N - |Z|)``, which makes every
probability non-negative.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import comb

from .gaussian import KernelMatrix
from .hafnian import hafnian, hafnian_batch
from .subsets import subset_lattice_sum

__all__ = [
    "ReducedKernel",
    "FunctionalError",
    "reduce",
    "repeat",
    "select_pairs",
    "hafnian_functional",
    "torontonian",
    "kensingtonian",
    "kensingtonian_tor_form",
    "apd_functional",
    "apd_double_expansion",
    "gaussian_expectation",
    "gaussian_expectation_batch",
    "expansion_functional",
    "snspd_functional",
    "SNSPD_MAX_CLICKS",
]

IMAG_TOL = 1e-10
SNSPD_MAX_CLICKS = 4


class FunctionalError(ValueError):
    pass


@dataclass(frozen=True)
class ReducedKernel:
    base: KernelMatrix
    support: tuple
    clicks: tuple

    def __post_init__(self):
        if len(self.support) != len(self.clicks):
            raise ValueError("support and clicks differ in length")
        if any(c <= 0 for c in self.clicks):
            raise ValueError("click counts on the support must be positive")

    @property
    def N(self) -> int:
        return len(self.support)

    @property
    def total_clicks(self) -> int:
        return int(sum(self.clicks))

    @cached_property
    def A_S(self) -> np.ndarray:
        M = self.base.M
        idx = np.r_[np.array(self.support, dtype=int), np.array(self.support, dtype=int) + M]
        return self.base.A[np.ix_(idx, idx)]


def reduce(kernel: KernelMatrix, pattern: Sequence[int]) -> ReducedKernel:
    pattern = [int(v) for v in pattern]
    if len(pattern) != kernel.M:
        raise ValueError(f"pattern has {len(pattern)} entries for {kernel.M} modes")
    if any(v < 0 for v in pattern):
        raise ValueError("click counts must be non-negative")
    support = tuple(i for i, v in enumerate(pattern) if v)
    return ReducedKernel(kernel, support, tuple(pattern[i] for i in support))


def _repeat_matrix(A: np.ndarray, m: Sequence[int]) -> np.ndarray:
    """Keep pair ``i`` ``m[i]`` times in both blocks (``A`` may be stacked)."""
    L = A.shape[-1] // 2
    rows = np.repeat(np.arange(L), np.asarray(m, dtype=int))
    idx = np.r_[rows, rows + L]
    return A[..., idx[:, None], idx[None, :]]


def repeat(rk: ReducedKernel) -> np.ndarray:
    """``A_n``: each triggered pair repeated as often as it clicked."""
    return _repeat_matrix(rk.A_S, rk.clicks)


def select_pairs(A: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Principal submatrices on pairs ``idx`` (shape ``(batch, k)``)."""
    L = A.shape[-1] // 2
    full = np.concatenate([idx, idx + L], axis=1)
    return A[full[:, :, None], full[:, None, :]]


def _swap_blocks(B: np.ndarray) -> np.ndarray:
    """``X @ B`` for the block swap ``X``."""
    n = B.shape[-1] // 2
    return np.concatenate([B[..., n:, :], B[..., :n, :]], axis=-2)


def _real(value, what: str):
    value = np.asarray(value)
    if np.any(np.abs(np.imag(value)) > IMAG_TOL * max(1.0, float(np.max(np.abs(value))))):
        raise FunctionalError(f"{what}: imaginary residue {np.max(np.abs(np.imag(value))):.3g}")
    return np.real(value)


def _sqrt_det(mats: np.ndarray, what: str, idx=None) -> np.ndarray:
    d = np.linalg.det(mats)
    bad = (d.real <= 0) | (np.abs(d.imag) > 1e-8 * np.abs(d))
    if np.any(bad):
        where = "" if idx is None else f" on subset {tuple(int(v) for v in idx[np.argmax(bad)])}"
        raise FunctionalError(f"{what}: non-positive determinant {d[np.argmax(bad)]:.3g}{where}")
    return np.sqrt(d.real)


def hafnian_functional(rk: ReducedKernel) -> float:
    """Ideal photon-number resolution: ``Haf(X A_n) / prod(c_i!)``."""
    if rk.N == 0:
        return 1.0
    val = hafnian(_swap_blocks(repeat(rk)))
    denom = math.prod(math.factorial(c) for c in rk.clicks)
    return float(_real(val, "hafnian")) / denom


def torontonian(A_S: np.ndarray, threads: int | None = None, return_count: bool = False):
    """``sum_Z (-1)^(N - |Z|) / sqrt|I - A_Z|`` over all subsets of the pairs."""
    A_S = np.asarray(A_S, dtype=complex)
    N = A_S.shape[-1] // 2

    def evaluate(idx, k):
        if k == 0:
            return np.full(len(idx), (-1.0) ** N)
        sub = select_pairs(A_S, idx)
        root = _sqrt_det(np.eye(2 * k) - sub, "torontonian", idx)
        return (-1.0) ** (N - k) / root

    total, count = subset_lattice_sum(N, evaluate, threads=threads)
    total = float(_real(total, "torontonian"))
    return (total, count) if return_count else total


def _check_K(rk: ReducedKernel, K: int):
    if K < 1:
        raise ValueError("K must be >= 1")
    if any(c > K for c in rk.clicks):
        raise FunctionalError(f"{max(rk.clicks)} clicks are impossible with K={K}")


def kensingtonian(rk: ReducedKernel, K: int) -> float:
    """Click-array functional as a direct determinant sum over the binomial
    expansion (every ``k_i`` from 0 to ``c_i``)."""
    _check_K(rk, K)
    N = rk.N
    if N == 0:
        return 1.0
    c = np.array(rk.clicks)
    ks = np.array(list(itertools.product(*[range(ci + 1) for ci in c])))
    coef = math.prod(comb(K, ci, exact=True) for ci in c) * np.prod(
        comb(c, ks) * (-1.0) ** ks, axis=1
    )
    s = np.sqrt((c - ks) / K)
    s2 = np.concatenate([s, s], axis=1)
    B = s2[:, :, None] * rk.A_S[None] * s2[:, None, :]
    root = _sqrt_det(np.eye(2 * N) - B, "kensingtonian")
    return float(np.sum(coef / root))


def kensingtonian_tor_form(rk: ReducedKernel, K: int) -> float:
    """Same functional written through Torontonians of rescaled kernels
    (``k_i`` from 0 to ``c_i - 1``)."""
    _check_K(rk, K)
    if rk.N == 0:
        return 1.0
    c = np.array(rk.clicks)
    pref = math.prod(comb(K, ci, exact=True) for ci in c)
    total = 0.0
    for ks in itertools.product(*[range(ci) for ci in c]):
        ks = np.array(ks)
        coef = np.prod(comb(c, ks) * (-1.0) ** ks)
        s = np.sqrt((c - ks) / K)
        s2 = np.r_[s, s]
        total += coef * torontonian(s2[:, None] * rk.A_S * s2[None, :])
    return float(pref * total)


def apd_functional(rk: ReducedKernel, eta1: float, threads: int | None = None) -> float:
    """Collision-free pulse counting with a hard dead time.

    ``sum_Z (-1)^(N-|Z|) Haf(D_Z) / sqrt|I - (1 - eta1) A_Z|`` with
    ``D_Z = X (2I - [eta1 (I - A_Z)^-1 + (1 - eta1) I]^-1)``.
    """
    if any(c > 1 for c in rk.clicks):
        raise FunctionalError(
            "apd_functional covers collision-free patterns only; "
            "use expansion_functional or snspd_functional (tau_r=0) for collisions"
        )
    if not 0.0 < eta1 <= 1.0:
        raise ValueError("eta1 must lie in (0, 1]")
    N = rk.N
    if N == 0:
        return 1.0
    A_S = rk.A_S

    def evaluate(idx, k):
        if k == 0:
            return np.full(len(idx), (-1.0) ** N)
        sub = select_pairs(A_S, idx)
        eye = np.eye(2 * k)
        inner = eta1 * np.linalg.inv(eye - sub) + (1.0 - eta1) * eye
        D = _swap_blocks(2.0 * eye - np.linalg.inv(inner))
        root = _sqrt_det(eye - (1.0 - eta1) * sub, "apd_functional", idx)
        return (-1.0) ** (N - k) * hafnian_batch(D) / root

    total, _ = subset_lattice_sum(N, evaluate, threads=threads)
    return float(_real(total, "apd_functional"))


def _transformed(A: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``A (I - D_a A)^{-1}`` and ``sqrt|I - D_a A|`` for a batch of ``a``."""
    L = A.shape[-1] // 2
    Da = np.concatenate([a, a], axis=1)
    S = np.eye(2 * L) - Da[:, :, None] * A[None]
    root = _sqrt_det(S, "gaussian_expectation")
    # A' = A S^{-1}  <=>  S^T A'^T = A^T
    At = np.broadcast_to(A.T, S.shape)
    Ap = np.swapaxes(np.linalg.solve(np.swapaxes(S, -1, -2), At), -1, -2)
    return Ap, root


def gaussian_expectation_batch(A: np.ndarray, m: Sequence[int], a: np.ndarray) -> np.ndarray:
    r"""``prod_i (d^2_i)^{m_i} exp(a_i d^2_i) exp(xi^dag A xi / 2)`` at zero,
    for a batch of ``a`` vectors (shape ``(batch, L)``).

    Evaluated as ``Haf(X [A (I - D_a A)^{-1}]_m) / sqrt|I - D_a A|`` which
    never divides by ``1 - a_i``.
    """
    A = np.asarray(A, dtype=complex)
    L = A.shape[-1] // 2
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[-1] != L:
        raise ValueError("a has the wrong length")
    Ap, root = _transformed(A, a)
    m = np.asarray(m, dtype=int)
    if not m.any():
        return 1.0 / root
    return hafnian_batch(_swap_blocks(_repeat_matrix(Ap, m))) / root


def gaussian_expectation(W: np.ndarray, m: Sequence[int], a: Sequence[float]) -> complex:
    """Single evaluation; ``W = I - A`` as in the usual statement."""
    W = np.asarray(W, dtype=complex)
    A = np.eye(W.shape[0]) - W
    return complex(gaussian_expectation_batch(A, m, np.asarray(a, dtype=float)[None])[0])


def expansion_functional(rk: ReducedKernel, detector) -> float:
    """Any detector whose POVM is a finite sum of ``coef :n^l e^{-b n}:``.

    Each product of per-output terms is one Gaussian expectation with
    ``m_i = l_i`` and ``a_i = 1 - b_i``.
    """
    N = rk.N
    if N == 0:
        return 1.0
    per_mode = [detector.expansion(c) for c in rk.clicks]
    if any(len(t) == 0 for t in per_mode):
        return 0.0
    # distinct decay rates per output; A' and the determinant depend only on these
    rates = [sorted({t[2] for t in terms}) for terms in per_mode]
    a_all = np.array(list(itertools.product(*[[1.0 - b for b in r] for r in rates])))
    a_all = a_all.reshape(-1, N)
    Ap, root = _transformed(rk.A_S, a_all)
    strides = np.cumprod([1] + [len(r) for r in rates[:0:-1]])[::-1]
    groups: dict = {}
    for combo in itertools.product(*per_mode):
        coef = math.prod(t[0] for t in combo)
        if coef == 0:
            continue
        m = tuple(t[1] for t in combo)
        pos = sum(int(s) * rates[i].index(t[2]) for i, (s, t) in enumerate(zip(strides, combo)))
        groups.setdefault(m, ([], []))
        groups[m][0].append(coef)
        groups[m][1].append(pos)
    # one hafnian call per matrix size
    by_size: dict = {}
    for m in sorted(groups):
        coefs, pos = groups[m]
        pos = np.array(pos)
        mats = _swap_blocks(_repeat_matrix(Ap[pos], m))
        entry = by_size.setdefault(sum(m), ([], [], []))
        entry[0].append(mats)
        entry[1].append(np.asarray(coefs, dtype=float))
        entry[2].append(root[pos])
    total = 0.0
    for size in sorted(by_size):
        mats, coefs, roots = (np.concatenate(v) for v in by_size[size])
        H = hafnian_batch(mats) if size else np.ones(len(coefs))
        total += np.dot(coefs, H / roots)
    return float(_real(total, "expansion_functional"))


def apd_double_expansion(rk: ReducedKernel, eta1: float) -> float:
    """Collision-free APD functional by expanding ``(1 + eta1 d^2)`` directly;
    a cross-check for :func:`apd_functional` (``3^N`` terms)."""
    N = rk.N
    if any(c > 1 for c in rk.clicks):
        raise FunctionalError("collision-free patterns only")
    total = 0.0
    for Z in itertools.product((0, 1), repeat=N):
        Zi = [i for i in range(N) if Z[i]]
        sign = (-1.0) ** (N - len(Zi))
        if not Zi:
            total += sign
            continue
        sub = select_pairs(rk.A_S, np.array([Zi]))[0]
        for Y in itertools.product((0, 1), repeat=len(Zi)):
            a = np.full(len(Zi), 1.0 - eta1)
            total += sign * eta1 ** sum(Y) * gaussian_expectation_batch(sub, Y, a[None])[0]
    return float(_real(total, "apd_double_expansion"))


def _snspd_value(rk: ReducedKernel, detector, order: int, nodes: int) -> float:
    measures = [detector.measure(c, order=order, nodes=nodes) for c in rk.clicks]
    if any(m.total == 0 for m in measures):
        return 0.0
    grids = np.meshgrid(*[m.nodes for m in measures], indexing="ij")
    wgrids = np.meshgrid(*[m.weights for m in measures], indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    total = 0.0
    step = 4096
    for s in range(0, len(w), step):
        vals = gaussian_expectation_batch(rk.A_S, rk.clicks, 1.0 - x[s : s + step])
        total += np.dot(w[s : s + step], vals)
    return float(_real(total, "snspd_functional"))


def snspd_functional(
    rk: ReducedKernel,
    detector,
    order: int | None = None,
    nodes: int | None = None,
    max_clicks: int = SNSPD_MAX_CLICKS,
) -> tuple[float, float]:
    """Pulse counting with dead time and recovery; returns ``(value, error)``.

    The time integrals over each ordered simplex are carried by the measure of
    ``Xi_c`` (see :meth:`SNSPD.measure`); the error is the change between the
    rule and its step-doubled refinement.
    """
    if rk.total_clicks > max_clicks:
        raise FunctionalError(
            f"{rk.total_clicks} clicks exceed the SNSPD limit of {max_clicks}"
        )
    if rk.N == 0:
        return 1.0, 0.0
    top = detector.max_outcome
    if top is not None and max(rk.clicks) > top:
        return 0.0, 0.0
    order = order or detector.order
    nodes = nodes or detector.gauss_nodes
    coarse = _snspd_value(rk, detector, order, nodes)
    fine = _snspd_value(rk, detector, 2 * order, nodes + nodes // 2)
    return fine, abs(fine - coarse)
