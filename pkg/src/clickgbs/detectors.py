"""Single-mode detection POVMs.

Every detector is lossless (loss lives in the state) and has no dark counts,
so ``P(n|m) = 0`` for ``m < n``. Each model exposes

* ``fock_response(n_max, m_max)`` - the matrix ``P(n|m)``;
* ``symbol(q, mu)`` - the normal-ordered symbol of ``Pi_q`` at ``mu``
  (``mu = |alpha|^2`` for coherent states, ``mu = alpha * beta`` for
  positive-P samples);
* ``expansion(q)`` (all but SNSPD) - ``Pi_q`` written as
  ``sum coef * :n^l exp(-b n):``, which drives the functionals.

Times for the pulse-counting detectors are measured in units of the window
length ``tau_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, ClassVar

import numpy as np
from scipy.special import comb
from scipy.stats import qmc

__all__ = [
    "DetectorModel",
    "PNR",
    "OnOff",
    "Click",
    "APD",
    "SNSPD",
    "FockResponse",
    "Term",
    "ClickMeasure",
    "fock_response",
    "symbol",
    "detector_from_spec",
]

# coef * mu**power * exp(-rate * mu)
Term = tuple


@dataclass(frozen=True)
class FockResponse:
    """``matrix[n, m] = P(n clicks | m photons)``."""

    matrix: np.ndarray

    def column_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)


def _falling(m: np.ndarray, l: int) -> np.ndarray:
    """``m! / (m - l)!`` with zero for ``m < l``."""
    m = np.asarray(m, dtype=float)
    out = np.ones_like(m)
    for j in range(l):
        out = out * np.clip(m - j, 0.0, None)
    return out


def _fock_from_terms(terms, m: np.ndarray) -> np.ndarray:
    """``<m| sum coef :n^l e^{-b n}: |m> = sum coef m!/(m-l)! (1-b)^(m-l)``."""
    out = np.zeros(m.shape)
    for coef, l, b in terms:
        base = 1.0 - b
        with np.errstate(invalid="ignore"):
            powv = np.where(m >= l, np.power(base, np.clip(m - l, 0, None).astype(float)), 0.0)
        out += coef * _falling(m, l) * powv
    return out


def _symbol_from_terms(terms, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=complex)
    out = np.zeros(mu.shape, dtype=complex)
    for coef, l, b in terms:
        out += coef * mu**l * np.exp(-b * mu)
    return out


class DetectorModel:
    """Common interface; concrete variants below."""

    kind: ClassVar[str] = ""

    @property
    def max_outcome(self) -> int | None:
        """Largest possible number of clicks, ``None`` when unbounded."""
        return None

    def expansion(self, q: int) -> list:
        raise NotImplementedError

    def fock_response(self, n_max: int, m_max: int) -> FockResponse:
        m = np.arange(m_max + 1)
        rows = [_fock_from_terms(self.expansion(n), m) for n in range(n_max + 1)]
        return FockResponse(np.clip(np.array(rows), 0.0, 1.0))

    def symbol(self, q: int, mu):
        return _symbol_from_terms(self.expansion(q), mu)

    def symbols012(self, mu: np.ndarray) -> np.ndarray:
        """Symbols of ``Pi_0, Pi_1, Pi_2`` stacked on a new last axis."""
        return np.stack([self.symbol(q, mu) for q in range(3)], axis=-1)

    def to_spec(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PNR(DetectorModel):
    kind: ClassVar[str] = "pnr"

    def expansion(self, q: int) -> list:
        return [(1.0 / math.factorial(q), q, 1.0)]

    def fock_response(self, n_max: int, m_max: int) -> FockResponse:
        return FockResponse(np.eye(n_max + 1, m_max + 1))

    def symbol(self, q: int, mu):
        mu = np.asarray(mu, dtype=complex)
        return mu**q * np.exp(-mu) / math.factorial(q)

    def to_spec(self) -> dict:
        return {"kind": "pnr"}


@dataclass(frozen=True)
class Click(DetectorModel):
    """``K`` on-off detectors behind a uniform ``K``-way split."""

    K: int = 1
    kind: ClassVar[str] = "click"

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")

    @property
    def max_outcome(self) -> int:
        return self.K

    def expansion(self, q: int) -> list:
        K = self.K
        if q > K:
            return []
        c = comb(K, q, exact=True)
        return [
            (float(c * comb(q, j, exact=True) * (-1) ** j), 0, (K - q + j) / K)
            for j in range(q + 1)
        ]

    def fock_response(self, n_max: int, m_max: int) -> FockResponse:
        K = self.K
        m = np.arange(m_max + 1, dtype=float)
        P = np.zeros((n_max + 1, m_max + 1))
        for n in range(min(n_max, K) + 1):
            acc = np.zeros_like(m)
            for j in range(n + 1):
                acc += (-1) ** j * comb(n, j, exact=True) * ((n - j) / K) ** m
            P[n] = comb(K, n, exact=True) * acc
            P[n, :n] = 0.0
        return FockResponse(np.clip(P, 0.0, 1.0))

    def symbol(self, q: int, mu):
        mu = np.asarray(mu, dtype=complex)
        K = self.K
        if q > K:
            return np.zeros(mu.shape, dtype=complex)
        return comb(K, q, exact=True) * (-np.expm1(-mu / K)) ** q * np.exp(-mu * (K - q) / K)

    def to_spec(self) -> dict:
        return {"kind": "click", "K": self.K}


def OnOff() -> Click:
    """Threshold detector: a click array with a single element."""
    return Click(1)


@dataclass(frozen=True)
class APD(DetectorModel):
    """Pulse counting in a rectangular window with a hard dead time.

    Outcomes run ``0..K+1`` with ``K = floor(tau_m / tau_d)``; the last one is
    the overflow element ``1 - sum_l F_l(eta_K)``.
    """

    tau_d: float = 0.05
    kind: ClassVar[str] = "apd"

    def __post_init__(self):
        if not 0.0 <= self.tau_d < 1.0:
            raise ValueError("tau_d / tau_m must lie in [0, 1)")

    @property
    def K(self) -> int | None:
        if self.tau_d == 0:
            return None
        return int(math.floor(1.0 / self.tau_d + 1e-12))

    @property
    def max_outcome(self) -> int | None:
        K = self.K
        return None if K is None else K + 1

    def adjustment_efficiency(self, k: int) -> float:
        """``eta_k = (tau_m - k tau_d) / tau_m``, clamped at zero."""
        return max(0.0, 1.0 - k * self.tau_d)

    def expansion(self, q: int) -> list:
        def F(l, eta):
            return (eta**l / math.factorial(l), l, eta)

        K = self.K
        if q == 0:
            return [F(0, 1.0)]
        if K is not None and q > K + 1:
            return []
        if K is not None and q == K + 1:
            etaK = self.adjustment_efficiency(K)
            return [(1.0, 0, 0.0)] + [(-c, l, b) for c, l, b in (F(l, etaK) for l in range(K + 1))]
        ek = self.adjustment_efficiency(q)
        ek1 = self.adjustment_efficiency(q - 1)
        return [F(l, ek) for l in range(q + 1)] + [
            (-c, l, b) for c, l, b in (F(l, ek1) for l in range(q))
        ]

    def fock_response(self, n_max: int, m_max: int) -> FockResponse:
        from scipy.stats import binom

        m = np.arange(m_max + 1)
        K = self.K

        def cdf(k, eta):
            # sum_{l<=k} C(m,l) eta^l (1-eta)^(m-l)
            return binom.cdf(k, m, eta)

        P = np.zeros((n_max + 1, m_max + 1))
        P[0] = (m == 0).astype(float)
        for k in range(1, n_max + 1):
            if K is not None and k > K + 1:
                break
            if K is not None and k == K + 1:
                P[k] = 1.0 - cdf(K, self.adjustment_efficiency(K))
            else:
                P[k] = cdf(k, self.adjustment_efficiency(k)) - cdf(
                    k - 1, self.adjustment_efficiency(k - 1)
                )
        return FockResponse(np.clip(P, 0.0, 1.0))

    def to_spec(self) -> dict:
        return {"kind": "apd", "tau_d": self.tau_d}


# --------------------------------------------------------------------------
# SNSPD timing machinery
# --------------------------------------------------------------------------


def _gauss_legendre(order: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


@dataclass(frozen=True)
class ClickMeasure:
    """Distribution of ``Xi_c(t)`` under the weight ``I_c(t) dt`` on ``T_c``.

    The functionals and symbols depend on the click times only through
    ``Xi``, so a one-dimensional rule ``(nodes, weights)`` on ``[0, 1]``
    carries everything. ``total`` is the mass of the measure.
    """

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def integrate(self, f) -> np.ndarray:
        return np.tensordot(f(self.nodes), self.weights, axes=([-1], [0]))


def _stieltjes_gauss(x: np.ndarray, w: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n``-point Gauss rule for the discrete measure ``sum w_j delta(x_j)``."""
    total = w.sum()
    if total <= 0:
        return np.array([0.5]), np.array([0.0])
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    alphas, betas = [], []
    norm_prev = None
    norm0 = None
    for k in range(n):
        norm = np.sum(w * p * p)
        if norm0 is None:
            norm0 = norm
        elif norm <= 1e-26 * norm0:
            break
        a = np.sum(w * x * p * p) / norm
        b = 0.0 if norm_prev is None else norm / norm_prev
        alphas.append(a)
        if norm_prev is not None:
            betas.append(b)
        p_new = (x - a) * p - b * p_prev
        p_prev, p = p, p_new
        norm_prev = norm
        # rescale to dodge under/overflow; ratios are unaffected
        scale = np.sqrt(np.sum(w * p * p)) or 1.0
        p = p / scale
        p_prev = p_prev / scale
        norm_prev = norm_prev / scale**2
    J = np.diag(alphas) + np.diag(np.sqrt(betas), 1) + np.diag(np.sqrt(betas), -1)
    nodes, vecs = np.linalg.eigh(J)
    weights = total * vecs[0] ** 2
    return nodes, weights


def _duffy(order: int, dim: int):
    """Tensor Gauss rule on the standard simplex with ``dim + 1`` barycentric
    parts, via collapsed coordinates. Returns ``(lam, weights)``."""
    if dim == 0:
        return np.ones((1, 1)), np.ones(1)
    x, w = _gauss_legendre(order, 0.0, 1.0)
    v = np.stack([g.ravel() for g in np.meshgrid(*([x] * dim), indexing="ij")], axis=1)
    wt = np.prod(
        np.stack([g.ravel() for g in np.meshgrid(*([w] * dim), indexing="ij")], axis=1), axis=1
    )
    lam = np.zeros((v.shape[0], dim + 1))
    rest = np.ones(v.shape[0])
    for k in range(dim):
        lam[:, k] = rest * v[:, k]
        rest = rest * (1 - v[:, k])
    lam[:, dim] = rest
    for k in range(dim - 1):
        wt = wt * (1 - v[:, k]) ** (dim - 1 - k)
    return lam, wt


@dataclass(frozen=True)
class SNSPD(DetectorModel):
    """Pulse counting with dead time ``tau_d`` and exponential recovery
    ``1 - exp(-t / tau_r)``; ``tau_r = 0`` is the hard dead-time (APD) limit.

    ``envelope`` is ``"rectangular"`` or a callable normalised on ``[0, 1]``.
    """

    tau_d: float = 0.05
    tau_r: float = 0.2
    envelope: str | Callable = "rectangular"
    order: int = 24
    gauss_nodes: int = 18
    kind: ClassVar[str] = "snspd"

    def __post_init__(self):
        if not 0.0 <= self.tau_d < 1.0:
            raise ValueError("tau_d / tau_m must lie in [0, 1)")
        if self.tau_r < 0:
            raise ValueError("tau_r / tau_m must be non-negative")
        if not (self.envelope == "rectangular" or callable(self.envelope)):
            raise ValueError("envelope must be 'rectangular' or a callable")
        if callable(self.envelope):
            x, w = _gauss_legendre(200, 0.0, 1.0)
            norm = float(np.dot(w, self.envelope(x)))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"envelope integrates to {norm:.6g}, not 1")

    @property
    def max_outcome(self) -> int | None:
        if self.tau_d == 0:
            return None
        return int(math.floor(1.0 / self.tau_d + 1e-12)) + 1

    # --- time-dependent efficiency -------------------------------------
    def xi(self, s):
        """Recovery efficiency a delay ``s`` after the previous pulse."""
        s = np.asarray(s, dtype=float)
        u = s - self.tau_d
        if self.tau_r == 0:
            return np.where(u > 0, 1.0, 0.0)
        return np.where(u > 0, -np.expm1(-np.clip(u, 0, None) / self.tau_r), 0.0)

    def _xi_integral(self, L):
        """``int_0^L xi(s) ds`` (rectangular envelope)."""
        u = np.clip(np.asarray(L, dtype=float) - self.tau_d, 0.0, None)
        if self.tau_r == 0:
            return u
        return u + self.tau_r * np.expm1(-u / self.tau_r)

    def _env(self, t):
        if self.envelope == "rectangular":
            return np.ones_like(np.asarray(t, dtype=float))
        return np.asarray(self.envelope(np.asarray(t, dtype=float)), dtype=float)

    def _env_xi_integral(self, a, b, shift):
        """``int_a^b I(t) xi(t - shift) dt`` for arrays of equal shape."""
        a, b, shift = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, shift)))
        if self.envelope == "rectangular":
            return self._xi_integral(b - shift) - self._xi_integral(a - shift)
        lo = np.maximum(a, shift + self.tau_d)
        hi = np.maximum(b, lo)
        x, w = np.polynomial.legendre.leggauss(64)
        tt = 0.5 * (hi - lo)[..., None] * x + 0.5 * (hi + lo)[..., None]
        vals = self._env(tt) * self.xi(tt - shift[..., None])
        return 0.5 * (hi - lo) * (vals * w).sum(axis=-1)

    def _env_integral(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        if self.envelope == "rectangular":
            return b - a
        x, w = np.polynomial.legendre.leggauss(64)
        tt = 0.5 * (b - a)[..., None] * x + 0.5 * (b + a)[..., None]
        return 0.5 * (b - a) * (self._env(tt) * w).sum(axis=-1)

    def Xi(self, t) -> np.ndarray:
        """Integrated detection efficiency for ordered click times ``t[..., n]``."""
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            t = t[None]
        n = t.shape[-1]
        if n == 0:
            return self._env_integral(0.0, 1.0)
        if np.any(np.diff(t, axis=-1) < 0):
            raise ValueError("click times must be ordered")
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("click times must lie inside the window")
        out = self._env_integral(np.zeros(t.shape[:-1]), t[..., 0])
        for i in range(n - 1):
            out = out + self._env_xi_integral(t[..., i], t[..., i + 1], t[..., i])
        out = out + self._env_xi_integral(t[..., -1], np.ones(t.shape[:-1]), t[..., -1])
        return out

    def I_n(self, t) -> np.ndarray:
        """``I(t_1) prod_i I(t_i) xi(t_i - t_{i-1})``."""
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            t = t[None]
        if np.any(np.diff(t, axis=-1) < 0):
            raise ValueError("click times must be ordered")
        out = np.prod(self._env(t), axis=-1)
        if t.shape[-1] > 1:
            out = out * np.prod(self.xi(np.diff(t, axis=-1)), axis=-1)
        return out

    def adjustment_efficiency(self, k: int) -> float:
        return max(0.0, 1.0 - k * self.tau_d)

    # --- click-time measures ----------------------------------------------
    def fine_measure(self, c: int, order: int | None = None) -> ClickMeasure:
        """Quadrature of ``I_c(t) dt`` over ``T_c`` pushed onto ``Xi_c``."""
        return _fine_measure(self, c, order or self.order)

    def measure(self, c: int, order: int | None = None, nodes: int | None = None) -> ClickMeasure:
        """Compressed Gauss rule in ``Xi`` space (exact for polynomials of
        degree ``2 * nodes - 1`` against the fine rule)."""
        return _compressed_measure(self, c, order or self.order, nodes or self.gauss_nodes)

    # --- POVM representations ---------------------------------------------
    def fock_response(self, n_max: int, m_max: int) -> FockResponse:
        m = np.arange(m_max + 1)
        P = np.zeros((n_max + 1, m_max + 1))
        P[0] = (m == 0).astype(float)
        top = self.max_outcome
        for n in range(1, min(n_max, m_max) + 1):
            if top is not None and n > top:
                break
            meas = self.fine_measure(n, order=max(self.order, 32))
            base = 1.0 - meas.nodes
            k = np.clip(m - n, 0, None)
            pw = np.where(m[:, None] >= n, base[None, :] ** k[:, None], 0.0)
            P[n] = _falling(m, n) * (pw @ meas.weights)
        return FockResponse(np.clip(P, 0.0, 1.0))

    def expansion(self, q: int) -> list:
        raise NotImplementedError("SNSPD symbols are integrals, not finite expansions")

    def symbol(self, q: int, mu):
        mu = np.asarray(mu, dtype=complex)
        if q == 0:
            return np.exp(-mu * self._env_integral(0.0, 1.0))
        top = self.max_outcome
        if top is not None and q > top:
            return np.zeros(mu.shape, dtype=complex)
        meas = self.measure(q)
        return mu**q * meas.integrate(lambda x: np.exp(-mu[..., None] * x))

    def symbol_direct(self, q: int, mu):
        """Same as :meth:`symbol` but integrating on the fine rule."""
        mu = np.asarray(mu, dtype=complex)
        if q == 0:
            return np.exp(-mu)
        meas = self.fine_measure(q)
        return mu**q * meas.integrate(lambda x: np.exp(-mu[..., None] * x))

    def to_spec(self) -> dict:
        if callable(self.envelope):
            raise ValueError("custom envelopes cannot be serialised")
        return {"kind": "snspd", "tau_d": self.tau_d, "tau_r": self.tau_r}


@lru_cache(maxsize=256)
def _fine_measure(det: SNSPD, c: int, order: int) -> ClickMeasure:
    if c == 0:
        return ClickMeasure(np.ones(1), np.ones(1))
    R = 1.0 - (c - 1) * det.tau_d
    if R <= 0:
        return ClickMeasure(np.array([0.5]), np.array([0.0]))
    # y = (t_1, h_2..h_c) with gaps t_i - t_{i-1} = tau_d + h_i; u = sum(y)
    cuts = [0.0, R]
    kink = R - det.tau_d
    if 0.0 < kink < R:
        cuts = [0.0, kink, R]
    # keep the tensor rule below ~2e5 nodes for many-click measures
    order = min(order, int((1e5) ** (1.0 / c)))
    if order >= 4:
        lam, wl = _duffy(order, c - 1)
        parts = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            u, wu = _gauss_legendre(order, lo, hi)
            y = u[:, None, None] * lam[None, :, :]
            w = (wu * u ** (c - 1))[:, None] * wl[None, :]
            parts.append((y.reshape(-1, c), w.ravel()))
    else:
        # quasi-Monte Carlo on the simplex: spacings of sorted Sobol points
        u = np.sort(qmc.Sobol(c, scramble=True, seed=c).random_base2(16), axis=1)
        y = R * np.diff(u, axis=1, prepend=0.0)
        parts = [(y, np.full(len(y), R**c / math.factorial(c) / len(y)))]
    nodes, weights = [], []
    for y, w in parts:
        t = np.cumsum(y + np.r_[0.0, np.full(c - 1, det.tau_d)], axis=1)
        t = np.clip(t, 0.0, 1.0)
        t = np.maximum.accumulate(t, axis=1)
        w = w * det.I_n(t)
        nodes.append(det.Xi(t))
        weights.append(w)
    x = np.clip(np.concatenate(nodes), 0.0, 1.0)
    w = np.concatenate(weights)
    keep = w > 0
    return ClickMeasure(x[keep] if keep.any() else np.array([0.5]), w[keep] if keep.any() else np.array([0.0]))


@lru_cache(maxsize=256)
def _compressed_measure(det: SNSPD, c: int, order: int, n: int) -> ClickMeasure:
    fine = _fine_measure(det, c, order)
    if fine.total == 0:
        return fine
    nodes, weights = _stieltjes_gauss(fine.nodes, fine.weights, n)
    return ClickMeasure(np.clip(nodes, 0.0, 1.0), weights)


def fock_response(det: DetectorModel, n_max: int, m_max: int) -> FockResponse:
    if n_max < 0 or m_max < 0:
        raise ValueError("truncations must be non-negative")
    return det.fock_response(n_max, m_max)


def symbol(det: DetectorModel, q: int, mu):
    if q > 2:
        raise ValueError("the phase-space pipeline only uses outcomes q <= 2")
    return det.symbol(q, mu)


def detector_from_spec(spec: dict) -> DetectorModel:
    kind = spec.get("kind")
    if kind == "pnr":
        return PNR()
    if kind in ("onoff", "on-off"):
        return Click(1)
    if kind == "click":
        return Click(int(spec["K"]))
    if kind == "apd":
        return APD(float(spec["tau_d"]))
    if kind == "snspd":
        return SNSPD(float(spec["tau_d"]), float(spec["tau_r"]))
    raise ValueError(f"unknown detector kind {kind!r}")
