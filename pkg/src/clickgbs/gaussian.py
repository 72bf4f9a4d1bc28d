"""Zero-mean Gaussian states, passive interferometers, uniform loss and the
kernel matrix ``A = I - sigma_Q^{-1}`` consumed by the photocount functionals.

Conventions
-----------
* Quadratures ``x = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(i sqrt(2))``;
  vacuum variance 1/2.
* Canonical ordering ``(x_1..x_M, p_1..p_M)``.
* Complex-amplitude ordering ``xi = (alpha_1..alpha_M, alpha_1*..alpha_M*)``,
  reached by the unitary ``T = [[I, iI], [I, -iI]] / sqrt(2)``.
* A unitary ``U`` acts on annihilation operators, ``a -> U a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "GaussianState",
    "KernelMatrix",
    "Interferometer",
    "vacuum",
    "make_thermalized_squeezed",
    "make_thermal",
    "make_squashed",
    "assemble_and_propagate",
    "apply_loss",
    "haar_random_unitary",
    "kernel",
    "solve_squeezing",
    "mean_photons_after_loss",
    "symplectic_eigenvalues",
    "to_complex_basis",
    "from_complex_basis",
    "photon_number_moments",
]

_SYM_TOL = 1e-12
_SYMPLECTIC_TOL = 1e-9


def _omega(M: int) -> np.ndarray:
    eye = np.eye(M)
    zero = np.zeros((M, M))
    return np.block([[zero, eye], [-eye, zero]])


def _t_matrix(M: int) -> np.ndarray:
    eye = np.eye(M)
    return np.block([[eye, 1j * eye], [eye, -1j * eye]]) / np.sqrt(2.0)


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a real covariance, sorted ascending."""
    M = cov.shape[0] // 2
    ev = np.linalg.eigvals(1j * _omega(M) @ cov)
    return np.sort(np.abs(ev.real))[::2]


@dataclass(frozen=True)
class GaussianState:
    """Zero-mean M-mode Gaussian state held by its Wigner covariance.

    ``cov`` is always stored in the canonical quadrature ordering.
    """

    cov: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ValueError(f"covariance must be 2M x 2M, got shape {cov.shape}")
        if self.validate:
            if np.max(np.abs(cov - cov.T), initial=0.0) > _SYM_TOL:
                raise ValueError("covariance is not symmetric")
            nu = symplectic_eigenvalues(cov)
            if nu.size and nu.min() < 0.5 - _SYMPLECTIC_TOL:
                raise ValueError(
                    f"unphysical covariance: smallest symplectic eigenvalue {nu.min():.3g} < 1/2"
                )
        cov = 0.5 * (cov + cov.T)
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)

    @property
    def M(self) -> int:
        return self.cov.shape[0] // 2

    def mean_photons(self) -> np.ndarray:
        """Per-mode mean photon numbers."""
        M = self.M
        d = np.diag(self.cov)
        return (d[:M] + d[M:] - 1.0) / 2.0

    def total_mean_photons(self) -> float:
        return float(self.mean_photons().sum())

    def is_classical(self, tol: float = 1e-12) -> bool:
        """True when ``sigma - I/2`` is positive semidefinite (non-negative P)."""
        w = np.linalg.eigvalsh(self.cov - 0.5 * np.eye(2 * self.M))
        return bool(w.min() >= -tol)

    def complex_cov(self) -> np.ndarray:
        return to_complex_basis(self.cov)


@dataclass(frozen=True)
class KernelMatrix:
    """``A = I - sigma_Q^{-1}`` in complex-amplitude ordering and ``sqrt|sigma_Q|``."""

    A: np.ndarray
    normQ: float

    @property
    def M(self) -> int:
        return self.A.shape[0] // 2


@dataclass(frozen=True)
class Interferometer:
    U: np.ndarray

    def __post_init__(self):
        U = np.array(self.U, dtype=complex)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise ValueError("interferometer matrix must be square")
        if np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) > 1e-10:
            raise ValueError("interferometer matrix is not unitary")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @property
    def M(self) -> int:
        return self.U.shape[0]

    def symplectic(self) -> np.ndarray:
        """Real symplectic matrix acting on ``(x, p)`` for ``a -> U a``."""
        Re, Im = self.U.real, self.U.imag
        return np.block([[Re, -Im], [Im, Re]])


def to_complex_basis(cov: np.ndarray) -> np.ndarray:
    T = _t_matrix(cov.shape[0] // 2)
    return T @ cov @ T.conj().T


def from_complex_basis(cov_c: np.ndarray) -> np.ndarray:
    T = _t_matrix(cov_c.shape[0] // 2)
    out = T.conj().T @ cov_c @ T
    if np.max(np.abs(out.imag)) > 1e-10:
        raise ValueError("complex covariance does not map to a real quadrature covariance")
    return out.real


def vacuum(M: int = 1) -> GaussianState:
    return GaussianState(0.5 * np.eye(2 * M))


def _single_mode(cov2: np.ndarray) -> GaussianState:
    return GaussianState(np.asarray(cov2, dtype=float))


def make_thermalized_squeezed(r: float, epsilon: float = 0.0) -> GaussianState:
    """Single-mode squeezed vacuum with thermalization factor ``epsilon``.

    Diagonal ``cosh(2r)/2``, off-diagonal ``(1 - epsilon) sinh(2r)/2``. The mean
    photon number is ``sinh(r)**2`` whatever ``epsilon``.
    """
    if r < 0:
        raise ValueError("squeezing parameter must be non-negative")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    c = np.cosh(2 * r)
    s = (1.0 - epsilon) * np.sinh(2 * r)
    return _single_mode(0.5 * np.array([[c, s], [s, c]]))


def make_thermal(n_th: float) -> GaussianState:
    if n_th < 0:
        raise ValueError("thermal photon number must be non-negative")
    return _single_mode(0.5 * (1 + 2 * n_th) * np.eye(2))


def make_squashed(n_th: float) -> GaussianState:
    """Classical state with excess noise ``n_th`` along ``(x + p)/sqrt(2)`` only."""
    if n_th < 0:
        raise ValueError("thermal photon number must be non-negative")
    d = 1 + 2 * n_th
    return _single_mode(0.5 * np.array([[d, 2 * n_th], [2 * n_th, d]]))


def apply_loss(state: GaussianState, eta: float) -> GaussianState:
    """Uniform pure loss ``sigma -> eta sigma + (1 - eta) I/2``."""
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    n = state.cov.shape[0]
    return GaussianState(eta * state.cov + (1 - eta) * 0.5 * np.eye(n), validate=False)


def _direct_sum(states: Sequence[GaussianState]) -> np.ndarray:
    Ms = [s.M for s in states]
    M = sum(Ms)
    cov = np.zeros((2 * M, 2 * M))
    off = 0
    for s in states:
        m = s.M
        idx = np.r_[off : off + m, M + off : M + off + m]
        cov[np.ix_(idx, idx)] = s.cov
        off += m
    return cov


def assemble_and_propagate(
    inputs: Sequence[GaussianState],
    U: Interferometer | np.ndarray,
    eta: float = 1.0,
) -> GaussianState:
    """Inject ``inputs`` into the first ports (vacuum elsewhere), apply ``U``
    and uniform loss ``eta``."""
    if not isinstance(U, Interferometer):
        U = Interferometer(U)
    M = U.M
    n_in = sum(s.M for s in inputs)
    if n_in > M:
        raise ValueError(f"{n_in} input modes do not fit a {M}-mode interferometer")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    padded = list(inputs) + [vacuum(1)] * (M - n_in)
    cov = _direct_sum(padded)
    S = U.symplectic()
    cov = S @ cov @ S.T
    cov = eta * cov + (1 - eta) * 0.5 * np.eye(2 * M)
    return GaussianState(0.5 * (cov + cov.T))


def haar_random_unitary(M: int, seed=None) -> Interferometer:
    """Haar unitary from the QR of a complex Ginibre matrix, phases fixed by R."""
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return Interferometer(q)


def kernel(state: GaussianState) -> KernelMatrix:
    M = state.M
    sigma_q = to_complex_basis(state.cov) + 0.5 * np.eye(2 * M)
    det = np.linalg.det(state.cov + 0.5 * np.eye(2 * M))
    if not det > 0:
        raise np.linalg.LinAlgError("sigma_Q is singular")
    A = np.eye(2 * M) - np.linalg.inv(sigma_q)
    A = 0.5 * (A + A.conj().T)
    return KernelMatrix(A=A, normQ=float(np.sqrt(det)))


def solve_squeezing(n_ph: float, M_prime: int, eta: float) -> float:
    """Squeezing giving ``n_ph`` mean photons after loss over ``M_prime`` inputs."""
    if n_ph <= 0:
        return 0.0
    return float(np.arcsinh(np.sqrt(n_ph / (eta * M_prime))))


def mean_photons_after_loss(r: float, M_prime: int, eta: float) -> float:
    return float(eta * M_prime * np.sinh(r) ** 2)


def photon_number_moments(state: GaussianState) -> tuple[float, float]:
    """Mean and variance of the total photon number."""
    M = state.M
    sc = to_complex_basis(state.cov)
    # N_ij = <a_i^dag a_j>, Mm_ij = <a_i a_j>
    N = sc[:M, :M].conj() - 0.5 * np.eye(M)
    Mm = sc[:M, M:]
    mean = float(np.trace(N).real)
    var = float(np.sum(np.abs(N) ** 2) + np.sum(np.abs(Mm) ** 2) + mean)
    return mean, var
