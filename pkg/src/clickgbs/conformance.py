"""Fast oracle and identity checks that freeze the numerical conventions.

Each check compares a library value with an independent reference; the suite
is what ``clickgbs conformance`` runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import functionals as fn
from .detectors import APD, PNR, SNSPD, Click
from .gaussian import (
    assemble_and_propagate,
    haar_random_unitary,
    kernel,
    make_thermal,
    make_thermalized_squeezed,
    mean_photons_after_loss,
    solve_squeezing,
    vacuum,
)
from .probability import brute_force_probability, ideal_distribution, pattern_probability

__all__ = ["Check", "run_conformance", "random_state"]


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    reference: float
    tol: float
    relative: bool = False

    @property
    def error(self) -> float:
        err = abs(self.value - self.reference)
        if self.relative:
            err /= max(abs(self.reference), 1e-300)
        return err

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tol)


def random_state(M: int, seed: int, n_inputs: int | None = None):
    """Random mixture of squeezed and thermal inputs behind a Haar unitary."""
    rng = np.random.default_rng(seed)
    n_inputs = M if n_inputs is None else n_inputs
    inputs = []
    for _ in range(n_inputs):
        if rng.random() < 0.7:
            inputs.append(make_thermalized_squeezed(rng.uniform(0.1, 0.6), rng.uniform(0, 0.3)))
        else:
            inputs.append(make_thermal(rng.uniform(0.05, 0.5)))
    U = haar_random_unitary(M, seed=int(rng.integers(2**31)))
    return assemble_and_propagate(inputs, U, rng.uniform(0.5, 1.0))


def _gaussian_checks():
    yield Check("gaussian", "solve_squeezing(20,200,0.8)", solve_squeezing(20, 200, 0.8), 0.3466, 5e-5)
    yield Check("gaussian", "n_ph(r=1,M'=50,eta=0.8)", mean_photons_after_loss(1.0, 50, 0.8), 55.24, 0.01)
    K = kernel(vacuum(2))
    yield Check("gaussian", "vacuum normQ", K.normQ, 1.0, 1e-12)
    n = 0.7
    K = kernel(make_thermal(n))
    yield Check("gaussian", "thermal A_11", K.A[0, 0].real, n / (n + 1), 1e-12)


def _functional_checks():
    n = 0.7
    K = kernel(make_thermal(n))
    yield Check("functionals", "thermal on-off", pattern_probability(K, Click(1), [1]), n / (n + 1), 1e-12)
    r = 0.6
    dist = ideal_distribution(make_thermalized_squeezed(r), 6)
    for k in range(4):
        ref = math.factorial(2 * k) * math.tanh(r) ** (2 * k) / (4**k * math.factorial(k) ** 2 * math.cosh(r))
        yield Check("functionals", f"squeezed P({2 * k})", dist.probs[(2 * k,)], ref, 1e-12)
    for seed in range(5):
        st = random_state(3, seed)
        rk = fn.reduce(kernel(st), [1, 1, 1])
        yield Check("functionals", f"Ken(K=1)=Tor seed {seed}", fn.kensingtonian(rk, 1), fn.torontonian(rk.A_S), 1e-10)
        yield Check("functionals", f"APD(eta1=1)=Haf seed {seed}", fn.apd_functional(rk, 1.0), fn.hafnian_functional(rk), 1e-10)
        rk2 = fn.reduce(kernel(st), [2, 1, 0])
        yield Check(
            "functionals",
            f"Ken full vs Tor form seed {seed}",
            fn.kensingtonian(rk2, 3),
            fn.kensingtonian_tor_form(rk2, 3),
            1e-10,
        )


def _oracle_checks():
    dets = [PNR(), Click(1), Click(2), Click(3), APD(0.05), SNSPD(0.05, 0.2)]
    patterns = [(1, 0), (1, 1), (2, 0), (2, 1), (0, 2)]
    for seed, det in enumerate(dets):
        st = random_state(2, 100 + seed)
        for p in patterns:
            ref = brute_force_probability(st, det, p)
            val = pattern_probability(st, det, p)
            tol = max(1e-6 * abs(ref), 1e-10)
            yield Check("oracle", f"{det} {p}", val, ref, tol)


def _detector_checks():
    yield Check("detectors", "Click K=2 P(1|2)", Click(2).fock_response(2, 2).matrix[1, 2], 0.5, 1e-12)
    yield Check("detectors", "APD 0.05 P(2|2)", APD(0.05).fock_response(2, 2).matrix[2, 2], 0.9025, 1e-12)
    m = np.arange(60)
    for det in (Click(2), APD(0.05), SNSPD(0.05, 0.2)):
        R = det.fock_response(2, 59).matrix
        for mu in (0.5, 2.0):
            pois = np.exp(-mu + m * np.log(mu) - np.array([math.lgamma(v + 1) for v in m]))
            for q in (1, 2):
                yield Check("detectors", f"{det} symbol q={q} mu={mu}", float(np.real(det.symbol(q, mu))), float(R[q] @ pois), 1e-8)


def run_conformance():
    """All checks, in a fixed order."""
    out = []
    for gen in (_gaussian_checks, _detector_checks, _functional_checks, _oracle_checks):
        out.extend(gen())
    return out
