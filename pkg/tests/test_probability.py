import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clickgbs.conformance import random_state
from clickgbs.detectors import APD, PNR, SNSPD, Click, OnOff
from clickgbs.gaussian import (
    assemble_and_propagate,
    haar_random_unitary,
    make_thermal,
    make_thermalized_squeezed,
    vacuum,
)
from clickgbs.probability import (
    UnsupportedRoute,
    brute_force_probability,
    fock_lattice,
    ideal_distribution,
    pattern_probability,
)


def test_vacuum():
    assert pattern_probability(vacuum(3), OnOff(), [0, 0, 0]) == pytest.approx(1.0)
    d = ideal_distribution(vacuum(2), 3)
    assert d.probs[(0, 0)] == pytest.approx(1.0)
    assert sum(d.probs.values()) == pytest.approx(1.0)
    assert max(v for k, v in d.probs.items() if k != (0, 0)) < 1e-30


def test_thermal_on_off():
    n = 0.35
    assert pattern_probability(make_thermal(n), OnOff(), [1]) == pytest.approx(n / (n + 1), abs=1e-14)


def test_squeezed_inputs_give_even_photon_numbers():
    U = haar_random_unitary(2, seed=4)
    s = assemble_and_propagate([make_thermalized_squeezed(0.6)] * 2, U, 1.0)
    for p in ([1, 0], [0, 1], [2, 1], [3, 2], [1, 2]):
        assert pattern_probability(s, PNR(), p) == pytest.approx(0.0, abs=1e-12)
    assert pattern_probability(s, PNR(), [1, 1]) > 1e-3


@pytest.mark.parametrize("r", [0.3, 0.9])
def test_single_squeezed_distribution(r):
    d = ideal_distribution(make_thermalized_squeezed(r), 6)
    for m in range(7):
        if m % 2:
            ref = 0.0
        else:
            k = m // 2
            ref = math.factorial(2 * k) * math.tanh(r) ** (2 * k) / (4**k * math.factorial(k) ** 2 * math.cosh(r))
        assert d.probs[(m,)] == pytest.approx(ref, abs=1e-14)


def test_tail_and_warning():
    d = ideal_distribution(make_thermalized_squeezed(1.2), 4)
    assert d.tail > 1e-8 and d.warning is not None
    assert math.fsum(d.probs.values()) == pytest.approx(1 - d.tail)
    d = ideal_distribution(make_thermal(0.05), 6)
    assert d.warning is None


def test_routes_agree(state3):
    a = ideal_distribution(state3, 3, route="hafnian")
    b = ideal_distribution(state3, 3, route="pgf")
    for m, p in a.probs.items():
        assert b.probs[m] == pytest.approx(p, abs=1e-12)
    with pytest.raises(ValueError):
        ideal_distribution(state3, 2, route="magic")


def test_pnr_oracle_reproduces_ideal(state3):
    d = ideal_distribution(state3, 2)
    for m, p in d.probs.items():
        assert brute_force_probability(state3, PNR(), m) == pytest.approx(p, abs=1e-13)


def test_lattice_mass(state3):
    lat = fock_lattice(state3)
    assert lat.tail < 1e-12
    assert lat.probs.sum() == pytest.approx(1 - lat.tail, abs=1e-12)
    assert lat.probs.min() > -1e-14


def test_on_off_oracle_two_modes():
    s = random_state(2, 9)
    for p in ([0, 1], [1, 0], [1, 1]):
        assert pattern_probability(s, OnOff(), p) == pytest.approx(brute_force_probability(s, OnOff(), p), abs=1e-8)


@pytest.mark.parametrize("det", [OnOff(), Click(2), APD(0.05), SNSPD(0.05, 0.2)], ids=str)
def test_outcomes_sum_to_one(det):
    s = random_state(2, 31)
    top = 6 if det.max_outcome is None else min(det.max_outcome, 6)
    total = sum(pattern_probability(s, det, [a, b]) for a in range(top + 1) for b in range(top + 1)
                if a + b <= 4 or isinstance(det, Click))
    if isinstance(det, Click):
        assert total == pytest.approx(1.0, abs=1e-10)
    else:
        assert total <= 1 + 1e-10 and total > 0.99


def test_unsupported_route():
    s = make_thermalized_squeezed(0.3)
    with pytest.raises(UnsupportedRoute, match="hafnian"):
        pattern_probability(s, PNR(), [40])


def test_impossible_outcome_is_zero():
    assert pattern_probability(random_state(2, 3), Click(2), [3, 0]) == 0.0
    assert pattern_probability(random_state(2, 3), APD(0.4), [4, 0]) == 0.0


def test_vacuum_probability_grows_with_loss():
    U = haar_random_unitary(3, seed=1)
    inputs = [make_thermalized_squeezed(0.7, 0.1), make_thermal(0.4), make_thermalized_squeezed(0.3)]
    vals = [pattern_probability(assemble_and_propagate(inputs, U, eta), OnOff(), [0, 0, 0])
            for eta in np.linspace(1.0, 0.05, 12)]
    assert np.all(np.diff(vals) >= -1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), pattern=st.lists(st.integers(0, 2), min_size=3, max_size=3))
def test_probabilities_are_non_negative(seed, pattern):
    s = random_state(3, seed)
    for det in (PNR(), OnOff(), Click(2), APD(0.05)):
        assert 0.0 <= pattern_probability(s, det, pattern) <= 1.0
