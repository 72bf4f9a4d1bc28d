import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from clickgbs import functionals as fn
from clickgbs.conformance import random_state
from clickgbs.detectors import APD, SNSPD, Click
from clickgbs.gaussian import KernelMatrix, kernel, make_thermal, make_thermalized_squeezed
from clickgbs.probability import brute_force_probability, pattern_probability

from conftest import physical_kernel_A


def rk_for(M, seed, pattern):
    return fn.reduce(kernel(random_state(M, seed)), pattern)


def test_reduce_and_repeat():
    K = kernel(random_state(4, 3))
    rk = fn.reduce(K, [0, 2, 0, 1])
    assert rk.support == (1, 3) and rk.clicks == (2, 1)
    assert rk.N == 2 and rk.total_clicks == 3
    np.testing.assert_array_equal(rk.A_S, K.A[np.ix_([1, 3, 5, 7], [1, 3, 5, 7])])
    An = fn.repeat(rk)
    assert An.shape == (6, 6)
    np.testing.assert_array_equal(An[0], An[1])
    np.testing.assert_array_equal(An[:, 3], An[:, 4])
    with pytest.raises(ValueError):
        fn.reduce(K, [1, 0])
    with pytest.raises(ValueError):
        fn.reduce(K, [1, -1, 0, 0])


def test_empty_pattern_gives_one():
    rk = rk_for(3, 1, [0, 0, 0])
    assert fn.hafnian_functional(rk) == 1.0
    assert fn.kensingtonian(rk, 2) == 1.0
    assert fn.apd_functional(rk, 0.9) == 1.0
    assert fn.snspd_functional(rk, SNSPD()) == (1.0, 0.0)


def test_vacuum_probability():
    st_ = random_state(3, 2)
    for det in (Click(1), Click(2), APD(0.05), SNSPD()):
        assert pattern_probability(st_, det, [0, 0, 0]) == pytest.approx(1 / kernel(st_).normQ)


def test_torontonian_examples():
    # single thermal mode: P(click) = n / (n + 1)
    K = kernel(make_thermal(0.7))
    assert fn.torontonian(K.A) / K.normQ == pytest.approx(0.7 / 1.7, abs=1e-14)
    A = physical_kernel_A(4, 5)
    _, count = fn.torontonian(A, return_count=True)
    assert count == 2**4


@pytest.mark.parametrize("seed", range(100))
def test_kensingtonian_one_bin_is_torontonian(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 5))
    rk = rk_for(N, 1000 + seed, [1] * N)
    assert fn.kensingtonian(rk, 1) == pytest.approx(fn.torontonian(rk.A_S), abs=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_kensingtonian_forms_agree(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 4))
    pattern = list(rng.integers(0, K + 1, size=3))
    rk = rk_for(3, 2000 + seed, pattern)
    assert fn.kensingtonian(rk, K) == pytest.approx(fn.kensingtonian_tor_form(rk, K), abs=1e-10)


@pytest.mark.parametrize("seed", range(30))
def test_apd_unit_efficiency_is_hafnian(seed):
    N = 1 + seed % 4
    rk = rk_for(N, 3000 + seed, [1] * N)
    assert fn.apd_functional(rk, 1.0) == pytest.approx(fn.hafnian_functional(rk), abs=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_apd_forms_agree(seed):
    rk = rk_for(3, 4000 + seed, [1, 1, 1])
    eta1 = 0.6 + 0.04 * seed
    ref = fn.apd_double_expansion(rk, eta1)
    assert fn.apd_functional(rk, eta1) == pytest.approx(ref, abs=1e-10)
    assert fn.expansion_functional(rk, APD(1 - eta1)) == pytest.approx(ref, abs=1e-10)


def test_apd_rejects_collisions():
    with pytest.raises(fn.FunctionalError, match="collision"):
        fn.apd_functional(rk_for(2, 1, [2, 1]), 0.95)


def test_click_rejects_impossible_counts():
    with pytest.raises(fn.FunctionalError):
        fn.kensingtonian(rk_for(2, 1, [3, 0]), 2)


@pytest.mark.parametrize("n", [0.2, 1.3])
@pytest.mark.parametrize("m", [0, 1, 2, 3])
@pytest.mark.parametrize("a", [0.0, 0.4, 0.95])
def test_gaussian_expectation_single_mode(n, m, a):
    # thermal P function is exponential in |alpha|^2 with mean n
    K = kernel(make_thermal(n))
    val = fn.gaussian_expectation(np.eye(2) - K.A, [m], [a]) / K.normQ
    ref = math.factorial(m) * n**m / (1 + (1 - a) * n) ** (m + 1)
    assert val.real == pytest.approx(ref, rel=1e-12)
    assert abs(val.imag) < 1e-14


def test_gaussian_expectation_unit_rate_is_hafnian():
    rk = rk_for(3, 7, [2, 1, 1])
    val = fn.gaussian_expectation_batch(rk.A_S, rk.clicks, np.zeros((1, 3)))[0]
    assert val.real / math.prod(math.factorial(c) for c in rk.clicks) == pytest.approx(
        fn.hafnian_functional(rk), rel=1e-12
    )


def test_imaginary_residue_raises():
    rng = np.random.default_rng(0)
    A = 0.1 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    rk = fn.reduce(KernelMatrix(A, 1.0), [1, 1])
    with pytest.raises(fn.FunctionalError, match="imaginary"):
        fn.hafnian_functional(rk)


def test_non_positive_determinant_names_subset():
    A = np.array([[0, 2.0], [2.0, 0]])
    with pytest.raises(fn.FunctionalError, match="subset"):
        fn.torontonian(A)


def test_snspd_scalar_oracle():
    # thermal input, one click: double integral over |alpha|^2 and the click time
    n, det = 0.8, SNSPD(0.05, 0.2)
    K = kernel(make_thermal(n))

    def inner(mu):
        return mu * integrate.quad(lambda t: np.exp(-mu * det.Xi([t])[()]), 0, 1, points=[0.95], epsabs=1e-13)[0]

    ref = integrate.quad(lambda mu: np.exp(-mu / n) / n * inner(mu), 0, np.inf, epsabs=1e-13)[0]
    val, err = fn.snspd_functional(fn.reduce(K, [1]), det)
    assert val / K.normQ == pytest.approx(ref, rel=1e-8)
    assert err < 1e-8


@pytest.mark.parametrize("pattern", [[1, 0], [1, 1], [2, 0], [2, 1], [2, 2]])
def test_snspd_converges(pattern):
    val, err = fn.snspd_functional(rk_for(2, 55, pattern), SNSPD(0.05, 0.2))
    assert err < 1e-6
    assert val > 0


def test_snspd_click_limit():
    with pytest.raises(fn.FunctionalError, match="limit"):
        fn.snspd_functional(rk_for(3, 1, [2, 2, 1]), SNSPD())


def test_snspd_short_recovery_is_apd():
    st_ = random_state(2, 77)
    for p in ([1, 0], [1, 1], [2, 0]):
        assert pattern_probability(st_, SNSPD(0.05, 1e-6), p) == pytest.approx(
            pattern_probability(st_, APD(0.05), p), abs=1e-4
        )


def test_squeezed_vacuum_hafnian():
    r = 0.5
    K = kernel(make_thermalized_squeezed(r))
    for k in range(4):
        p = fn.hafnian_functional(fn.reduce(K, [2 * k])) / K.normQ
        ref = math.factorial(2 * k) * math.tanh(r) ** (2 * k) / (4**k * math.factorial(k) ** 2 * math.cosh(r))
        assert p == pytest.approx(ref, rel=1e-12)
        assert fn.hafnian_functional(fn.reduce(K, [2 * k + 1])) == pytest.approx(0, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), K=st.integers(1, 3))
def test_click_probability_matches_lattice(seed, K):
    st_ = random_state(2, seed)
    rng = np.random.default_rng(seed)
    pattern = list(rng.integers(0, K + 1, size=2))
    ref = brute_force_probability(st_, Click(K), pattern)
    assert pattern_probability(st_, Click(K), pattern) == pytest.approx(ref, rel=1e-6, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_functionals_are_probabilities(seed):
    st_ = random_state(2, seed)
    for det in (Click(1), Click(2), APD(0.1)):
        for p in ([1, 0], [1, 1], [2, 1]):
            v = pattern_probability(st_, det, p)
            assert 0 <= v <= 1
