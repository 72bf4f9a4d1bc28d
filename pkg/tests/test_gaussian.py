import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clickgbs.gaussian import (
    GaussianState,
    Interferometer,
    apply_loss,
    assemble_and_propagate,
    from_complex_basis,
    haar_random_unitary,
    kernel,
    make_squashed,
    make_thermal,
    make_thermalized_squeezed,
    mean_photons_after_loss,
    photon_number_moments,
    solve_squeezing,
    symplectic_eigenvalues,
    to_complex_basis,
    vacuum,
)


def swap(M):
    Z, I = np.zeros((M, M)), np.eye(M)
    return np.block([[Z, I], [I, Z]])


def test_squeezed_zero_is_vacuum():
    np.testing.assert_allclose(make_thermalized_squeezed(0.0, 0.1).cov, 0.5 * np.eye(2))


def test_squeezed_mean_photons_independent_of_epsilon():
    for eps in (0.0, 0.1, 1.0):
        s = make_thermalized_squeezed(0.3466, eps)
        assert s.total_mean_photons() == pytest.approx(np.sinh(0.3466) ** 2, abs=1e-14)
    assert 200 * 0.8 * np.sinh(0.3466) ** 2 == pytest.approx(20, abs=0.01)


def test_squeezed_eigenvalues():
    w = np.linalg.eigvalsh(make_thermalized_squeezed(1.0, 0.0).cov)
    np.testing.assert_allclose(w, [np.exp(-2) / 2, np.exp(2) / 2], rtol=1e-13)


@pytest.mark.parametrize("bad", [-0.1, 1.1])
def test_squeezed_rejects_epsilon(bad):
    with pytest.raises(ValueError):
        make_thermalized_squeezed(0.5, bad)


def test_thermal_and_squashed():
    np.testing.assert_allclose(make_thermal(0).cov, vacuum().cov)
    sq = make_squashed(1.0)
    np.testing.assert_allclose(np.linalg.eigvalsh(sq.cov), [0.5, 2.5], atol=1e-14)
    assert np.linalg.eigvalsh(sq.cov - 0.5 * np.eye(2)).min() == pytest.approx(0, abs=1e-14)
    assert sq.is_classical() and make_thermal(0.3).is_classical()
    assert not make_thermalized_squeezed(0.4).is_classical()
    with pytest.raises(ValueError):
        make_thermal(-1)
    with pytest.raises(ValueError):
        make_squashed(-1)


def test_unphysical_covariance_rejected():
    with pytest.raises(ValueError):
        GaussianState(0.3 * np.eye(2))
    with pytest.raises(ValueError):
        GaussianState(np.array([[1.0, 0.2], [0.1, 1.0]]))


def test_vacuum_propagation_with_loss():
    U = haar_random_unitary(4, seed=1)
    out = assemble_and_propagate([vacuum()] * 2, U, 0.8)
    np.testing.assert_allclose(out.cov, 0.5 * np.eye(8), atol=1e-14)


def test_identity_propagation():
    s = make_thermalized_squeezed(0.7, 0.2)
    out = assemble_and_propagate([s], np.eye(1), 1.0)
    np.testing.assert_allclose(out.cov, s.cov, atol=1e-15)


def test_total_photons_after_loss():
    r, Mp, eta = 0.5, 3, 0.7
    out = assemble_and_propagate([make_thermalized_squeezed(r, 0.1)] * Mp, haar_random_unitary(5, seed=3), eta)
    assert out.total_mean_photons() == pytest.approx(mean_photons_after_loss(r, Mp, eta), rel=1e-12)


def test_propagation_errors():
    with pytest.raises(ValueError):
        assemble_and_propagate([vacuum()] * 3, np.eye(2))
    with pytest.raises(ValueError):
        assemble_and_propagate([vacuum()], np.eye(1), 0.0)
    with pytest.raises(ValueError):
        Interferometer(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_haar_unitary():
    U1 = haar_random_unitary(1, seed=5).U
    assert abs(abs(U1[0, 0]) - 1) < 1e-14
    np.testing.assert_array_equal(haar_random_unitary(8, seed=9).U, haar_random_unitary(8, seed=9).U)
    M, n = 4, 4000
    mean = np.mean([np.abs(haar_random_unitary(M, seed=s).U) ** 2 for s in range(n)], axis=0)
    # |U_ij|^2 ~ Beta(1, M-1): variance (M-1)/(M^2 (M+1))
    se = np.sqrt((M - 1) / (M**2 * (M + 1)) / n)
    assert np.all(np.abs(mean - 1 / M) < 5 * se)


def test_kernel_examples():
    K = kernel(vacuum(2))
    np.testing.assert_allclose(K.A, 0, atol=1e-15)
    assert K.normQ == pytest.approx(1.0)
    n = 0.8
    K = kernel(make_thermal(n))
    np.testing.assert_allclose(K.A, n / (n + 1) * np.eye(2), atol=1e-14)
    assert K.normQ == pytest.approx(n + 1)
    r = 0.9
    w = np.sort(np.linalg.eigvalsh(kernel(make_thermalized_squeezed(r)).A))
    np.testing.assert_allclose(w, [-np.tanh(r), np.tanh(r)], atol=1e-13)


def test_solve_squeezing_table_values():
    assert solve_squeezing(20, 200, 0.8) == pytest.approx(0.3466, abs=5e-5)
    assert solve_squeezing(0, 10, 0.5) == 0
    assert mean_photons_after_loss(1.0, 50, 0.8) == pytest.approx(55.24, abs=0.01)


def test_photon_number_moments_thermal():
    n = 0.6
    mean, var = photon_number_moments(make_thermal(n))
    assert mean == pytest.approx(n)
    assert var == pytest.approx(n * (n + 1))
    r = 0.5
    mean, var = photon_number_moments(make_thermalized_squeezed(r))
    s2 = np.sinh(r) ** 2
    assert var == pytest.approx(2 * s2 * (s2 + 1))


random_states = st.builds(
    lambda M, seed, eta: assemble_and_propagate(
        [make_thermalized_squeezed(r, e) for r, e in np.random.default_rng(seed).uniform([0, 0], [1.2, 1], (M, 2))],
        haar_random_unitary(M, seed=seed),
        eta,
    ),
    st.integers(1, 4),
    st.integers(0, 10**6),
    st.floats(0.05, 1.0),
)


@settings(max_examples=40, deadline=None)
@given(random_states)
def test_state_invariants(s):
    assert symplectic_eigenvalues(s.cov).min() >= 0.5 - 1e-9
    np.testing.assert_allclose(from_complex_basis(to_complex_basis(s.cov)), s.cov, atol=1e-12)
    K = kernel(s)
    X = swap(s.M)
    np.testing.assert_allclose(X @ K.A @ X, K.A.conj(), atol=1e-12)
    assert np.max(np.abs(np.linalg.eigvalsh(K.A))) < 1


@settings(max_examples=30, deadline=None)
@given(random_states, st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_loss_semigroup(s, e1, e2):
    a = apply_loss(apply_loss(s, e1), e2)
    b = apply_loss(s, e1 * e2)
    np.testing.assert_allclose(a.cov, b.cov, atol=1e-12)


def test_state_is_immutable():
    s = make_thermal(0.2)
    with pytest.raises(ValueError):
        s.cov[0, 0] = 3.0
