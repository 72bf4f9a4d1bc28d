import numpy as np
import pytest

from clickgbs.hafnian import (
    MAX_HAFNIAN_PAIRS,
    hafnian,
    hafnian_batch,
    hafnian_matchings,
    hafnian_power_trace,
    perfect_matchings,
)


def random_symmetric(n, rng):
    B = rng.standard_normal((2 * n, 2 * n)) + 1j * rng.standard_normal((2 * n, 2 * n))
    return B + B.T


def test_small_cases():
    assert hafnian(np.zeros((0, 0))) == 1
    assert hafnian(np.array([[0, 3.5], [3.5, 0]])) == pytest.approx(3.5)
    B = np.arange(16.0).reshape(4, 4)
    B = B + B.T
    ref = B[0, 1] * B[2, 3] + B[0, 2] * B[1, 3] + B[0, 3] * B[1, 2]
    assert hafnian(B) == pytest.approx(ref)
    assert hafnian_power_trace(B) == pytest.approx(ref)


def test_odd_and_oversized_rejected():
    with pytest.raises(ValueError):
        hafnian(np.ones((3, 3)))
    with pytest.raises(ValueError):
        hafnian(np.ones((2 * MAX_HAFNIAN_PAIRS + 2,) * 2))


@pytest.mark.parametrize("n", range(1, 7))
def test_routes_agree(n, rng):
    B = random_symmetric(n, rng)
    ref = hafnian_matchings(B)
    assert abs(hafnian_power_trace(B) - ref) <= 1e-10 * max(1, abs(ref))
    assert abs(hafnian(B) - ref) <= 1e-10 * max(1, abs(ref))


def test_matching_count():
    for n in range(1, 6):
        assert len(perfect_matchings(2 * n)) == np.prod(np.arange(1, 2 * n, 2))
    # all-ones matrix counts perfect matchings: 15!! for n = 8
    assert hafnian(np.ones((16, 16))).real == pytest.approx(2027025, rel=1e-10)


def test_batch_matches_single(rng):
    for n in (3, 5):
        Bs = np.stack([random_symmetric(n, rng) for _ in range(4)])
        np.testing.assert_allclose(hafnian_batch(Bs), [hafnian(b) for b in Bs], rtol=1e-10)


def test_pair_permutation_invariance(rng):
    B = random_symmetric(3, rng)
    perm = rng.permutation(6)
    P = np.eye(6)[perm]
    assert hafnian(P.T @ B @ P) == pytest.approx(hafnian(B), rel=1e-10)
