import subprocess
import sys

import numpy as np
import pytest

from clickgbs import _kernels, _kernels_py


def random_inputs(rng, E=700, M=5, G=12):
    p = [rng.normal(size=(E, M)) + 1j * rng.normal(size=(E, M)) for _ in range(3)]
    th = rng.uniform(0, 2 * np.pi, size=G)
    return [np.ascontiguousarray(v) for v in p], np.exp(-1j * th), np.exp(-2j * th)


def test_python_kernel_against_loop(rng):
    (p0, p1, p2), x, y = random_inputs(rng, E=40, M=3, G=4)
    ref = np.zeros(4, complex)
    for e in range(40):
        for g in range(4):
            ref[g] += np.prod(p0[e] + p1[e] * x[g] + p2[e] * y[g])
    out, rej = _kernels_py.char_accumulate(p0, p1, p2, x, y, 0, 40)
    np.testing.assert_allclose(out, ref, rtol=1e-12)
    assert rej == 0


@pytest.mark.skipif(_kernels.BACKEND != "cython", reason="compiled extension not built")
def test_compiled_kernel_matches_python(rng):
    from clickgbs import _ckernels

    (p0, p1, p2), x, y = random_inputs(rng)
    p0[17, 2] = np.nan
    p1[300, 0] = np.inf
    for lo, hi in [(0, 700), (13, 401), (5, 5)]:
        a, ra = _ckernels.char_accumulate(p0, p1, p2, x, y, lo, hi)
        b, rb = _kernels_py.char_accumulate(p0, p1, p2, x, y, lo, hi)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
        assert ra == rb


def test_rejection_counts(rng):
    (p0, p1, p2), x, y = random_inputs(rng, E=50)
    p2[[3, 4, 40], 1] = np.nan
    out, rej = _kernels.char_accumulate(p0, p1, p2, x, y, 0, 50)
    assert rej == 3 and np.all(np.isfinite(out))


def test_pure_python_switch():
    code = "from clickgbs import _kernels; print(_kernels.BACKEND)"
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env={"CLICKGBS_PURE_PYTHON": "1", "PATH": ""}
    )
    assert out.stdout.strip() == "python"
