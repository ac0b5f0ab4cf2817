import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrlab import _kernels as K

needs_numba = pytest.mark.skipif(not K.NUMBA_AVAILABLE, reason="numba not importable")


@needs_numba
@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 30), st.integers(1, 12), st.integers(0, 2 ** 31))
def test_ball_counts_parity(n_rows, n_cols, n_r, seed):
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.integers(0, 8, (n_rows, n_cols)).astype(float), axis=1)
    radii = rng.integers(-1, 9, n_r).astype(float)  # unsorted, with ties and negatives
    a, b = K.ball_counts_numpy(rows, radii), K.ball_counts_numba(rows, radii)
    assert np.array_equal(a, b)
    assert np.array_equal(a, (rows[:, :, None] <= radii[None, None, :]).sum(axis=1))


@needs_numba
@pytest.mark.parametrize("code,param", [(K.RULE_POWER_LAW, 6.0), (K.RULE_EXPONENTIAL, 1.0),
                                        (K.RULE_CONSTANT, 0.0)])
def test_sup_grid_parity(code, param):
    k = np.arange(0.0, 40.5, 0.5)
    a = K.sup_grid_numpy(code, param, 2.0, k, 164.0, 0.125)
    b = K.sup_grid_numba(code, param, 2.0, k, 164.0, 0.125)
    assert a[0] == pytest.approx(b[0], rel=1e-13)
    assert a[1:] == b[1:]


@needs_numba
@pytest.mark.parametrize("q,n", [(2, 1), (2, 7), (3, 4), (4, 3)])
def test_site_transform_parity(q, n):
    rng = np.random.default_rng(q * 10 + n)
    vec = rng.standard_normal(q ** n) + 1j * rng.standard_normal(q ** n)
    mat = rng.standard_normal((q, q)) + 1j * rng.standard_normal((q, q))
    a, b = K.site_transform_numpy(vec, mat, n), K.site_transform_numba(vec, mat, n)
    assert np.allclose(a, b, atol=1e-12)
    # oracle: the full Kronecker power
    full = mat
    for _ in range(n - 1):
        full = np.kron(full, mat)
    assert np.allclose(a, full @ vec, atol=1e-10)


def _selected(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("LRLAB_DISABLE_NUMBA", None)
    else:
        env["LRLAB_DISABLE_NUMBA"] = env_value
    code = "from lrlab import _kernels as K; print(K.NUMBA_ENABLED, K.sup_grid.__name__)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    return out.stdout.split()


def test_env_flag_selects_numpy():
    assert _selected("1") == ["False", "sup_grid_numpy"]


@needs_numba
@pytest.mark.parametrize("value", [None, "0", ""])
def test_numba_is_default(value):
    assert _selected(value) == ["True", "sup_grid_numba"]
