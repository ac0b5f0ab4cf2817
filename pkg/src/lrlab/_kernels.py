"""Hot inner loops, each with a numba-compiled and a pure-numpy implementation.

The numba path is used when numba imports cleanly and the environment variable
``LRLAB_DISABLE_NUMBA`` is unset (or "0"). Both paths are always importable so the
test-suite and ``benchmarks/bench_kernels.py`` can compare them directly.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
NUMBA_ENABLED = NUMBA_AVAILABLE and os.environ.get("LRLAB_DISABLE_NUMBA", "0") in ("", "0")

# decay-rule codes understood by the compiled sup-grid kernel
RULE_CONSTANT = 0
RULE_POWER_LAW = 1
RULE_EXPONENTIAL = 2


def _maybe_njit(fn):
    if not NUMBA_AVAILABLE:
        return None
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------- ball counts

def ball_counts_numpy(sorted_rows, radii):
    """``counts[i, j] = #{y : sorted_rows[i, y] <= radii[j]}`` for row-sorted input."""
    sorted_rows = np.asarray(sorted_rows, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    out = np.empty((sorted_rows.shape[0], radii.shape[0]), dtype=np.int64)
    for i in range(sorted_rows.shape[0]):
        out[i] = np.searchsorted(sorted_rows[i], radii, side="right")
    return out


def _ball_counts_loop(sorted_rows, radii):
    n_rows, n_cols = sorted_rows.shape
    n_r = radii.shape[0]
    out = np.empty((n_rows, n_r), dtype=np.int64)
    for i in range(n_rows):
        pos = 0
        for j in range(n_r):
            r = radii[j]
            while pos < n_cols and sorted_rows[i, pos] <= r:
                pos += 1
            out[i, j] = pos
    return out


_ball_counts_nb = _maybe_njit(_ball_counts_loop)


def ball_counts_numba(sorted_rows, radii):
    # radii must be ascending for the two-pointer sweep
    radii = np.asarray(radii, dtype=np.float64)
    order = np.argsort(radii, kind="stable")
    res = _ball_counts_nb(np.ascontiguousarray(sorted_rows, dtype=np.float64), radii[order])
    out = np.empty_like(res)
    out[:, order] = res
    return out


# ---------------------------------------------------- double sup on an (k, m) grid

def _log_decay(code, param, r):
    if code == RULE_POWER_LAW:
        return -param * np.log1p(r)
    if code == RULE_EXPONENTIAL:
        return -param * r
    return 0.0 * r


def sup_grid_numpy(code, param, nu, k_values, m_upper, step):
    """Max of (1+m)^nu F((3m/4 - (k+1)/4)_+) over k in k_values, m in [k/2, m_upper].

    Returns ``(log_sup, k_at, m_at)``; works in log space to avoid overflow.
    """
    best, k_at, m_at = -np.inf, np.nan, np.nan
    for k in np.asarray(k_values, dtype=np.float64):
        n = int(np.floor((m_upper - k / 2.0) / step)) + 1
        if n <= 0:
            continue
        m = k / 2.0 + step * np.arange(n)
        arg = np.maximum(0.75 * m - (k + 1.0) / 4.0, 0.0)
        vals = nu * np.log1p(m) + _log_decay(code, param, arg)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, k_at, m_at = float(vals[j]), float(k), float(m[j])
    return best, k_at, m_at


def _sup_grid_loop(code, param, nu, k_values, m_upper, step):
    best = -np.inf
    k_at = np.nan
    m_at = np.nan
    for k in k_values:
        n = int(np.floor((m_upper - k / 2.0) / step)) + 1
        for j in range(n):
            m = k / 2.0 + step * j
            arg = 0.75 * m - (k + 1.0) / 4.0
            if arg < 0.0:
                arg = 0.0
            if code == 1:
                lf = -param * np.log1p(arg)
            elif code == 2:
                lf = -param * arg
            else:
                lf = 0.0
            v = nu * np.log1p(m) + lf
            if v > best:
                best = v
                k_at = k
                m_at = m
    return best, k_at, m_at


_sup_grid_nb = _maybe_njit(_sup_grid_loop)


def sup_grid_numba(code, param, nu, k_values, m_upper, step):
    best, k_at, m_at = _sup_grid_nb(int(code), float(param), float(nu),
                                    np.asarray(k_values, dtype=np.float64),
                                    float(m_upper), float(step))
    return float(best), float(k_at), float(m_at)


# --------------------------------------------- per-site basis transformation

def site_transform_numpy(vec, mat, n_sites):
    """Apply the q x q matrix ``mat`` along every base-q digit of ``vec`` (len q**n_sites)."""
    q = mat.shape[0]
    t = np.asarray(vec, dtype=np.complex128).reshape((q,) * n_sites)
    for axis in range(n_sites):
        t = np.moveaxis(np.tensordot(mat, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def _site_transform_loop(vec, mat, n_sites):
    q = mat.shape[0]
    n = vec.shape[0]
    cur = vec.copy()
    nxt = np.empty_like(cur)
    stride = n
    for _ in range(n_sites):
        stride //= q
        block = stride * q
        for base in range(0, n, block):
            for off in range(stride):
                for p in range(q):
                    acc = 0j
                    for j in range(q):
                        acc += mat[p, j] * cur[base + j * stride + off]
                    nxt[base + p * stride + off] = acc
        cur, nxt = nxt, cur
    return cur


_site_transform_nb = _maybe_njit(_site_transform_loop)


def site_transform_numba(vec, mat, n_sites):
    return _site_transform_nb(np.ascontiguousarray(vec, dtype=np.complex128),
                              np.ascontiguousarray(mat, dtype=np.complex128), int(n_sites))


if NUMBA_ENABLED:
    ball_counts = ball_counts_numba
    sup_grid = sup_grid_numba
    site_transform = site_transform_numba
else:
    ball_counts = ball_counts_numpy
    sup_grid = sup_grid_numpy
    site_transform = site_transform_numpy
