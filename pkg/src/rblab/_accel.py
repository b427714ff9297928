"""Hot kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and ``RBLAB_NUMBA`` is not
set to a false-ish value (``0``, ``false``, ``no``, ``off``).  Both paths are
always importable so the benchmark and the tests can compare them directly.
"""
from __future__ import annotations

import os

import numpy as np

_FALSEY = {"0", "false", "no", "off"}

try:  # pragma: no cover - exercised implicitly by whichever env runs the tests
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("RBLAB_NUMBA", "1").strip().lower() not in _FALSEY


def thread_count() -> int:
    """Worker cap from ``RBLAB_THREADS`` (default 1)."""
    raw = os.environ.get("RBLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"RBLAB_THREADS must be an integer >= 1, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"RBLAB_THREADS must be an integer >= 1, got {n}")
    return n


# ---------------------------------------------------------------------------
# truncated Taylor product
# ---------------------------------------------------------------------------

def jet_mul_numpy(a, b, left, right, target, scatter):
    """Row-wise truncated product of coefficient rows ``a`` and ``b`` (shape (M, C))."""
    return (a[:, left] * b[:, right]) @ scatter


def _jet_mul_loops(a, b, left, right, target, out):
    m_rows = a.shape[0]
    n_pairs = left.shape[0]
    for m in range(m_rows):
        for p in range(n_pairs):
            out[m, target[p]] += a[m, left[p]] * b[m, right[p]]
    return out


def _stencil_loops(u, scale, coef, inv_h2, periodic, out):
    nx, ny = u.shape
    if periodic:
        for i in range(nx):
            ip = i + 1 if i + 1 < nx else 0
            im = i - 1 if i > 0 else nx - 1
            for j in range(ny):
                jp = j + 1 if j + 1 < ny else 0
                jm = j - 1 if j > 0 else ny - 1
                lap = (u[ip, j] + u[im, j] + u[i, jp] + u[i, jm] - 4.0 * u[i, j]) * inv_h2
                out[i, j] = coef * scale[i, j] * lap
    else:
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                lap = (u[i + 1, j] + u[i - 1, j] + u[i, j + 1] + u[i, j - 1] - 4.0 * u[i, j]) * inv_h2
                out[i, j] = coef * scale[i, j] * lap
    return out


if HAS_NUMBA:
    _jet_mul_jit = numba.njit(cache=True, nogil=True)(_jet_mul_loops)
    _stencil_jit = numba.njit(cache=True, nogil=True)(_stencil_loops)
else:  # pragma: no cover
    _jet_mul_jit = None
    _stencil_jit = None


def jet_mul_numba(a, b, left, right, target, scatter=None):
    out = np.zeros_like(a)
    return _jet_mul_jit(a, b, left, right, target, out)


def jet_mul(a, b, left, right, target, scatter):
    if USE_NUMBA:
        return jet_mul_numba(a, b, left, right, target)
    return jet_mul_numpy(a, b, left, right, target, scatter)


# ---------------------------------------------------------------------------
# conformal-flow stencil: coef * scale * (5-point Laplacian of u)
# ---------------------------------------------------------------------------

def scaled_laplacian_numpy(u, scale, coef, inv_h2, periodic):
    if periodic:
        lap = (np.roll(u, 1, 0) + np.roll(u, -1, 0) + np.roll(u, 1, 1) + np.roll(u, -1, 1) - 4.0 * u) * inv_h2
        return coef * scale * lap
    out = np.zeros_like(u)
    c = u[1:-1, 1:-1]
    lap = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * c) * inv_h2
    out[1:-1, 1:-1] = coef * scale[1:-1, 1:-1] * lap
    return out


def scaled_laplacian_numba(u, scale, coef, inv_h2, periodic):
    out = np.zeros_like(u)
    return _stencil_jit(u, scale, float(coef), float(inv_h2), bool(periodic), out)


def scaled_laplacian(u, scale, coef, inv_h2, periodic):
    """``coef * scale * L u`` with the 5-point Laplacian ``L``.

    Non-periodic grids leave the outermost ring at zero.
    """
    if USE_NUMBA:
        return scaled_laplacian_numba(u, scale, coef, inv_h2, periodic)
    return scaled_laplacian_numpy(u, scale, coef, inv_h2, periodic)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
