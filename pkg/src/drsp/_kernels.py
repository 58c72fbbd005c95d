"""Hot tableau update for the simplex engine.

The JIT kernel and the numpy fallback perform bitwise-identical float
operations (one divide, one multiply-subtract per entry, no fastmath),
so solver results do not depend on which one is active.  Set
DRSP_NO_NUMBA=1 to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - import guard
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _pivot_impl(T, r, q):
    m1, n = T.shape
    p = T[r, q]
    for j in range(n):
        T[r, j] /= p
    for i in range(m1):
        if i == r:
            continue
        f = T[i, q]
        if f != 0.0:
            for j in range(n):
                T[i, j] -= f * T[r, j]
    for i in range(m1):
        T[i, q] = 0.0
    T[r, q] = 1.0


def _pivot_numpy(T, r, q):
    p = T[r, q]
    T[r, :] /= p
    col = T[:, q].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r, :])
    T[:, q] = 0.0
    T[r, q] = 1.0


if numba is not None and not os.environ.get("DRSP_NO_NUMBA"):
    pivot_update = numba.njit(cache=True, fastmath=False)(_pivot_impl)
else:  # pragma: no cover - exercised via DRSP_NO_NUMBA in tests
    pivot_update = _pivot_numpy
