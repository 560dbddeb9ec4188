"""Pure numpy implementations of the hot kernels.

Same contracts as the Cython module ``memabs._kernels._compiled``.  Window
codes are integer-exact across implementations; paths agree to floating-point
rounding.  Each implementation is individually deterministic.
"""

from __future__ import annotations

import numpy as np


def window_codes(symbols: np.ndarray, n: int, ell: int) -> np.ndarray:
    """Flat big-endian codes of all ``ell``-long sliding windows.

    ``symbols`` is a 1-d int64 array with entries in [0, n).  Output has
    length ``len(symbols) - ell + 1`` and entries in [0, n**ell); window t
    maps to sum_j symbols[t + j] * n**(ell - 1 - j).
    """
    symbols = np.ascontiguousarray(symbols, dtype=np.int64)
    length = symbols.shape[0]
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if length < ell:
        raise ValueError("trace shorter than the window length")
    powers = n ** np.arange(ell - 1, -1, -1, dtype=np.int64)
    windows = np.lib.stride_tricks.sliding_window_view(symbols, ell)
    return windows @ powers


def affine_gaussian_path(A: np.ndarray, m_w: np.ndarray, x0: np.ndarray,
                         noise: np.ndarray) -> np.ndarray:
    """Iterate x_{k+1} = A x_k + m_w + noise[k] from ``x0``.

    ``noise`` has shape (horizon, d); the returned array has shape
    (horizon + 1, d) with row 0 equal to ``x0``.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    horizon = noise.shape[0]
    d = A.shape[0]
    out = np.empty((horizon + 1, d), dtype=np.float64)
    out[0] = x0
    x = np.asarray(x0, dtype=np.float64)
    for k in range(horizon):
        x = A @ x + (m_w + noise[k])
        out[k + 1] = x
    return out
