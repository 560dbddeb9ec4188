"""Compare the compiled kernels against the pure-numpy fallbacks.

Run as:  python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import timeit

import numpy as np

from memabs._kernels import HAVE_COMPILED, _fallback

if HAVE_COMPILED:
    from memabs._kernels import _compiled
else:
    _compiled = None


def _time(func, *args, repeat: int = 5, number: int = 3) -> float:
    return min(timeit.repeat(lambda: func(*args), repeat=repeat,
                             number=number)) / number


def bench_window_codes() -> None:
    rng = np.random.Generator(np.random.Philox(0))
    symbols = rng.integers(0, 25, size=1_000_000).astype(np.int64)
    for ell in (1, 2, 3):
        t_fb = _time(_fallback.window_codes, symbols, 25, ell)
        line = f"window_codes  n=25 ell={ell}  fallback {t_fb * 1e3:8.2f} ms"
        if _compiled is not None:
            t_c = _time(_compiled.window_codes, symbols, 25, ell)
            assert np.array_equal(_compiled.window_codes(symbols, 25, ell),
                                  _fallback.window_codes(symbols, 25, ell))
            line += f"  compiled {t_c * 1e3:8.2f} ms  speedup {t_fb / t_c:5.1f}x"
        print(line)


def bench_affine_path() -> None:
    rng = np.random.Generator(np.random.Philox(1))
    A = np.array([[0.995, 0.005], [0.0, 0.98]])
    m_w = np.zeros(2)
    x0 = np.array([-0.4, -0.4])
    noise = rng.normal(scale=0.26, size=(200_000, 2))
    t_fb = _time(_fallback.affine_gaussian_path, A, m_w, x0, noise)
    line = f"affine_path   200k steps d=2  fallback {t_fb * 1e3:8.2f} ms"
    if _compiled is not None:
        t_c = _time(_compiled.affine_gaussian_path, A, m_w, x0, noise)
        ref = _fallback.affine_gaussian_path(A, m_w, x0, noise)
        got = _compiled.affine_gaussian_path(A, m_w, x0, noise)
        assert np.allclose(ref, got, rtol=1e-12, atol=1e-14)
        line += f"  compiled {t_c * 1e3:8.2f} ms  speedup {t_fb / t_c:5.1f}x"
    print(line)


if __name__ == "__main__":
    print(f"compiled extension available: {HAVE_COMPILED}")
    bench_window_codes()
    bench_affine_path()
