import numpy as np
import pytest

from memabs._kernels import _fallback

try:
    from memabs._kernels import _compiled
except ImportError:
    _compiled = None

needs_compiled = pytest.mark.skipif(_compiled is None,
                                    reason="compiled extension not built")


def test_fallback_window_codes_hand_value():
    # big-endian: [2,1] -> 2*3+1 = 7, [1,0] -> 3
    symbols = np.array([2, 1, 0], dtype=np.int64)
    assert _fallback.window_codes(symbols, 3, 2).tolist() == [7, 3]


def test_fallback_window_codes_ell_one_is_identity():
    symbols = np.array([0, 4, 2, 4], dtype=np.int64)
    assert _fallback.window_codes(symbols, 5, 1).tolist() == [0, 4, 2, 4]


@needs_compiled
def test_window_codes_implementations_agree():
    rng = np.random.Generator(np.random.Philox(7))
    for n, ell in [(2, 1), (3, 2), (25, 3), (10, 4)]:
        symbols = rng.integers(0, n, size=5000).astype(np.int64)
        got = _compiled.window_codes(symbols, n, ell)
        want = _fallback.window_codes(symbols, n, ell)
        assert np.array_equal(got, want)


@needs_compiled
def test_affine_path_implementations_agree():
    rng = np.random.Generator(np.random.Philox(8))
    A = np.array([[0.995, 0.005], [0.0, 0.98]])
    m_w = np.array([0.1, -0.2])
    x0 = np.array([-0.4, -0.4])
    noise = rng.normal(size=(2000, 2))
    got = _compiled.affine_gaussian_path(A, m_w, x0, noise)
    want = _fallback.affine_gaussian_path(A, m_w, x0, noise)
    assert got.shape == (2001, 2)
    # both paths are deterministic but round differently (BLAS vs scalar)
    assert np.allclose(got, want, rtol=1e-9, atol=1e-12)


def test_affine_path_zero_noise_identity_dynamics():
    A = np.eye(2)
    x0 = np.array([1.5, -2.0])
    noise = np.zeros((3, 2))
    path = _fallback.affine_gaussian_path(A, np.zeros(2), x0, noise)
    assert np.array_equal(path, np.tile(x0, (4, 1)))
