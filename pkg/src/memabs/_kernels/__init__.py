"""Hot-kernel dispatch: compiled Cython extension when available, numpy
fallback otherwise.

Set the environment variable ``MEMABS_PURE_PYTHON=1`` before import to force
the fallback (used by the kernel benchmark and the cross-check tests).
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("MEMABS_PURE_PYTHON"):
    _impl = _fallback
    HAVE_COMPILED = False
else:
    try:
        from . import _compiled as _impl  # type: ignore[no-redef]

        HAVE_COMPILED = True
    except ImportError:
        _impl = _fallback
        HAVE_COMPILED = False

window_codes = _impl.window_codes
affine_gaussian_path = _impl.affine_gaussian_path

__all__ = ["window_codes", "affine_gaussian_path", "HAVE_COMPILED"]
