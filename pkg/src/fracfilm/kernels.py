"""Backend selection for hot kernels.

The Cython extension is used when it was built; otherwise the pure-Python
reference is used. Setting FRACFILM_PURE_PYTHON=1 forces the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("FRACFILM_PURE_PYTHON", "") not in ("", "0"):
    BACKEND = "python"
    angular_kernel = _kernels_py.angular_kernel
else:
    try:
        from ._kernels import angular_kernel  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        BACKEND = "python"
        angular_kernel = _kernels_py.angular_kernel

__all__ = ["BACKEND", "angular_kernel"]
