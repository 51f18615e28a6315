"""Select the kernel backend at import time.

The compiled extension is preferred.  Setting ``POSSETS_PURE_PYTHON=1`` in
the environment forces the numpy fallback, which is also used when the
extension was not built.
"""

import os

if os.environ.get("POSSETS_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        from . import _kernels_py as kernels

        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
