"""Selects the stencil-weight backend at import time.

The compiled Cython kernels are preferred when the extension built; setting
``PODNN_PURE_PYTHON=1`` forces the numpy fallback.  Both backends expose the
same functions and agree to solver precision (see tests/test_backends.py).
"""

import os

from . import _kernels_np

if os.environ.get("PODNN_PURE_PYTHON", "").strip() in ("1", "true", "yes"):
    kernels = _kernels_np
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_np

COMPILED = bool(getattr(kernels, "COMPILED", False))
