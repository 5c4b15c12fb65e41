"""Select the compiled step kernels at import, fall back to numpy.

Set MFBCIM_PURE_PYTHON=1 to force the numpy fallback (used by the
benchmark and the backend-equivalence tests).
"""

import os

from . import _kernels_py

if os.environ.get("MFBCIM_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

COMPILED_AVAILABLE = _compiled is not None


def compiled():
    return _compiled


def numpy_kernels():
    return _kernels_py


def active_name():
    return "compiled" if _compiled is not None else "numpy"
