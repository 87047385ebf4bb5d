"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from ``MGDL_BACKEND``:

* ``numba``: compiled kernels (the default when numba imports)
* ``numpy``: reference implementation, no compilation

Both modules expose ``forward``, ``last_hidden``, ``loss``, ``loss_grad``,
``adam_update`` and ``dft_amplitudes`` with identical signatures.
"""
import os

from . import _numpy as numpy_backend

try:
    from . import _numba as numba_backend
except ImportError:  # numba not installed
    numba_backend = None

_requested = os.environ.get("MGDL_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"MGDL_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba" and numba_backend is not None:
    backend = numba_backend
    BACKEND = "numba"
else:
    backend = numpy_backend
    BACKEND = "numpy"
