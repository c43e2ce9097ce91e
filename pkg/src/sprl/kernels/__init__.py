"""Hot-kernel dispatch.

The env flag SPRL_BACKEND picks the implementation: "numba" (default when
numba imports) or "numpy". Both compute the same math; the numba path exists
purely for speed. float64 inputs always route to the numpy implementation —
the numba kernels are compiled for float32, and float64 is only used by the
gradient-check harness.
"""

import os

import numpy as np

from . import numpy_impl

_requested = os.environ.get("SPRL_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(f"SPRL_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = numpy_impl
        BACKEND = "numpy"


def _pick(arr):
    return _impl if arr.dtype == np.float32 else numpy_impl


def lstm_forward(x, w, u, b):
    return _pick(x).lstm_forward(x, w, u, b)


def lstm_backward(dh_out, x, w, u, h, i, f, g, o, c, hc):
    return _pick(x).lstm_backward(dh_out, x, w, u, h, i, f, g, o, c, hc)


def attention_forward(s, q, k, beta, v, alpha):
    return _pick(s).attention_forward(s, q, k, beta, v, alpha)


def attention_backward(dz, s, q, k, v, qs, ks, hp, es, att):
    return _pick(s).attention_backward(dz, s, q, k, v, qs, ks, hp, es, att)
