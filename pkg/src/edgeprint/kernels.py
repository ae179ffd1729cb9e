"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise, or when the
``EDGEPRINT_PURE_PYTHON`` environment variable is set to a non-empty value,
the numpy/pure-Python versions are used. Both return identical results.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("EDGEPRINT_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "compiled"
        _impl = _compiled


def _bits(bits):
    return np.ascontiguousarray(bits, dtype=np.uint8)


def crc15(bits, impl=None):
    return (impl or _impl).crc15(_bits(bits))


def stuff_bits(bits, impl=None):
    return (impl or _impl).stuff_bits(_bits(bits))


def destuff_bits(bits, impl=None):
    return (impl or _impl).destuff_bits(_bits(bits))


def rising_edges(bits, window_bits, impl=None):
    return (impl or _impl).rising_edges(_bits(bits), int(window_bits))


def relief_f_weights(x, y, order, k, priors, impl=None):
    return (impl or _impl).relief_f_weights(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.int64),
        np.ascontiguousarray(order, dtype=np.int64),
        int(k),
        np.ascontiguousarray(priors, dtype=np.float64),
    )


def available_backends():
    """Map backend name to implementation module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _kernels as compiled
    except ImportError:
        pass
    else:
        out["compiled"] = compiled
    return out
