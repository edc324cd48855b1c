"""Kernel dispatch: the compiled extension when importable, NumPy otherwise.

Set ``WLANMATCH_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("WLANMATCH_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def coalition_worths(offsets, members, rate, ubits, utable, slot, t0, tc,
                     ap_rate, beta, ap_bits, downlink, impl=None):
    impl = impl or _impl
    return impl.coalition_worths(
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(members, dtype=np.int64),
        np.ascontiguousarray(rate, dtype=np.float64),
        np.ascontiguousarray(ubits, dtype=np.float64),
        np.ascontiguousarray(utable, dtype=np.int64),
        np.ascontiguousarray(slot, dtype=np.float64),
        np.ascontiguousarray(t0, dtype=np.float64),
        np.ascontiguousarray(tc, dtype=np.float64),
        np.ascontiguousarray(ap_rate, dtype=np.float64),
        np.ascontiguousarray(beta, dtype=np.float64),
        float(ap_bits),
        bool(downlink),
    )


def first_admissible(masks, allowed: int, impl=None) -> int:
    impl = impl or _impl
    return int(impl.first_admissible(np.ascontiguousarray(masks, dtype=np.uint64), np.uint64(allowed)))


def min_key_per_user(masks, keys, n_users: int, impl=None) -> np.ndarray:
    impl = impl or _impl
    return impl.min_key_per_user(
        np.ascontiguousarray(masks, dtype=np.uint64),
        np.ascontiguousarray(keys, dtype=np.int64),
        int(n_users),
    )


def implementations() -> dict:
    """Every available backend, keyed by name (used by tests and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        out["cython"] = _compiled
    return out
