"""Sampling kernels: compiled Cython core with a pure-Python fallback.

The compiled module is used when it imports; set ``DEJITTER_PURE_PYTHON=1``
to force the fallback. Both expose identical functions and produce identical
draws for identical generators.
"""
import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("DEJITTER_PURE_PYTHON"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as kernels
except ImportError:
    kernels = _kernels_py

BACKEND = kernels.BACKEND

(REJ_TRIES, REJ_ACCEPTS, FALLBACKS, SLICE_DRAWS, SHRINKS,
 TN_INVERSION, TN_EXPONENTIAL, TN_UNIFORM, TN_REJECTS) = range(9)
N_STATS = 9
STAT_NAMES = ("rejection_tries", "rejection_accepts", "rejection_fallbacks", "slice_draws",
              "slice_shrinks", "tn_inversion", "tn_exponential", "tn_uniform", "tn_rejections")
MODES = {"rejection": 0, "slice": 1}


def get_backend(name=None):
    """Return the kernel module: ``"cython"``, ``"python"`` or ``None`` for the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def new_stats():
    return np.zeros(N_STATS, dtype=np.int64)


def stats_dict(stats):
    return {name: int(v) for name, v in zip(STAT_NAMES, stats)}
