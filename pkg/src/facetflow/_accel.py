"""Numba switch.

Kernels in :mod:`facetflow.kernels` are compiled with ``numba.njit`` unless
``FACETFLOW_NUMBA`` is set to ``0``/``false``/``off`` or numba is missing, in
which case the vectorized numpy variants are used instead.
"""
from __future__ import annotations

import logging
import os

_OFF = {"0", "false", "no", "off"}

try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("FACETFLOW_NUMBA", "1").strip().lower() not in _OFF


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)
