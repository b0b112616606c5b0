"""Numeric inner loops with a numba path and a pure-numpy fallback.

The backend is chosen once at import time.  Set ``PHRASEMT_NO_NUMBA=1`` to
force the numpy implementations (also used automatically when numba cannot
be imported).  Both implementations stay importable for comparison.
"""
import os

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PHRASEMT_NO_NUMBA", "0") not in ("1", "true", "yes")

BACKEND = "numba" if USE_NUMBA else "numpy"

from phrasemt.kernels.em import (  # noqa: E402
    e_step,
    e_step_numba,
    e_step_numpy,
    viterbi_links,
    viterbi_links_numba,
    viterbi_links_numpy,
)

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "e_step",
    "e_step_numba",
    "e_step_numpy",
    "viterbi_links",
    "viterbi_links_numba",
    "viterbi_links_numpy",
]
