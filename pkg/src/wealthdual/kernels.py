"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
twin is used.  Set ``WEALTHDUAL_BACKEND=python`` to force the fallback.
"""

import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)

_compiled = None
if os.environ.get("WEALTHDUAL_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        log.info("compiled kernels unavailable, using pure-Python fallback")

_active = _compiled if _compiled is not None else _kernels_py

BACKEND = _active.BACKEND
pair_endpoints = _active.pair_endpoints
nagent_endpoints = _active.nagent_endpoints
ctmc_endpoints = _active.ctmc_endpoints
em_affine = _active.em_affine
eps_infinity = _active.eps_infinity


def backends():
    """Mapping of available backend name to module."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
