"""Pick the compiled kernels when available, else the pure-Python ones.

Set ``TOOLLOC_PURE=1`` to force the fallback.
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

kernels = _pykernels
NAME = "python"

if os.environ.get("TOOLLOC_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels

        kernels = _ckernels
        NAME = "cython"
    except ImportError:  # pragma: no cover - depends on build environment
        log.debug("compiled kernels unavailable, using pure-Python fallback")


def available_backends():
    """Map of backend name to kernel module, for benchmarks and equivalence tests."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:  # pragma: no cover
        pass
    return out
