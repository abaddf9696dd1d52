"""Episode kernels: compiled extension when available, pure Python otherwise.

Set HETPRICING_PURE=1 to force the fallback (used by the benchmark and the
backend-equivalence tests).
"""

import os

from . import _pure

if os.environ.get("HETPRICING_PURE"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _speedups as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

demand_profile = _impl.demand_profile
zoomv_episode = _impl.zoomv_episode
ucb_episode = _impl.ucb_episode

__all__ = ["BACKEND", "demand_profile", "zoomv_episode", "ucb_episode"]
