"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``WARPGREEN_PURE=1`` to
force the pure-Python fallback.
"""

from __future__ import annotations

import os

if os.environ.get("WARPGREEN_PURE", "") not in ("", "0"):
    from warpgreen import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from warpgreen import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from warpgreen import _pykernels as _impl

        BACKEND = "python"

scaled_recurrence = _impl.scaled_recurrence
compensated_cumsum = _impl.compensated_cumsum
fd_residual = _impl.fd_residual
golden_max = _impl.golden_max

__all__ = [
    "BACKEND",
    "scaled_recurrence",
    "compensated_cumsum",
    "fd_residual",
    "golden_max",
]
