"""Kernel backend selection.

The compiled extension is preferred; ``SHIFTPRESS_PURE=1`` or a missing
build selects the numpy fallback.  Both backends expose the same four
functions and are parity-tested against each other.
"""

import os

from . import _fallback

if os.environ.get("SHIFTPRESS_PURE"):
    _impl = _fallback
else:
    try:
        from . import _native as _impl
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND
power_iteration = _impl.power_iteration
count_blocks = _impl.count_blocks
birkhoff_sums = _impl.birkhoff_sums
sample_path = _impl.sample_path

__all__ = ["BACKEND", "power_iteration", "count_blocks", "birkhoff_sums", "sample_path"]
