"""Backend selection for the dead-time hot loop.

Prefers the compiled extension, falls back to the pure-Python reference
when the extension is missing or ``HDCOW_PURE`` is set in the
environment.  Both backends produce bit-identical results; see
``benchmarks/bench_kernels.py`` for the speed comparison.
"""

import os

from . import _ref

if os.environ.get("HDCOW_PURE"):
    _impl = _ref
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _ref

BACKEND = _impl.BACKEND
dead_time_filter = _impl.dead_time_filter

__all__ = ["BACKEND", "dead_time_filter"]
