"""Kernel backend selection: compiled extension if present, numpy fallback otherwise.

Set LIFEMOMENTS_PURE_PYTHON=1 to force the fallback (used by the parity
tests and the benchmark).
"""

import os

from . import _fallback

_impl = _fallback
if os.environ.get("LIFEMOMENTS_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        pass

BACKEND = _impl.BACKEND
fold_total = _impl.fold_total
fold_suffix = _impl.fold_suffix
rk4_backward = _impl.rk4_backward
eval_program = _impl.eval_program


def backends():
    """Mapping of available backend name -> module (for benchmarks/tests)."""
    out = {_fallback.BACKEND: _fallback}
    try:
        from . import _core

        out[_core.BACKEND] = _core
    except ImportError:
        pass
    return out
