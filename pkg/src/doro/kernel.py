"""Kernel selection: compiled extension if available, numpy fallback otherwise.

Set ``DORO_FORCE_PY=1`` in the environment to force the pure-Python lane
(used by the parity tests and the benchmark).
"""
from __future__ import annotations

import os

from . import _kernel_py

if os.environ.get("DORO_FORCE_PY") == "1":
    _impl = _kernel_py
else:
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernel_py

IMPLEMENTATION = _impl.IMPLEMENTATION
dual_objective = _impl.dual_objective
brent_min = _impl.brent_min
solve_eta = _impl.solve_eta
