"""Graph kernels used by the equivalence and divergence checkers.

The compiled extension is used when it was built; otherwise, or when
``USOL_PURE_PYTHON=1`` is set, the pure-Python module is used. Both expose
the same functions with identical results.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("USOL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

tau_closure = _impl.tau_closure
saturate = _impl.saturate
refine = _impl.refine
simulation = _impl.simulation
tau_scc = _impl.tau_scc

__all__ = ["BACKEND", "tau_closure", "saturate", "refine", "simulation", "tau_scc"]
