"""Backend selection for the hot kernels.

numba is used when importable unless ``CAUSAL_CVAR_NO_NUMBA`` is set to a
truthy value, in which case the vectorised numpy fallback is used. Both
backends expose the same functions; :func:`get_backend` returns either one
explicitly (tests and the benchmark compare them).
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_numpy

_FALSEY = {"", "0", "false", "no", "off"}


def _numba_disabled() -> bool:
    return os.environ.get("CAUSAL_CVAR_NO_NUMBA", "").strip().lower() not in _FALSEY


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        name = "numpy" if _numba_disabled() or not numba_available() else "numba"
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba
        return _kernels_numba
    raise ValueError(f"unknown kernel backend {name!r}")


backend = get_backend()
BACKEND_NAME = backend.NAME

greedy_fill = backend.greedy_fill
cvar_tail_batch = backend.cvar_tail_batch
do_ratio_eval = backend.do_ratio_eval
do_grid_extreme = backend.do_grid_extreme
cvar_grid_extremes = backend.cvar_grid_extremes
optimistic_cvar_batch = backend.optimistic_cvar_batch
run_bandit = backend.run_bandit
compensated_cumsum = backend.compensated_cumsum
