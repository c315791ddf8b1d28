"""Backend selection for the numeric kernels.

The compiled (numba) backend is the default when importable; set
TOKENPNL_BACKEND=numpy to force the pure-numpy path, or =numba to fail loudly
if compilation is unavailable.  Both backends implement identical contracts
and produce bit-identical results.
"""

from __future__ import annotations

import os

from ..model import ConfigError
from . import numpy_backend

_VALID = ("numba", "numpy")


def load_backend(name: str):
    """Import one backend module by name ('numba' or 'numpy')."""
    if name == "numpy":
        return numpy_backend
    if name == "numba":
        from . import numba_backend

        return numba_backend
    raise ConfigError(f"unknown kernel backend {name!r}, expected one of {_VALID}")


def _select():
    requested = os.environ.get("TOKENPNL_BACKEND", "").strip().lower()
    if requested and requested not in _VALID:
        raise ConfigError(
            f"TOKENPNL_BACKEND={requested!r} is not valid; expected one of {_VALID}"
        )
    if requested == "numpy":
        return numpy_backend
    try:
        return load_backend("numba")
    except ImportError:
        if requested == "numba":
            raise
        return numpy_backend


_impl = _select()

BACKEND = _impl.NAME
forward_fill = _impl.forward_fill
grouped_median = _impl.grouped_median
expand_ledger_days = _impl.expand_ledger_days

__all__ = [
    "BACKEND",
    "expand_ledger_days",
    "forward_fill",
    "grouped_median",
    "load_backend",
]
