"""Kernel backend selection.

The compiled kernels (``ratl._cykern``) are used when importable; the
pure-Python reference module is the fallback. Setting the environment
variable ``RATL_FORCE_PYTHON=1`` before import pins the reference
implementation (used by the cross-backend equivalence tests and the
benchmark).
"""
from __future__ import annotations

import math
import os

import numpy as np

from . import _pykern

if os.environ.get("RATL_FORCE_PYTHON") == "1":
    impl = _pykern
else:
    try:
        from . import _cykern as impl  # type: ignore[no-redef]
    except ImportError:
        impl = _pykern

KIND_CODES = {"mf": _pykern.KIND_MF, "zf": _pykern.KIND_ZF, "wf": _pykern.KIND_WF}


def backend_name() -> str:
    return impl.BACKEND


def sici(x: float) -> tuple[float, float]:
    return impl.sici(x)


def j0(x: float) -> float:
    return impl.j0(x)


def sum_rate_rows(
    h_port: np.ndarray,
    rows: np.ndarray,
    kind: int,
    p_max: float,
    sigma2: float,
) -> float:
    """Dispatch to the active kernel, keeping reference semantics.

    The compiled ZF branch signals near-rank-deficiency with NaN; those
    calls re-run on the pure-Python pseudo-inverse route so both backends
    agree on every input.
    """
    value = impl.sum_rate_rows(h_port, rows, kind, p_max, sigma2)
    if math.isnan(value):
        return _pykern.sum_rate_rows(h_port, rows, kind, p_max, sigma2)
    return value
