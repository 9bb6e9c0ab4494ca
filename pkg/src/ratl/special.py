"""In-house special functions: sine/cosine integrals and Bessel J0.

Thin validating wrappers over the kernel backend. Both functions are
implemented from scratch (series + continued-fraction / large-argument
expansions) and are pinned against adaptive-quadrature oracles in the
test suite and in ``ratl verify --suite special_fns``.
"""
from __future__ import annotations

import numpy as np

from . import backend

EULER_GAMMA = 0.5772156649015329


def sin_cos_integrals(x: float) -> tuple[float, float]:
    """Return (Si(x), Ci(x)).

    Si(x) = int_0^x sin(t)/t dt; Ci(x) = -int_x^inf cos(t)/t dt.
    Requires x > 0: Ci has a logarithmic singularity at the origin.
    """
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("sin_cos_integrals requires a finite argument")
    return backend.sici(x)


def bessel_j0(x: float) -> float:
    """Bessel function of the first kind, order zero (even in x)."""
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("bessel_j0 requires a finite argument")
    return backend.j0(x)


def bessel_j0_array(x: np.ndarray) -> np.ndarray:
    """Elementwise `bessel_j0` for a real array."""
    flat = np.asarray(x, dtype=float).ravel()
    out = np.array([backend.j0(float(v)) for v in flat])
    return out.reshape(np.shape(x))
