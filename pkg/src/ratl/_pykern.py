"""Pure-Python reference kernels.

``ratl._cykern`` (Cython) mirrors every routine in this module with
identical semantics; ``ratl.backend`` selects whichever is available.
Keep the two implementations in lockstep — the cross-backend equivalence
tests enforce it.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

EULER_GAMMA = 0.5772156649015329

# Si/Ci: Maclaurin series below, Lentz continued fraction above.
_SICI_SEAM = 6.0
# J0: power series below, large-argument expansion above. The seam is
# placed where both branches meet the 1e-12 absolute-error target.
_J0_SEAM = 12.0

# Precoder kind codes shared with the compiled twin.
KIND_MF = 0
KIND_ZF = 1
KIND_WF = 2


def sici(x: float) -> tuple[float, float]:
    """Sine and cosine integrals (Si(x), Ci(x)) for x > 0.

    Si(x) = int_0^x sin(t)/t dt, Ci(x) = -int_x^inf cos(t)/t dt.
    Absolute error well below 1e-10 on [1e-3, 1e3] (validated against
    adaptive quadrature and arbitrary-precision references).
    """
    if x <= 0.0:
        raise ValueError("sici requires x > 0 (the cosine integral diverges at 0)")
    if x < _SICI_SEAM:
        si = 0.0
        term = x
        k = 0
        while True:
            si += term / (2 * k + 1)
            term *= -x * x / ((2 * k + 2) * (2 * k + 3))
            k += 1
            if abs(term) < 1e-18 * max(1.0, abs(si)):
                break
        ci = EULER_GAMMA + math.log(x)
        term = -x * x / 2.0
        k = 1
        while True:
            ci += term / (2 * k)
            term *= -x * x / ((2 * k + 1) * (2 * k + 2))
            k += 1
            if abs(term) < 1e-18 * max(1.0, abs(ci)):
                break
        return si, ci
    # Lentz's method on the continued fraction for E1(ix); then
    # Ci(x) = -Re E1(ix), Si(x) = pi/2 + Im E1(ix).
    b = complex(1.0, x)
    c = complex(1e300, 0.0)
    d = 1.0 / b
    h = d
    for i in range(2, 10000):
        a = -((i - 1) ** 2)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    h *= complex(math.cos(x), -math.sin(x))
    return math.pi / 2 + h.imag, -h.real


def j0(x: float) -> float:
    """Bessel function of the first kind, order zero.

    Power series below the seam; beyond it the large-argument expansion
    J0(x) = sqrt(2/(pi x)) (P cos(chi) - Q sin(chi)), chi = x - pi/4,
    truncated at its smallest term. Absolute error <= ~1e-12 everywhere.
    """
    x = abs(x)
    if x < _J0_SEAM:
        y = x * x / 4.0
        term = 1.0
        s = 1.0
        k = 0
        while True:
            k += 1
            term *= -y / (k * k)
            s += term
            if abs(term) < 1e-18 * max(1.0, abs(s)):
                break
        return s
    chi = x - math.pi / 4.0
    p = 1.0
    q = 0.0
    a = 1.0
    last = math.inf
    m = 0
    while m < 60:
        m += 1
        a *= (2 * m - 1) ** 2 / (8.0 * m)
        t = a / x**m
        if t >= last:
            break
        last = t
        if m % 2 == 1:
            # Q = -a1/x + a3/x^3 - a5/x^5 + ...
            q -= (-1) ** ((m - 1) // 2) * t
        else:
            # P = 1 - a2/x^2 + a4/x^4 - ...
            p += (-1) ** (m // 2) * t
    return math.sqrt(2.0 / (math.pi * x)) * (math.cos(chi) * p - math.sin(chi) * q)


def sum_rate_rows(
    h_port: np.ndarray,
    rows: np.ndarray,
    kind: int,
    p_max: float,
    sigma2: float,
) -> float:
    """Sum rate of the row-gathered channel under a normalized precoder.

    Parameters
    ----------
    h_port : complex [L, K]
        Port-level channel matrix (column per user).
    rows : int [Mr]
        Row indices to gather (the selected ports).
    kind : int
        KIND_MF, KIND_ZF or KIND_WF.
    p_max, sigma2 : float
        Transmit power budget and per-user noise power.

    Returns
    -------
    float
        sum_k log2(1 + gamma_k) for the gathered channel, with the
        precoder scaled to use the power budget exactly. Rank-deficient
        channels under ZF are handled by truncating the non-served
        directions (pseudo-inverse with relative cutoff 1e-10).
    """
    hs = h_port[rows, :]
    n_users = hs.shape[1]
    if p_max <= 0.0:
        return 0.0
    if kind == KIND_MF:
        f = hs
    elif kind == KIND_ZF:
        gram = hs.conj().T @ hs
        f = hs @ np.linalg.pinv(gram, rcond=1e-10, hermitian=True)
    elif kind == KIND_WF:
        zeta = sigma2 * n_users / p_max
        gram = hs.conj().T @ hs + zeta * np.eye(n_users)
        f = hs @ np.linalg.inv(gram)
    else:
        raise ValueError(f"unknown precoder kind code {kind}")
    trace = np.vdot(f, f).real
    if trace <= 0.0:
        return 0.0
    alpha2 = p_max / trace
    cross = alpha2 * np.abs(hs.conj().T @ f) ** 2  # [k, i] = |h_k^H w_i|^2
    signal = np.diagonal(cross).copy()
    interference = cross.sum(axis=1) - signal
    gamma = signal / (interference + sigma2)
    return float(np.log2(1.0 + gamma).sum())
