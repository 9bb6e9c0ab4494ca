# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: sine/cosine integrals, Bessel J0, and the sum-rate
fitness evaluation that dominates the port-selection search loops.

Semantics mirror ``ratl._pykern`` exactly, with one documented exception:
the ZF branch of ``sum_rate_rows`` refuses near-rank-deficient Gram
matrices by returning NaN, and ``ratl.backend`` falls back to the
pure-Python pseudo-inverse route for that call.
"""
import numpy as np

from libc.math cimport M_PI, cos, fabs, log, log2, sin, sqrt

BACKEND = "cython"

KIND_MF = 0
KIND_ZF = 1
KIND_WF = 2

cdef double EULER_GAMMA = 0.5772156649015329
cdef double SICI_SEAM = 6.0
cdef double J0_SEAM = 12.0


cdef void _sici_c(double x, double *si_out, double *ci_out):
    cdef double si, ci, term
    cdef double complex b, c, d, h, delta
    cdef int k, i
    cdef double a
    if x < SICI_SEAM:
        si = 0.0
        term = x
        k = 0
        while True:
            si += term / (2 * k + 1)
            term *= -x * x / ((2 * k + 2) * (2 * k + 3))
            k += 1
            if fabs(term) < 1e-18 * max(1.0, fabs(si)):
                break
        ci = EULER_GAMMA + log(x)
        term = -x * x / 2.0
        k = 1
        while True:
            ci += term / (2 * k)
            term *= -x * x / ((2 * k + 1) * (2 * k + 2))
            k += 1
            if fabs(term) < 1e-18 * max(1.0, fabs(ci)):
                break
        si_out[0] = si
        ci_out[0] = ci
        return
    # Lentz continued fraction for E1(ix).
    b = 1.0 + 1j * x
    c = 1e300
    d = 1.0 / b
    h = d
    for i in range(2, 10000):
        a = -((i - 1.0) * (i - 1.0))
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = h * delta
        if abs(delta - 1.0) < 1e-16:
            break
    h = h * (cos(x) - 1j * sin(x))
    si_out[0] = M_PI / 2 + h.imag
    ci_out[0] = -h.real


cdef double _j0_c(double x):
    cdef double y, term, s, chi, p, q, a, t, last
    cdef int k, m
    x = fabs(x)
    if x < J0_SEAM:
        y = x * x / 4.0
        term = 1.0
        s = 1.0
        k = 0
        while True:
            k += 1
            term *= -y / (<double>k * k)
            s += term
            if fabs(term) < 1e-18 * max(1.0, fabs(s)):
                break
        return s
    chi = x - M_PI / 4.0
    p = 1.0
    q = 0.0
    a = 1.0
    last = 1e308
    m = 0
    while m < 60:
        m += 1
        a *= (2.0 * m - 1) * (2.0 * m - 1) / (8.0 * m)
        t = a / x ** m
        if t >= last:
            break
        last = t
        if m % 2 == 1:
            if ((m - 1) // 2) % 2 == 0:
                q -= t
            else:
                q += t
        else:
            if (m // 2) % 2 == 0:
                p += t
            else:
                p -= t
    return sqrt(2.0 / (M_PI * x)) * (cos(chi) * p - sin(chi) * q)


def sici(double x):
    """Return (Si(x), Ci(x)) for x > 0."""
    cdef double si, ci
    if x <= 0.0:
        raise ValueError("sici requires x > 0 (the cosine integral diverges at 0)")
    _sici_c(x, &si, &ci)
    return si, ci


def j0(double x):
    """Bessel function of the first kind, order zero."""
    return _j0_c(x)


cdef int _inv_inplace(double complex[:, :] work, double complex[:, :] out, double tol):
    """Gauss-Jordan inverse of `work` (destroyed) into `out`.

    Returns -1 when a pivot magnitude falls below `tol`.
    """
    cdef Py_ssize_t n = work.shape[0]
    cdef Py_ssize_t i, j, col, piv
    cdef double best, mag
    cdef double complex factor, tmp
    for i in range(n):
        for j in range(n):
            out[i, j] = 1.0 if i == j else 0.0
    for col in range(n):
        piv = col
        best = abs(work[col, col])
        for i in range(col + 1, n):
            mag = abs(work[i, col])
            if mag > best:
                best = mag
                piv = i
        if best < tol:
            return -1
        if piv != col:
            for j in range(n):
                tmp = work[col, j]
                work[col, j] = work[piv, j]
                work[piv, j] = tmp
                tmp = out[col, j]
                out[col, j] = out[piv, j]
                out[piv, j] = tmp
        factor = work[col, col]
        for j in range(n):
            work[col, j] = work[col, j] / factor
            out[col, j] = out[col, j] / factor
        for i in range(n):
            if i == col:
                continue
            factor = work[i, col]
            if factor != 0:
                for j in range(n):
                    work[i, j] = work[i, j] - factor * work[col, j]
                    out[i, j] = out[i, j] - factor * out[col, j]
    return 0


def sum_rate_rows(
    double complex[:, :] h_port,
    Py_ssize_t[:] rows,
    int kind,
    double p_max,
    double sigma2,
):
    """Compiled twin of ``_pykern.sum_rate_rows`` (NaN = caller fallback)."""
    cdef Py_ssize_t mr = rows.shape[0]
    cdef Py_ssize_t n_users = h_port.shape[1]
    cdef Py_ssize_t i, j, m, r
    cdef double trace, alpha2, sig, interf, rate, mag, gmax, tol
    cdef double complex acc
    if kind != KIND_MF and kind != KIND_ZF and kind != KIND_WF:
        raise ValueError(f"unknown precoder kind code {kind}")
    if p_max <= 0.0:
        return 0.0

    hs_arr = np.empty((mr, n_users), dtype=np.complex128)
    cdef double complex[:, :] hs = hs_arr
    for m in range(mr):
        r = rows[m]
        for j in range(n_users):
            hs[m, j] = h_port[r, j]

    cdef double complex[:, :] f = hs
    cdef double complex[:, :] gram, ginv
    if kind != KIND_MF:
        gram_arr = np.empty((n_users, n_users), dtype=np.complex128)
        ginv_arr = np.empty((n_users, n_users), dtype=np.complex128)
        gram = gram_arr
        ginv = ginv_arr
        for i in range(n_users):
            for j in range(n_users):
                acc = 0.0
                for m in range(mr):
                    acc += hs[m, i].conjugate() * hs[m, j]
                gram[i, j] = acc
        if kind == KIND_WF:
            for i in range(n_users):
                gram[i, i] = gram[i, i] + sigma2 * n_users / p_max
        gmax = 0.0
        for i in range(n_users):
            for j in range(n_users):
                mag = abs(gram[i, j])
                if mag > gmax:
                    gmax = mag
        if gmax <= 0.0:
            return 0.0
        tol = 1e-12 * gmax
        if _inv_inplace(gram, ginv, tol) != 0:
            if kind == KIND_ZF:
                return float("nan")
            return 0.0
        f_arr = np.empty((mr, n_users), dtype=np.complex128)
        f = f_arr
        for m in range(mr):
            for j in range(n_users):
                acc = 0.0
                for i in range(n_users):
                    acc += hs[m, i] * ginv[i, j]
                f[m, j] = acc

    trace = 0.0
    for m in range(mr):
        for j in range(n_users):
            acc = f[m, j]
            trace += acc.real * acc.real + acc.imag * acc.imag
    if trace <= 0.0:
        return 0.0
    alpha2 = p_max / trace

    rate = 0.0
    for i in range(n_users):
        sig = 0.0
        interf = 0.0
        for j in range(n_users):
            acc = 0.0
            for m in range(mr):
                acc += hs[m, i].conjugate() * f[m, j]
            mag = alpha2 * (acc.real * acc.real + acc.imag * acc.imag)
            if i == j:
                sig = mag
            else:
                interf += mag
        rate += log2(1.0 + sig / (interf + sigma2))
    return rate
