# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dual-minimization kernel (mirror of ``doro._kernel_py``)."""

from libc.math cimport fabs, pow, sqrt, INFINITY

import numpy as np

IMPLEMENTATION = "cython"

cdef double _GOLDEN = 0.5 * (3.0 - sqrt(5.0))
cdef double _SQRT_EPS = sqrt(2.2e-16)


cdef double _objective(double[::1] losses, double[::1] weights, double eta,
                       double c, double beta_star) nogil:
    cdef Py_ssize_t i, n = losses.shape[0]
    cdef double moment = 0.0
    cdef double excess
    if beta_star == 1.0:
        for i in range(n):
            excess = losses[i] - eta
            if excess > 0.0:
                moment += weights[i] * excess
        return c * moment + eta
    if beta_star == 2.0:
        for i in range(n):
            excess = losses[i] - eta
            if excess > 0.0:
                moment += weights[i] * excess * excess
        return c * sqrt(moment) + eta
    for i in range(n):
        excess = losses[i] - eta
        if excess > 0.0:
            moment += weights[i] * pow(excess, beta_star)
    return c * pow(moment, 1.0 / beta_star) + eta


def dual_objective(losses, weights, double eta, double c, double beta_star):
    """Evaluate F(eta) on a weighted loss batch."""
    cdef double[::1] l = np.ascontiguousarray(losses, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    return _objective(l, w, eta, c, beta_star)


def brent_min(f, double a, double b, double xatol, int maxiter):
    """Bounded Brent minimization for a Python callable (parity helper)."""
    cdef double x, wp, v, fx, fw, fv, d, e, mid, tol1, tol2, r, q, p, u, fu
    cdef int nfev
    cdef bint golden
    x = wp = v = a + _GOLDEN * (b - a)
    fx = fw = fv = f(x)
    nfev = 1
    d = e = 0.0
    mid = 0.5 * (a + b)
    tol1 = _SQRT_EPS * fabs(x) + xatol / 3.0
    tol2 = 2.0 * tol1
    while fabs(x - mid) > tol2 - 0.5 * (b - a):
        if nfev >= maxiter:
            return x, fx, nfev, False
        golden = True
        if fabs(e) > tol1:
            r = (x - wp) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - wp) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = fabs(q)
            r = e
            e = d
            if fabs(p) < fabs(0.5 * q * r) and p > q * (a - x) and p < q * (b - x):
                golden = False
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if mid >= x else -tol1
        if golden:
            e = (a if x >= mid else b) - x
            d = _GOLDEN * e
        if fabs(d) >= tol1:
            u = x + d
        else:
            u = x + (tol1 if d >= 0 else -tol1)
        fu = f(u)
        nfev += 1
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv = wp, fw
            wp, fw = x, fx
            x, fx = u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or wp == x:
                v, fv = wp, fw
                wp, fw = u, fu
            elif fu <= fv or v == x or v == wp:
                v, fv = u, fu
        mid = 0.5 * (a + b)
        tol1 = _SQRT_EPS * fabs(x) + xatol / 3.0
        tol2 = 2.0 * tol1
    return x, fx, nfev, True


def solve_eta(losses, weights, double c, double beta_star, double lo,
              double hi, double xatol, int maxiter):
    """Minimize F(eta) over [lo, hi] with automatic left-bracket widening."""
    cdef double[::1] l = np.ascontiguousarray(losses, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double span, probe, flo, fprobe
    cdef double x, wp, v, fx, fw, fv, d, e, mid, tol1, tol2, r, q, p, u, fu
    cdef int nfev, widen
    cdef bint golden, converged
    cdef double a, b

    span = hi - lo
    if span <= 0.0:
        span = 1.0
        lo = hi - span
    for widen in range(90):
        probe = lo + 1e-3 * span
        flo = _objective(l, w, lo, c, beta_star)
        fprobe = _objective(l, w, probe, c, beta_star)
        if flo >= fprobe - 1e-14 * (1.0 + fabs(flo)):
            break
        lo -= span
        span = hi - lo

    a = lo
    b = hi
    x = wp = v = a + _GOLDEN * (b - a)
    fx = fw = fv = _objective(l, w, x, c, beta_star)
    nfev = 1
    d = e = 0.0
    mid = 0.5 * (a + b)
    tol1 = _SQRT_EPS * fabs(x) + xatol / 3.0
    tol2 = 2.0 * tol1
    converged = True
    while fabs(x - mid) > tol2 - 0.5 * (b - a):
        if nfev >= maxiter:
            converged = False
            break
        golden = True
        if fabs(e) > tol1:
            r = (x - wp) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - wp) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = fabs(q)
            r = e
            e = d
            if fabs(p) < fabs(0.5 * q * r) and p > q * (a - x) and p < q * (b - x):
                golden = False
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if mid >= x else -tol1
        if golden:
            e = (a if x >= mid else b) - x
            d = _GOLDEN * e
        if fabs(d) >= tol1:
            u = x + d
        else:
            u = x + (tol1 if d >= 0 else -tol1)
        fu = _objective(l, w, u, c, beta_star)
        nfev += 1
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv = wp, fw
            wp, fw = x, fx
            x, fx = u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or wp == x:
                v, fv = wp, fw
                wp, fw = u, fu
            elif fu <= fv or v == x or v == wp:
                v, fv = u, fu
        mid = 0.5 * (a + b)
        tol1 = _SQRT_EPS * fabs(x) + xatol / 3.0
        tol2 = 2.0 * tol1
    if not converged:
        raise ValueError(
            f"eta search did not converge within {maxiter} evaluations "
            f"(best eta={x}, risk={fx})"
        )
    return x, fx, nfev, lo, hi
