"""Pure-numpy implementation of the hot dual-minimization kernel.

Mirrors the compiled Cython module ``doro._kernel``: a bounded Brent scalar
minimizer driving the dual DRO objective

    F(eta) = c * (sum_i w_i * (l_i - eta)_+^{beta_star})^{1/beta_star} + eta

over a loss batch.  The two implementations follow the same algorithm; which
one is active is decided at import time in :mod:`doro.kernel`.
"""
from __future__ import annotations

import math

import numpy as np

IMPLEMENTATION = "python"

_GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))
_SQRT_EPS = math.sqrt(2.2e-16)


def dual_objective(losses, weights, eta, c, beta_star):
    """Evaluate F(eta) on a weighted loss batch."""
    excess = np.maximum(np.asarray(losses, dtype=np.float64) - eta, 0.0)
    if beta_star == 1.0:
        moment = float(np.dot(weights, excess))
        return c * moment + eta
    moment = float(np.dot(weights, excess**beta_star))
    return c * moment ** (1.0 / beta_star) + eta


def brent_min(f, a, b, xatol, maxiter):
    """Bounded Brent minimization (golden section + parabolic interpolation).

    Returns (x, f(x), evaluations, converged).
    """
    x = w = v = a + _GOLDEN * (b - a)
    fx = fw = fv = f(x)
    nfev = 1
    d = e = 0.0
    mid = 0.5 * (a + b)
    tol1 = _SQRT_EPS * abs(x) + xatol / 3.0
    tol2 = 2.0 * tol1

    while abs(x - mid) > tol2 - 0.5 * (b - a):
        if nfev >= maxiter:
            return x, fx, nfev, False
        golden = True
        if abs(e) > tol1:
            # Fit a parabola through (x, fx), (w, fw), (v, fv).
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            r = e
            e = d
            if abs(p) < abs(0.5 * q * r) and p > q * (a - x) and p < q * (b - x):
                golden = False
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if mid >= x else -tol1
        if golden:
            e = (a if x >= mid else b) - x
            d = _GOLDEN * e
        u = x + (d if abs(d) >= tol1 else (tol1 if d >= 0 else -tol1))
        fu = f(u)
        nfev += 1
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv = w, fw
            w, fw = x, fx
            x, fx = u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv = w, fw
                w, fw = u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
        mid = 0.5 * (a + b)
        tol1 = _SQRT_EPS * abs(x) + xatol / 3.0
        tol2 = 2.0 * tol1
    return x, fx, nfev, True


def solve_eta(losses, weights, c, beta_star, lo, hi, xatol, maxiter):
    """Minimize F(eta) over [lo, hi], widening lo while F still decreases there.

    The dual objective is convex, so the left bracket edge only needs to move
    when F is strictly increasing throughout the current bracket.  Returns
    (eta, risk, evaluations, lo, hi); raises ValueError on non-convergence.
    """
    losses = np.asarray(losses, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)

    def f(eta):
        return dual_objective(losses, weights, eta, c, beta_star)

    span = hi - lo
    if span <= 0.0:
        span = 1.0
        lo = hi - span
    for _ in range(90):
        probe = lo + 1e-3 * span
        if f(lo) >= f(probe) - 1e-14 * (1.0 + abs(f(lo))):
            break
        lo -= span
        span = hi - lo
    eta, risk, nfev, converged = brent_min(f, lo, hi, xatol, maxiter)
    if not converged:
        raise ValueError(
            f"eta search did not converge within {maxiter} evaluations "
            f"(best eta={eta}, risk={risk})"
        )
    return eta, risk, nfev, lo, hi
