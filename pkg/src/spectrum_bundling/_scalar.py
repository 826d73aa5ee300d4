"""Scalar root finding and maximization used throughout the package."""

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def bisect_increasing(f, lo, hi, tol=1e-12, max_iter=200):
    """Root of a nondecreasing ``f`` on ``[lo, hi]``; assumes ``f(lo) <= 0 <= f(hi)``."""
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_max(f, a, b, tol=1e-10):
    """Maximize a unimodal ``f`` on ``[a, b]``. Returns ``(x, f(x))``.

    Endpoints are checked too, since the maximizer often sits on the boundary.
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc >= fd else (d, fd)
    return x, fx
