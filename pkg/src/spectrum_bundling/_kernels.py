"""Compiled inner loop of the Wardrop solver.

The reduced systems are tiny (usually two or three variables) and solved
thousands of times inside a best-response search, so interpreter and numpy
call overhead dominate. The kernel below is a loop-level transcription of
the projected Newton iteration in :mod:`spectrum_bundling.wardrop`.
"""

import numpy as np
from numba import njit

CONVERGED = 0
STALLED = 1
EXHAUSTED = 2


@njit(cache=True)
def _g(u, k2, power):
    if power == 1.0:
        return k2 * u
    return k2 * u ** power


@njit(cache=True)
def _dg(u, k2, power):
    if power == 1.0:
        return k2
    return k2 * power * u ** (power - 1.0)


@njit(cache=True)
def _G(u, k2, power):
    p1 = power + 1.0
    return k2 * u ** p1 / p1


@njit(cache=True)
def _totals(y, n, w):
    Q = 0.0
    L = 0.0
    for c in range(y.shape[0]):
        Q += n[c] * y[c]
        L += n[c] * w[c] * y[c]
    return Q, L


@njit(cache=True)
def gradient(y, price, s, b, w, n, k2, power, A, k1, invW, has_w):
    Q, L = _totals(y, n, w)
    shared = _g(L * invW, k2, power) if has_w else 0.0
    demand = max(A - k1 * Q, 0.0)
    F = np.empty_like(y)
    for c in range(y.shape[0]):
        cost = price[c]
        if s[c] > 0.0:
            cost += s[c] * _g(s[c] * y[c] / b[c], k2, power)
        cost += w[c] * shared
        F[c] = cost - demand
    return F


@njit(cache=True)
def potential(y, price, s, b, w, n, k2, power, A, k1, Qmax, W, has_w):
    Q, L = _totals(y, n, w)
    val = 0.0
    for c in range(y.shape[0]):
        term = price[c] * y[c]
        if s[c] > 0.0:
            term += b[c] * _G(s[c] * y[c] / b[c], k2, power)
        val += n[c] * term
    if has_w:
        val += W * _G(L / W, k2, power)
    q = min(Q, Qmax)
    return val - (A * q - 0.5 * k1 * q * q)


@njit(cache=True)
def _solve_small(J, rhs):
    """Gaussian elimination with partial pivoting; returns (x, ok)."""
    m = rhs.shape[0]
    a = J.copy()
    x = rhs.copy()
    for col in range(m):
        piv = col
        for r in range(col + 1, m):
            if abs(a[r, col]) > abs(a[piv, col]):
                piv = r
        if abs(a[piv, col]) < 1e-300:
            return x, False
        if piv != col:
            for k in range(m):
                a[col, k], a[piv, k] = a[piv, k], a[col, k]
            x[col], x[piv] = x[piv], x[col]
        for r in range(col + 1, m):
            f = a[r, col] / a[col, col]
            if f != 0.0:
                for k in range(col, m):
                    a[r, k] -= f * a[col, k]
                x[r] -= f * x[col]
    for r in range(m - 1, -1, -1):
        acc = x[r]
        for k in range(r + 1, m):
            acc -= a[r, k] * x[k]
        x[r] = acc / a[r, r]
    return x, True


@njit(cache=True)
def newton(y, price, s, b, w, n, k2, power, A, k1, Qmax, W, has_w, tol, max_iter):
    """Projected Newton with Armijo backtracking on the potential.

    Returns ``(y, iterations, status)``. ``STALLED`` means the line search
    failed to make progress and the caller should take a coordinate sweep.
    """
    size = y.shape[0]
    invW = 1.0 / W if has_w else 0.0
    it = 0
    while it < max_iter:
        it += 1
        F = gradient(y, price, s, b, w, n, k2, power, A, k1, invW, has_w)
        res = 0.0
        gap = 0.0
        for c in range(size):
            res = max(res, abs(min(y[c], F[c])))
            gap = max(gap, abs(y[c] - max(y[c] - F[c], 0.0)))
        if res <= tol:
            return y, it, CONVERGED
        eps = min(1e-9, gap)

        free = np.empty(size, dtype=np.int64)
        m = 0
        for c in range(size):
            if not (y[c] <= eps and F[c] > 0.0):
                free[m] = c
                m += 1
        d = np.zeros(size)
        if m > 0:
            Q, L = _totals(y, n, w)
            gl = _dg(L * invW, k2, power) * invW if has_w else 0.0
            dem = k1 if Q < Qmax else 0.0
            J = np.empty((m, m))
            rhs = np.empty(m)
            for r in range(m):
                cr = free[r]
                rhs[r] = -F[cr]
                for k in range(m):
                    ck = free[k]
                    J[r, k] = gl * w[cr] * n[ck] * w[ck] + dem * n[ck]
                if s[cr] > 0.0:
                    J[r, r] += s[cr] * s[cr] / b[cr] * _dg(s[cr] * y[cr] / b[cr], k2, power)
                J[r, r] += 1e-15
            sol, ok = _solve_small(J, rhs)
            for r in range(m):
                d[free[r]] = sol[r] if ok else rhs[r]

        phi0 = potential(y, price, s, b, w, n, k2, power, A, k1, Qmax, W, has_w)
        t = 1.0
        accepted = False
        y_new = np.empty(size)
        moved = 0.0
        for _ in range(60):
            slope = 0.0
            moved = 0.0
            for c in range(size):
                y_new[c] = max(y[c] + t * d[c], 0.0)
                step = y_new[c] - y[c]
                slope += n[c] * F[c] * step
                moved = max(moved, abs(step))
            phi = potential(y_new, price, s, b, w, n, k2, power, A, k1, Qmax, W, has_w)
            if phi <= phi0 + 1e-4 * slope + 1e-15 * (1.0 + abs(phi0)):
                accepted = True
                break
            t *= 0.5
        if accepted and moved > 0.0:
            y = y_new
        else:
            return y, it, STALLED
    return y, it, EXHAUSTED
