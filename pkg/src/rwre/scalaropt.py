"""Scalar golden-section minimization and sign-change bisection.

Both routines assume well-behaved inputs (unimodal f for golden section,
bracketing signs for bisection); callers are responsible for brackets.
"""

from __future__ import annotations

import math

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1/phi^2


def golden_min(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Minimize unimodal f on [lo, hi] to absolute argument tolerance tol.

    Returns (argmin, f(argmin)); the endpoints are also evaluated so a
    boundary minimum is never missed.
    """
    a, b = float(lo), float(hi)
    h = b - a
    if h <= tol:
        m = 0.5 * (a + b)
        return _best(f, (a, m, b))
    c = a + INVPHI2 * h
    d = a + INVPHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + INVPHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INVPHI * h
            fd = f(d)
    m = c if fc < fd else d
    return _best(f, (lo, m, hi))


def _best(f, xs) -> tuple[float, float]:
    pairs = [(x, f(x)) for x in xs]
    return min(pairs, key=lambda t: t[1])


def bisect_sign_change(pred, lo: float, hi: float, tol: float) -> float:
    """Find the crossing of a monotone predicate on (lo, hi].

    pred(lo) is assumed True and pred(hi) False; returns the midpoint of the
    final bracket of width <= tol.
    """
    a, b = float(lo), float(hi)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if pred(mid):
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def grow_until(g, start: float, factor: float, cap: float, ok) -> float | None:
    """Smallest t in {start, start*factor, ...} <= cap with ok(g(t)); None if capped."""
    t = float(start)
    while t <= cap:
        if ok(g(t)):
            return t
        t *= factor
    return None
