"""Inexact line search along a descent direction.

Strong Wolfe bracketing and zoom (cubic interpolation, bisection safeguard),
accepting the approximate Wolfe conditions when objective differences are
lost in rounding, and a halving fallback that only asks for sufficient
decrease.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["LineSearchResult", "wolfe_search"]

MAX_HALVINGS = 60
# approximate Wolfe: accept phi'(a) <= (2*delta - 1) phi'(0) when phi(a) <= phi(0)
_APPROX_DELTA = 0.1


@dataclass
class LineSearchResult:
    alpha: float
    value: float
    slope: float
    n_evals: int
    # "wolfe", "approx-wolfe", "bound", "armijo" or "failed"
    status: str
    payload: object = None

    @property
    def ok(self) -> bool:
        return self.status != "failed"


def _cubic_min(a, fa, da, b, fb, db):
    """Minimiser of the cubic interpolating (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0.0:
        return None
    t = b - (b - a) * (db + d2 - d1) / denom
    return t if math.isfinite(t) else None


def wolfe_search(phi, phi0: float, dphi0: float, alpha0: float = 1.0, c1: float = 1e-4,
                 c2: float = 0.9, alpha_max: float = math.inf, max_halvings: int = MAX_HALVINGS,
                 max_zoom: int = 30) -> LineSearchResult:
    """Find a step along a direction with ``dphi0 < 0``.

    ``phi(alpha)`` returns ``(value, slope, payload)``; the payload of the
    accepted step is handed back so callers can reuse gradients. Steps never
    exceed ``alpha_max``; reaching it with sufficient decrease is accepted
    (status ``"bound"``).
    """
    if not dphi0 < 0.0:
        return LineSearchResult(0.0, phi0, dphi0, 0, "failed")
    evals = 0
    cache = {}

    def ev(a):
        nonlocal evals
        if a not in cache:
            evals += 1
            cache[a] = phi(a)
        return cache[a]

    def armijo(a, fa):
        return fa <= phi0 + c1 * a * dphi0

    def curvature(da):
        return abs(da) <= -c2 * dphi0

    def approx(fa, da):
        return fa <= phi0 and (2.0 * _APPROX_DELTA - 1.0) * dphi0 >= da >= c2 * dphi0

    def done(a, status):
        fa, da, pay = ev(a)
        return LineSearchResult(a, fa, da, evals, status, pay)

    def zoom(lo, flo, dlo, hi, fhi, dhi):
        for _ in range(max_zoom):
            t = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
            lo_b, hi_b = min(lo, hi), max(lo, hi)
            width = hi_b - lo_b
            if t is None or not (lo_b + 0.1 * width <= t <= hi_b - 0.1 * width):
                t = 0.5 * (lo + hi)
            if t == lo or t == hi:
                return None
            ft, dt, _ = ev(t)
            if not armijo(t, ft) or ft >= flo:
                if approx(ft, dt):
                    return done(t, "approx-wolfe")
                hi, fhi, dhi = t, ft, dt
            else:
                if curvature(dt):
                    return done(t, "wolfe")
                if dt * (hi - lo) >= 0.0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo = t, ft, dt
        return None

    a_prev, f_prev, d_prev = 0.0, phi0, dphi0
    a = min(alpha0, alpha_max)
    res = None
    for i in range(40):
        fa, da, _ = ev(a)
        if not math.isfinite(fa):
            res = None
            break
        if not armijo(a, fa) or (i > 0 and fa >= f_prev):
            if approx(fa, da):
                return done(a, "approx-wolfe")
            res = zoom(a_prev, f_prev, d_prev, a, fa, da)
            break
        if curvature(da):
            return done(a, "wolfe")
        if da >= 0.0:
            res = zoom(a, fa, da, a_prev, f_prev, d_prev)
            break
        if a >= alpha_max:
            return done(a, "bound")
        a_prev, f_prev, d_prev = a, fa, da
        a = min(2.0 * a, alpha_max)
    if res is not None:
        return res

    # fallback: plain halving with sufficient decrease
    a = min(alpha0, alpha_max)
    for _ in range(max_halvings):
        fa, da, _ = ev(a)
        if math.isfinite(fa) and (armijo(a, fa) or approx(fa, da)):
            return done(a, "armijo")
        a *= 0.5
    return LineSearchResult(0.0, phi0, dphi0, evals, "failed")
