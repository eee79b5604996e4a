"""Exact HK quantities available when one argument is a Dirac mass.

Also the two limit barycenters (kappa -> 0 and kappa -> infinity), the
concentration constant that bounds barycenter mass, and the L1 norm of the
Cos^2 kernel.
"""
from __future__ import annotations

import functools
import math

import numpy as np
from scipy import integrate, optimize

from .measures import (
    HALF_PI,
    Density1D,
    DiscreteInput,
    InputMeasure,
    ParticleMeasure,
    check_kappa,
    pairwise_distance,
)

__all__ = [
    "hk2_dirac",
    "hellinger2_atomic",
    "hellinger_barycenter",
    "wasserstein_limit_barycenter",
    "concentration_bound",
    "cd_constant",
    "semicoupling_sigma",
]


def _check_point(x, dim):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("point must be finite")
    if dim is not None and x.size != dim:
        raise ValueError("point dimension does not match the measure")
    return x


def _kernel_row(xbar, nu: ParticleMeasure, kappa):
    if nu.size == 0:
        return np.zeros(0)
    d = pairwise_distance(xbar.reshape(1, -1), nu.positions)[0]
    c = np.cos(np.minimum(d / kappa, HALF_PI))
    c[d >= HALF_PI * kappa] = 0.0
    return c * c


def hk2_dirac(m: float, xbar, nu: ParticleMeasure, kappa: float) -> float:
    """HK^2_kappa(m delta_xbar, nu) = m + |nu| - 2 sqrt(m) sqrt(int Cos^2 dnu)."""
    m = float(m)
    if not (math.isfinite(m) and m > 0.0):
        raise ValueError("m must be positive and finite")
    kappa = check_kappa(kappa)
    xbar = _check_point(xbar, nu.dim if nu.size else None)
    k = _kernel_row(xbar, nu, kappa)
    overlap = math.fsum((nu.masses * k).tolist())
    value = m + nu.total_mass - 2.0 * math.sqrt(m) * math.sqrt(overlap)
    # rounding can push the exact-zero case slightly negative
    return max(value, 0.0)


def hellinger2_atomic(mu: ParticleMeasure, nu: ParticleMeasure) -> float:
    """Hellinger distance squared between atomic measures (exact position matching)."""
    table: dict[tuple, list[float]] = {}
    for pos, mass in zip(mu.positions, mu.masses):
        table.setdefault(tuple(pos.tolist()), [0.0, 0.0])[0] += float(mass)
    for pos, mass in zip(nu.positions, nu.masses):
        table.setdefault(tuple(pos.tolist()), [0.0, 0.0])[1] += float(mass)
    return math.fsum((math.sqrt(a) - math.sqrt(b)) ** 2 for a, b in table.values())


def hellinger_barycenter(rho: InputMeasure) -> ParticleMeasure:
    """kappa -> 0 limit: atoms of rho with squared weights; nothing from the diffuse part."""
    if isinstance(rho, DiscreteInput):
        return ParticleMeasure(rho.points, rho.weights ** 2)
    if isinstance(rho, Density1D):
        return ParticleMeasure.empty(1)
    raise TypeError(f"unsupported input measure {type(rho).__name__}")


def wasserstein_limit_barycenter(rho: InputMeasure) -> ParticleMeasure:
    """kappa -> infinity limit: a unit mass at the mean of rho."""
    return ParticleMeasure(rho.mean().reshape(1, -1), np.array([1.0]))


# ---------------------------------------------------------------------------
# concentration constant sup_y rho(B(y, kappa*pi/2))
# ---------------------------------------------------------------------------

def _window_max_1d(x, w, length):
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    csum = np.concatenate([[0.0], np.cumsum(ws)])
    # closed window [xs[i], xs[i] + length]; small slack absorbs rounding of length
    hi = np.searchsorted(xs, xs + length * (1.0 + 1e-12), side="right")
    return float(np.max(csum[hi] - csum[np.arange(xs.size)]))


def _disk_max_2d(points, w, radius):
    from scipy.spatial import cKDTree

    tree = cKDTree(points)
    eps = radius * 1e-12
    best = 0.0
    # a maximising closed disk can be moved until two points sit on its boundary,
    # or it is centred on a point
    for i, p in enumerate(points):
        best = max(best, float(w[tree.query_ball_point(p, radius + eps)].sum()))
    pairs = tree.query_pairs(2.0 * radius, output_type="ndarray")
    if pairs.size:
        a, b = points[pairs[:, 0]], points[pairs[:, 1]]
        mid = 0.5 * (a + b)
        half = 0.5 * np.linalg.norm(b - a, axis=1)
        h = np.sqrt(np.maximum(radius * radius - half * half, 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            normal = np.column_stack([-(b - a)[:, 1], (b - a)[:, 0]]) / (2.0 * half[:, None])
        normal = np.nan_to_num(normal)
        centers = np.vstack([mid + h[:, None] * normal, mid - h[:, None] * normal])
        for idx in tree.query_ball_point(centers, radius + eps):
            best = max(best, float(w[idx].sum()))
    return best


def _density_window(rho: Density1D, radius, tol=1e-9):
    lo, hi = rho.support
    if rho.kind == "uniform":
        return min(1.0, 2.0 * radius / (hi - lo))

    def mass(c):
        return float(rho.interval_mass(c - radius, c + radius))

    grid = np.linspace(lo, hi, 2001)
    vals = rho.interval_mass(grid - radius, grid + radius)
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    best = float(vals[k])
    if b > a:
        res = optimize.minimize_scalar(lambda c: -mass(c), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    # the mass bound only needs an upper bound: pad by the refinement tolerance
    return min(1.0, best + tol)


def concentration_bound(rho: InputMeasure, kappa: float) -> float:
    """C_{rho,kappa} = sup_y rho(B(y, kappa*pi/2))."""
    kappa = check_kappa(kappa)
    radius = HALF_PI * kappa
    if isinstance(rho, DiscreteInput):
        if rho.dim == 1:
            return _window_max_1d(rho.points[:, 0], rho.weights, 2.0 * radius)
        return _disk_max_2d(rho.points, rho.weights, radius)
    if isinstance(rho, Density1D):
        return _density_window(rho, radius)
    raise TypeError(f"unsupported input measure {type(rho).__name__}")


@functools.lru_cache(maxsize=None)
def cd_constant(d: int) -> float:
    """L1 norm of Cos^2(|.|) on R^d."""
    if d == 1:
        return HALF_PI
    if d == 2:
        val, _ = integrate.quad(lambda r: math.cos(r) ** 2 * r, 0.0, HALF_PI,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        return 2.0 * math.pi * val
    raise ValueError(f"dimension {d} not supported (only 1 or 2)")


def semicoupling_sigma(m: float, xbar, nu: ParticleMeasure, kappa: float) -> ParticleMeasure:
    """Second marginal of an optimal plan between m delta_xbar and nu."""
    m = float(m)
    if not (math.isfinite(m) and m > 0.0):
        raise ValueError("m must be positive and finite")
    kappa = check_kappa(kappa)
    xbar = _check_point(xbar, nu.dim if nu.size else None)
    k = _kernel_row(xbar, nu, kappa)
    weighted = nu.masses * k
    total = math.fsum(weighted.tolist())
    if total == 0.0:
        return ParticleMeasure(nu.positions, np.zeros(nu.size))
    return ParticleMeasure(nu.positions, weighted * math.sqrt(m / total))
