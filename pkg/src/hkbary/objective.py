"""Barycenter objective J(nu) = 1 + |nu| - 2 int sqrt(S(x)) drho(x) and its gradient.

``S(x) = sum_j m_j Cos^2(|x - y_j| / kappa)`` is the coverage of ``x`` by the
particles. For a discrete input the integral is a finite sum; for a
:class:`~hkbary.measures.Density1D` it is evaluated by adaptive quadrature with
breakpoints at every ``y_j +- kappa*pi/2`` (where the integrand has kinks).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .measures import (
    HALF_PI,
    Density1D,
    DiscreteInput,
    InputMeasure,
    ParticleMeasure,
    check_kappa,
)
from .quadrature import integrate

__all__ = [
    "ObjectiveValue",
    "Gradient",
    "objective",
    "gradient",
    "evaluate",
    "coverage",
    "density_breakpoints",
    "uncovered_intervals",
    "convexity_probe",
]


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    # S_i at each input atom (discrete inputs only)
    coverage: np.ndarray | None = None


@dataclass(frozen=True)
class Gradient:
    d_mass: np.ndarray
    d_pos: np.ndarray


def _fsum(a) -> float:
    return math.fsum(np.asarray(a, dtype=float).ravel().tolist())


def coverage(points, positions, masses, kappa: float) -> np.ndarray:
    """S at each row of ``points``."""
    vals, _ = kernels.kernel_sums(positions, masses, np.atleast_2d(points), kappa, grad=False)
    return vals


def density_breakpoints(rho: Density1D, positions, kappa: float, extra=()) -> np.ndarray:
    lo, hi = rho.support
    radius = HALF_PI * kappa
    y = np.asarray(positions, dtype=float).reshape(-1)
    pts = np.concatenate([[lo, hi], y - radius, y + radius, y, np.asarray(extra, dtype=float).ravel()])
    pts = pts[(pts >= lo) & (pts <= hi)]
    return np.unique(pts)


def uncovered_intervals(support, centers, radius) -> list[tuple[float, float]]:
    """Closed pieces of ``support`` outside every open interval (c - radius, c + radius).

    Degenerate pieces (a single point where two intervals only touch) are
    reported as (p, p).
    """
    lo, hi = float(support[0]), float(support[1])
    c = np.sort(np.asarray(centers, dtype=float).reshape(-1))
    gaps = []
    reach = lo
    for s, e in zip(c - radius, c + radius):
        if reach > hi:
            break
        if s >= reach:
            gaps.append((reach, min(s, hi)))
        reach = max(reach, e)
    if reach <= hi:
        gaps.append((reach, hi))
    return gaps


def _kernel_matrix_1d(x, y, kappa, grad):
    diff = y[None, :] - x[:, None]
    dist = np.abs(diff)
    inside = dist < HALF_PI * kappa
    s = np.where(inside, dist / kappa, 0.0)
    c = np.where(inside, np.cos(s), 0.0)
    k = c * c
    if not grad:
        return k, None
    # d/dy Cos^2(|x-y|/kappa) = -sin(2|x-y|/kappa)/kappa * sign(y-x)
    dk = np.where(inside, -np.sin(2.0 * s) / kappa * np.sign(diff), 0.0)
    return k, dk


def _discrete_evaluate(rho: DiscreteInput, y, m, kappa, grad):
    S = coverage(rho.points, y, m, kappa)
    S = np.maximum(S, 0.0)
    root = np.sqrt(S)
    value = 1.0 + _fsum(m) - 2.0 * _fsum(rho.weights * root)
    if not grad:
        return value, None, S
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(S > 0.0, rho.weights / root, 0.0)
    F, dF = kernels.kernel_sums(rho.points, coef, y, kappa, grad=True)
    g = Gradient(d_mass=1.0 - F, d_pos=-m[:, None] * dF)
    return value, g, S


def _density_evaluate(rho: Density1D, y, m, kappa, grad):
    y1 = y[:, 0]
    s = y1.size
    brk = density_breakpoints(rho, y1, kappa)
    radius = HALF_PI * kappa
    # F_j diverges when atom j reaches input mass that no particle covers
    blind = np.zeros(s, dtype=bool)
    if grad:
        for a, b in uncovered_intervals(rho.support, y1[m > 0.0], radius):
            blind |= (y1 - radius < b) & (y1 + radius > a)

    def integrand(x):
        k, dk = _kernel_matrix_1d(x, y1, kappa, grad)
        S = np.maximum(k @ m, 0.0)
        root = np.sqrt(S)
        dens = rho.pdf(x)
        cols = [dens * root]
        if grad:
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(S > 0.0, dens / root, 0.0)
            cols.append(np.where(blind, 0.0, k * w[:, None]))
            cols.append(np.where(blind, 0.0, dk * w[:, None]))
        return np.column_stack(cols) if grad else cols[0]

    res = integrate(integrand, brk, tol=rho.tol)
    total = np.atleast_1d(res.value)
    value = 1.0 + _fsum(m) - 2.0 * float(total[0])
    if not grad:
        return value, None, None
    F = np.where(blind, np.inf, total[1:1 + s])
    dF = total[1 + s:1 + 2 * s]
    g = Gradient(d_mass=1.0 - F, d_pos=(-m * dF)[:, None])
    return value, g, None


def evaluate(rho: InputMeasure, positions, masses, kappa: float, grad: bool = True):
    """Array-level evaluation used by the solver.

    Returns ``(value, gradient_or_None, coverage_or_None)``.
    """
    kappa = check_kappa(kappa)
    m = np.ascontiguousarray(masses, dtype=float).reshape(-1)
    y = np.asarray(positions, dtype=float)
    if m.size == 0:
        y = y.reshape(0, rho.dim if isinstance(rho, DiscreteInput) else 1)
    else:
        y = y.reshape(m.size, -1)
    y = np.ascontiguousarray(y)
    if isinstance(rho, DiscreteInput):
        if y.shape[0] and y.shape[1] != rho.dim:
            raise ValueError("particle dimension does not match the input measure")
        return _discrete_evaluate(rho, y, m, kappa, grad)
    if isinstance(rho, Density1D):
        if y.shape[0] and y.shape[1] != 1:
            raise ValueError("densities are one-dimensional")
        return _density_evaluate(rho, y.reshape(-1, 1), m, kappa, grad)
    raise TypeError(f"unsupported input measure {type(rho).__name__}")


def objective(rho: InputMeasure, nu: ParticleMeasure, kappa: float) -> ObjectiveValue:
    value, _, S = evaluate(rho, nu.positions, nu.masses, kappa, grad=False)
    return ObjectiveValue(value=value, coverage=S)


def gradient(rho: InputMeasure, nu: ParticleMeasure, kappa: float) -> Gradient:
    _, g, _ = evaluate(rho, nu.positions, nu.masses, kappa, grad=True)
    return g


def convexity_probe(rho: InputMeasure, nu1: ParticleMeasure, nu2: ParticleMeasure,
                    kappa: float, t: float) -> float:
    """J(t nu1 + (1-t) nu2) - [t J(nu1) + (1-t) J(nu2)]; never positive for a convex J."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    dim = nu1.dim if nu1.size else nu2.dim
    pos = np.vstack([nu1.positions.reshape(-1, dim), nu2.positions.reshape(-1, dim)])
    mass = np.concatenate([t * nu1.masses, (1.0 - t) * nu2.masses])
    mixed = evaluate(rho, pos, mass, kappa, grad=False)[0]
    j1 = evaluate(rho, nu1.positions, nu1.masses, kappa, grad=False)[0]
    j2 = evaluate(rho, nu2.positions, nu2.masses, kappa, grad=False)[0]
    return mixed - (t * j1 + (1.0 - t) * j2)
