"""Eulerian reference solver: optimise masses on a fixed grid of candidate positions.

With positions frozen the objective is convex in the masses, so a
projected Newton method with column generation reaches the global optimum of the grid-restricted problem.
It is slow but independent of the particle machinery, which makes it a
trustworthy baseline for tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import HALF_PI, DiscreteInput, Domain, check_kappa, pairwise_distance

__all__ = ["GridSolution", "OracleError", "grid_nodes", "solve_on_grid"]


class OracleError(RuntimeError):
    """The grid solver ran out of Newton steps before reaching the tolerance."""


@dataclass
class GridSolution:
    positions: np.ndarray
    masses: np.ndarray
    objective: float
    iterations: int
    # max_j |min(m_j, dJ/dm_j)| at exit
    residual: float
    converged: bool

    @property
    def constraint(self) -> np.ndarray:
        """F at every grid node (1 - dJ/dm)."""
        return self._F

    def support(self, threshold: float = 0.0):
        keep = self.masses > threshold
        return self.positions[keep], self.masses[keep]


def grid_nodes(domain: Domain, grid_n: int) -> np.ndarray:
    """grid_n equally spaced nodes per axis, endpoints included."""
    axes = [np.linspace(lo, hi, grid_n) for lo, hi in zip(domain.lower, domain.upper)]
    if domain.dim == 1:
        return axes[0].reshape(-1, 1)
    X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def _objective(m, K, lam):
    S = K @ m
    if np.any(S <= 0.0):
        return math.inf, S
    return 1.0 + math.fsum(m.tolist()) - 2.0 * math.fsum((lam * np.sqrt(S)).tolist()), S


def _projected_gradient(K, lam, tol, max_iter, memory):
    """Spectral projected gradient with a nonmonotone Armijo safeguard.

    Works on the nodes some input atom can see; the others only ever lose mass
    and stay at zero.
    """
    live = np.any(K > 0.0, axis=0)
    Kl = K[:, live]

    def fun(m):
        f, S = _objective(m, Kl, lam)
        if not math.isfinite(f):
            return f, None
        return f, 1.0 - Kl.T @ (lam / np.sqrt(S))

    m = np.full(Kl.shape[1], 1.0 / Kl.shape[1])
    f, g = fun(m)
    hist = [f]
    step = 1.0
    it = 0
    residual = float(np.max(np.abs(np.minimum(m, g))))
    while residual > tol and it < max_iter:
        it += 1
        d = np.maximum(m - step * g, 0.0) - m
        slope = float(g @ d)
        if slope >= 0.0:
            break
        ref = max(hist[-memory:])
        t = 1.0
        while True:
            trial = m + t * d
            ft, gt = fun(trial)
            if ft <= ref + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-20:
                gt = None
                break
        if gt is None:
            break
        s, yv = trial - m, gt - g
        sy = float(s @ yv)
        step = float(s @ s) / sy if sy > 0.0 else 1e10
        step = min(max(step, 1e-12), 1e12)
        m, f, g = trial, ft, gt
        hist.append(f)
        residual = float(np.max(np.abs(np.minimum(m, g))))
    out = np.zeros(K.shape[1])
    out[live] = m
    return out, it


def _newton_column_generation(K, lam, dist, tol, max_iter, add_per_round):
    """Projected Newton on a working set of nodes, grown by most negative derivative."""
    G = K.shape[1]

    def full_grad(S):
        with np.errstate(divide="ignore"):
            w = np.where(S > 0.0, lam / np.sqrt(np.maximum(S, 0.0)), np.inf)
        finite = np.isfinite(w)
        g = 1.0 - K[finite].T @ w[finite]
        # a node that sees an uncovered atom has derivative -inf
        if not finite.all():
            g[np.any(K[~finite] > 0.0, axis=0)] = -np.inf
        return g

    # start from the node nearest to each input atom, holding that atom's weight
    active = np.unique(np.argmin(dist, axis=1))
    m = np.zeros(G)
    np.add.at(m, np.argmin(dist, axis=1), lam)

    def value(mA, KA):
        return _objective(mA, KA, lam)

    steps = 0
    while steps < max_iter:
        KA = K[:, active]
        mA = m[active]
        f, S = value(mA, KA)
        # projected Newton on the working set
        while steps < max_iter:
            root = np.sqrt(S)
            gA = 1.0 - KA.T @ (lam / root)
            inner = float(np.max(np.abs(np.minimum(mA, gA))))
            if inner <= 0.1 * tol:
                break
            eps = min(1e-3, inner)
            fixed = (mA <= eps) & (gA > 0.0)
            free = ~fixed
            d = np.zeros_like(mA)
            d[fixed] = -gA[fixed]
            W = KA * np.sqrt(lam / (2.0 * S * root))[:, None]
            diag = np.maximum(np.einsum("ij,ij->j", W, W), 1e-300)
            if free.any():
                H = W[:, free].T @ W[:, free]
                H[np.diag_indices_from(H)] += 1e-14 * (1.0 + np.trace(H))
                try:
                    d[free] = -np.linalg.solve(H, gA[free])
                except np.linalg.LinAlgError:
                    d[free] = -gA[free] / diag[free]
            # near the optimum decreases drop below rounding: accept a full Newton
            # step that keeps the value flat and shrinks the KKT residual, else
            # search along Newton and then a diagonally scaled gradient
            trial = np.maximum(mA + d, 0.0)
            ft, St = value(trial, KA)
            moved = False
            if ft <= f + 4e-16 * max(1.0, abs(f)):
                gt = 1.0 - KA.T @ (lam / np.sqrt(St))
                moved = float(np.max(np.abs(np.minimum(trial, gt)))) < 0.5 * inner
            for direction in (d, -gA / diag):
                if moved:
                    break
                t = 1.0
                while t > 1e-12:
                    trial = np.maximum(mA + t * direction, 0.0)
                    ft, St = value(trial, KA)
                    if ft < f and ft <= f + 1e-4 * float(gA @ (trial - mA)):
                        moved = True
                        break
                    t *= 0.5
                if moved:
                    break
            steps += 1
            if not moved:
                # no further progress possible in floating point
                break
            mA, f, S = trial, ft, St
        m[:] = 0.0
        m[active] = mA
        g = full_grad(K @ m)
        residual = float(np.max(np.abs(np.minimum(m, g))))
        if residual <= tol:
            break
        cand = np.setdiff1d(np.flatnonzero(g < -tol), active)
        keep = active[(mA > 0.0) | (g[active] <= 0.0)]
        if cand.size == 0:
            if keep.size == active.size:
                break
            active = keep
            continue
        cand = cand[np.argsort(g[cand], kind="stable")[:add_per_round]]
        active = np.union1d(keep, cand)
    return m, steps


def solve_on_grid(rho: DiscreteInput, kappa: float, grid_n: int, tol: float = 1e-10,
                  domain: Domain | None = None, method: str = "newton", max_iter: int | None = None,
                  raise_on_failure: bool = False) -> GridSolution:
    """Minimise 1 + sum m - 2 sum_i lambda_i sqrt((K m)_i) over m >= 0 on a grid.

    ``grid_n`` equally spaced nodes per axis cover ``domain`` (default: the
    bounding box of the input and [0, 1]^d). Both methods stop when
    max_j |min(m_j, dJ/dm_j)| <= tol over every node:

    ``"newton"``
        column generation: projected Newton steps (Bertsekas) on a small
        working set of nodes, which then grows by the nodes with the most
        negative partial derivative. ``max_iter`` caps Newton steps (2000).
    ``"gradient"``
        spectral (Barzilai-Borwein) projected gradient on all nodes with a
        nonmonotone Armijo safeguard over the last 10 values. Slow but
        transparent. ``max_iter`` caps iterations (200000).
    """
    if not isinstance(rho, DiscreteInput):
        raise TypeError("the grid oracle needs a discrete input measure")
    kappa = check_kappa(kappa)
    grid_n = int(grid_n)
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    if method not in ("newton", "gradient"):
        raise ValueError(f"unknown oracle method {method!r}")
    if domain is None:
        domain = Domain(np.minimum(rho.points.min(axis=0), 0.0), np.maximum(rho.points.max(axis=0), 1.0))
    if domain.dim != rho.dim:
        raise ValueError("domain dimension does not match the input")
    nodes = grid_nodes(domain, grid_n)
    dist = pairwise_distance(rho.points, nodes)
    c = np.cos(np.minimum(dist / kappa, HALF_PI))
    K = np.where(dist < HALF_PI * kappa, c * c, 0.0)
    lam = rho.weights
    if method == "newton":
        m, steps = _newton_column_generation(K, lam, dist, tol, max_iter or 2000, 8)
    else:
        m, steps = _projected_gradient(K, lam, tol, max_iter or 200_000, 10)
    f, S = _objective(m, K, lam)
    F = K.T @ (lam / np.sqrt(S))
    residual = float(np.max(np.abs(np.minimum(m, 1.0 - F))))
    converged = residual <= tol
    if not converged and raise_on_failure:
        raise OracleError(f"grid oracle stopped at residual {residual:.3g} after {steps} steps")
    sol = GridSolution(nodes, m, f, steps, residual, converged)
    sol._F = F
    return sol
