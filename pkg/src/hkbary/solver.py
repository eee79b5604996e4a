"""Lagrangian particle solver for HK barycenters of Dirac collections.

The unknown barycenter is a finite sum of weighted particles. Masses and
positions move together by preconditioned descent (optionally with
limited-memory BFGS curvature in the same metric); particles whose mass hits
zero are pruned, coincident particles are merged, and new particles are
inserted wherever the dual certificate finds the constraint F > 1.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .certificate import CertificateReport, certify, default_domain
from .closed_forms import cd_constant
from .linesearch import MAX_HALVINGS, wolfe_search
from .measures import (
    HALF_PI,
    Density1D,
    DiscreteInput,
    InputMeasure,
    ParticleMeasure,
    check_kappa,
)
from .objective import evaluate

__all__ = [
    "SolverConfig",
    "StepReport",
    "SolveReport",
    "SweepResult",
    "LBFGSMemory",
    "init_particles",
    "descend",
    "prune_and_merge",
    "insert_particles",
    "solve",
    "kappa_sweep",
    "stationarity",
]

OPTIMIZERS = ("bfgs", "preconditioned-descent")
# larger discrete inputs start from cell aggregates instead of one particle per atom
INIT_MAX_ATOMS = 2000


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 60
    max_inner_iters: int = 400
    grad_tol: float = 1e-9
    feas_tol: float = 1e-7
    prune_mass: float = 1e-12
    merge_radius_factor: float = 1e-3
    insertion_mass: float = 1e-6
    max_insertions_per_round: int = 8
    c1: float = 1e-4
    c2: float = 0.9
    optimizer: str = "bfgs"
    memory: int = 12
    # outer rounds without halving the best certified gap before giving up
    patience: int = 4
    # scan spacing = factor * kappa; None picks the certificate default
    scan_spacing_factor: float | None = None
    # the solver is deterministic; the seed is carried for provenance only
    seed: int = 0

    def __post_init__(self):
        for name in ("grad_tol", "feas_tol", "prune_mass", "merge_radius_factor", "insertion_mass"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive and finite")
        for name in ("max_outer_iters", "max_inner_iters", "max_insertions_per_round", "memory",
                     "patience"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError("line search constants need 0 < c1 < c2 < 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.scan_spacing_factor is not None and not self.scan_spacing_factor > 0.0:
            raise ValueError("scan_spacing_factor must be positive")
        if self.insertion_mass <= self.prune_mass:
            raise ValueError("insertion_mass must exceed prune_mass")

    def spacing(self, kappa: float) -> float | None:
        return None if self.scan_spacing_factor is None else self.scan_spacing_factor * kappa


@dataclass
class StepReport:
    value_before: float
    value_after: float
    step: float
    stalled: bool
    converged: bool
    stationarity: float
    n_evals: int
    status: str


@dataclass
class SolveReport:
    barycenter: ParticleMeasure
    objective: float
    certificate: CertificateReport
    iterations: int
    insertions: int
    merges: int
    prunes: int
    converged: bool
    reason: str
    kappa: float = math.nan
    stationarity: float = math.nan
    # objective after every outer round
    history: list = field(default_factory=list)


@dataclass
class SweepResult:
    kappas: np.ndarray
    reports: list

    @property
    def rows(self) -> list[dict]:
        out = []
        for k, r in zip(self.kappas, self.reports):
            c = r.certificate
            out.append({
                "kappa": float(k), "n_atoms": r.barycenter.size,
                "total_mass": r.barycenter.total_mass, "objective": r.objective,
                "dual_value": c.feasible_dual_value, "gap_bound": c.gap_bound,
                "max_F": c.max_F, "iterations": r.iterations, "converged": r.converged,
            })
        return out

    @property
    def atom_counts(self) -> np.ndarray:
        return np.array([r.barycenter.size for r in self.reports])

    def __iter__(self):
        return iter(zip(self.kappas, self.reports))

    def __len__(self):
        return len(self.reports)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _dim(rho: InputMeasure) -> int:
    return 1 if isinstance(rho, Density1D) else rho.dim


def stationarity(masses, d_mass, d_pos, kappa) -> float:
    """KKT residual: mass part |min(m, dJ/dm)|, position part kappa * |dJ/dy|."""
    if masses.size == 0:
        return 0.0
    r_m = np.abs(np.minimum(masses, d_mass))
    r_y = kappa * np.sqrt(np.sum(np.asarray(d_pos).reshape(masses.size, -1) ** 2, axis=1))
    return float(max(r_m.max(), r_y.max()))


def _pack(m, y):
    return np.concatenate([m, y.ravel()])


def _unpack(x, s, d):
    return x[:s], x[s:].reshape(s, d)


class LBFGSMemory:
    """Curvature pairs in the metric of a fixed diagonal preconditioner."""

    def __init__(self, precond: np.ndarray, size: int):
        self.precond = precond
        self.pairs = deque(maxlen=size)

    def __len__(self):
        return len(self.pairs)

    def reset(self):
        self.pairs.clear()

    def update(self, s, yv):
        sy = float(s @ yv)
        if sy > 1e-12 * math.sqrt(float(s @ s) * float(yv @ yv)) and sy > 0.0:
            self.pairs.append((s, yv, 1.0 / sy))

    def direction(self, g, free):
        q = np.where(free, g, 0.0)
        alphas = []
        for s, yv, rho in reversed(self.pairs):
            a = rho * float(s @ q)
            alphas.append(a)
            q = q - a * np.where(free, yv, 0.0)
        if self.pairs:
            s, yv, _ = self.pairs[-1]
            yf = np.where(free, yv, 0.0)
            denom = float(yf @ (self.precond * yf))
            gamma = float(s @ yf) / denom if denom > 0.0 else 1.0
            if not gamma > 0.0:
                gamma = 1.0
        else:
            gamma = 1.0
        r = gamma * self.precond * q
        for (s, yv, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * float(np.where(free, yv, 0.0) @ r)
            r = r + (a - b) * np.where(free, s, 0.0)
        return -np.where(free, r, 0.0)


def _metric_stale(memory, masses, cfg, factor=4.0):
    ref = memory.precond[:masses.size]
    cur = np.maximum(masses, cfg.insertion_mass)
    return bool(np.any((cur > factor * ref) | (cur * factor < ref)))


def _preconditioner(m, d, kappa, cfg):
    floor = np.maximum(m, cfg.insertion_mass)
    return np.concatenate([floor, np.repeat(kappa * kappa / floor, d)])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def init_particles(rho: InputMeasure, kappa: float, cfg: SolverConfig | None = None) -> ParticleMeasure:
    """Starting particles: squared input weights, or an even layout for a density.

    Discrete inputs with more than INIT_MAX_ATOMS atoms are first aggregated
    into square cells (side kappa/4, doubled until few enough cells are
    occupied), one particle per cell at the weighted centre.
    """
    kappa = check_kappa(kappa)
    if isinstance(rho, DiscreteInput):
        if rho.size <= INIT_MAX_ATOMS:
            return ParticleMeasure(rho.points, rho.weights ** 2)
        pts, w = rho.points, rho.weights
        h = 0.25 * kappa
        while True:
            cells = np.floor((pts - pts.min(axis=0)) / h).astype(np.int64)
            _, inv = np.unique(cells, axis=0, return_inverse=True)
            inv = inv.reshape(-1)
            if inv.max() + 1 <= INIT_MAX_ATOMS:
                break
            h *= 2.0
        W = np.bincount(inv, weights=w)
        centre = np.column_stack([np.bincount(inv, weights=w * pts[:, i]) for i in range(pts.shape[1])])
        return ParticleMeasure(centre / W[:, None], W ** 2)
    if isinstance(rho, Density1D):
        lo, hi = rho.support
        n = int(math.ceil((hi - lo) / (HALF_PI * kappa))) + 1
        pos = np.linspace(lo, hi, n).reshape(-1, 1)
        mean_density = 1.0 / (hi - lo)
        mass = cd_constant(1) * kappa * mean_density ** 2
        return ParticleMeasure(pos, np.full(n, mass))
    raise TypeError(f"unsupported input measure {type(rho).__name__}")


def descend(rho: InputMeasure, nu: ParticleMeasure, kappa: float, cfg: SolverConfig,
            memory: LBFGSMemory | None = None, alpha0: float = 1.0):
    """One accepted descent step. Returns ``(nu_new, StepReport)``.

    With ``cfg.optimizer == "bfgs"`` and a ``memory`` the direction uses the
    stored curvature pairs; without memory it is the preconditioned negative
    gradient. The step never drives a mass below zero: the line search is
    capped at the first mass that reaches zero.
    """
    kappa = check_kappa(kappa)
    s, d = nu.size, (nu.dim if nu.size else _dim(rho))
    m0 = nu.masses.copy()
    y0 = nu.positions.reshape(s, d).copy()
    f0, g, _ = evaluate(rho, y0, m0, kappa, grad=True)
    if s == 0:
        return nu, StepReport(f0, f0, 0.0, False, True, 0.0, 1, "empty")
    if not np.all(np.isfinite(g.d_mass)):
        # a zero-mass atom sees uncovered input: insertion has to act first
        return nu, StepReport(f0, f0, 0.0, True, False, math.inf, 1, "uncovered")
    stat = stationarity(m0, g.d_mass, g.d_pos, kappa)
    if stat <= cfg.grad_tol:
        return nu, StepReport(f0, f0, 0.0, False, True, stat, 1, "stationary")
    x0 = _pack(m0, y0)
    gx = _pack(g.d_mass, g.d_pos)
    # a zero mass with nonnegative derivative stays put, and so does its position
    pinned = (m0 <= 0.0) & (g.d_mass >= 0.0)
    free = ~np.concatenate([pinned, np.repeat(pinned, d)])
    if memory is not None and cfg.optimizer == "bfgs":
        if memory.precond.size != x0.size:
            raise ValueError("memory does not match the particle count")
        direction = memory.direction(gx, free)
        if not float(gx @ direction) < 0.0:
            memory.reset()
            direction = memory.direction(gx, free)
    else:
        precond = _preconditioner(m0, d, kappa, cfg)
        direction = -np.where(free, precond * gx, 0.0)
    # masses already at zero cannot move further down
    at_bound = np.concatenate([(m0 <= 0.0) & (direction[:s] < 0.0), np.zeros(s * d, dtype=bool)])
    direction = np.where(at_bound, 0.0, direction)
    slope0 = float(gx @ direction)
    if not slope0 < 0.0 and memory is not None and len(memory):
        memory.reset()
        direction = -np.where(free, _preconditioner(m0, d, kappa, cfg) * gx, 0.0)
        direction[:s] = np.where((m0 <= 0.0) & (direction[:s] < 0.0), 0.0, direction[:s])
        slope0 = float(gx @ direction)
    if not slope0 < 0.0:
        return nu, StepReport(f0, f0, 0.0, True, False, stat, 1, "no-descent")
    dm = direction[:s]
    shrink = dm < 0.0
    alpha_max = float(np.min(m0[shrink] / -dm[shrink])) if np.any(shrink) else math.inf

    def phi(a):
        x = x0 + a * direction
        m, y = _unpack(x, s, d)
        m = np.maximum(m, 0.0)
        if a == alpha_max:
            # land exactly on the bound for the blocking masses
            m = np.where(shrink & (m0 / -np.where(shrink, dm, -1.0) <= a), 0.0, m)
        val, gr, _ = evaluate(rho, y, m, kappa, grad=True)
        moving = direction != 0.0
        slope = float(_pack(gr.d_mass, gr.d_pos)[moving] @ direction[moving])
        return val, slope, (m, y, gr)

    res = wolfe_search(phi, f0, slope0, alpha0=min(alpha0, alpha_max) if alpha_max > 0 else alpha0,
                       c1=cfg.c1, c2=cfg.c2, alpha_max=alpha_max, max_halvings=MAX_HALVINGS)
    if not res.ok or res.value > f0:
        return nu, StepReport(f0, f0, 0.0, True, False, stat, res.n_evals + 1, "stalled")
    m, y, gr = res.payload
    if memory is not None and cfg.optimizer == "bfgs":
        memory.update(_pack(m, y) - x0, _pack(gr.d_mass, gr.d_pos) - gx)
    new = ParticleMeasure(y, m)
    stat_new = stationarity(m, gr.d_mass, gr.d_pos, kappa)
    return new, StepReport(f0, res.value, res.alpha, False, stat_new <= cfg.grad_tol, stat_new,
                           res.n_evals + 1, res.status)


def prune_and_merge(nu: ParticleMeasure, kappa: float, cfg: SolverConfig):
    """Drop atoms with mass <= prune_mass and merge atoms closer than the merge radius.

    Returns ``(nu_new, n_pruned, n_merged)``. The closest pair is merged first
    (ties by index), repeatedly, so the output has no close pairs left.
    """
    keep = nu.masses > cfg.prune_mass
    n_pruned = int(np.sum(~keep))
    pos = nu.positions[keep].copy()
    mass = nu.masses[keep].copy()
    radius = cfg.merge_radius_factor * kappa
    n_merged = 0
    while pos.shape[0] > 1:
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        iu = np.triu_indices(pos.shape[0], 1)
        dd = dist[iu]
        close = np.nonzero(dd < radius)[0]
        if close.size == 0:
            break
        k = close[np.lexsort((iu[1][close], iu[0][close], dd[close]))[0]]
        i, j = iu[0][k], iu[1][k]
        total = mass[i] + mass[j]
        pos[i] = (mass[i] * pos[i] + mass[j] * pos[j]) / total
        mass[i] = total
        pos = np.delete(pos, j, axis=0)
        mass = np.delete(mass, j)
        n_merged += 1
    return ParticleMeasure(pos, mass), n_pruned, n_merged


def _far_from(p, chosen, existing, radius):
    for q in chosen:
        if np.linalg.norm(p - q) < radius:
            return False
    if existing.size and np.min(np.linalg.norm(existing - p, axis=1)) < radius:
        return False
    return True


def insert_particles(rho: InputMeasure, nu: ParticleMeasure, kappa: float, cfg: SolverConfig,
                     certificate: CertificateReport | None = None):
    """Add atoms of mass insertion_mass where the dual constraint is violated.

    Uncovered input points come first (each insertion covers a ball of radius
    kappa*pi/2, so later picks skip points it already covers); otherwise the
    local maxima of F above 1 + feas_tol, largest first. Returns
    ``(nu_new, n_inserted)``.
    """
    kappa = check_kappa(kappa)
    if certificate is None:
        certificate = certify(rho, nu, kappa, delta=cfg.spacing(kappa))
    dim = nu.dim if nu.size else _dim(rho)
    existing = nu.positions.reshape(-1, dim)
    chosen = []
    cap = cfg.max_insertions_per_round
    if certificate.uncovered.size:
        pts = certificate.uncovered
        if isinstance(rho, DiscreteInput):
            idx = {tuple(p): i for i, p in enumerate(rho.points.tolist())}
            w = np.array([rho.weights[idx[tuple(p)]] if tuple(p) in idx else 0.0 for p in pts.tolist()])
        else:
            w = np.zeros(len(pts))
        keys = [pts[:, k] for k in reversed(range(pts.shape[1]))] + [-w]
        for k in np.lexsort(keys):
            if len(chosen) >= cap:
                break
            if _far_from(pts[k], chosen, np.zeros((0, dim)), HALF_PI * kappa):
                chosen.append(pts[k])
    else:
        radius = cfg.merge_radius_factor * kappa
        for p, v in zip(certificate.peaks, certificate.peak_values):
            if len(chosen) >= cap or v <= 1.0 + cfg.feas_tol:
                break
            if _far_from(p, chosen, existing, radius):
                chosen.append(p)
    if not chosen:
        return nu, 0
    new = nu
    for p in chosen:
        new = new.add(np.asarray(p, dtype=float), cfg.insertion_mass)
    return new, len(chosen)


def _residuals(rho, nu, kappa, cfg):
    if nu.size == 0:
        return math.inf
    _, g, _ = evaluate(rho, nu.positions, nu.masses, kappa, grad=True)
    return stationarity(nu.masses, g.d_mass, g.d_pos, kappa)


def solve(rho: InputMeasure, kappa: float, cfg: SolverConfig | None = None,
          warm_start: ParticleMeasure | None = None) -> SolveReport:
    """Run descent, pruning/merging and insertion until all three residuals are small.

    Converged means: stationarity <= grad_tol, certified sup F <= 1 + feas_tol
    and sum_j m_j |1 - F(y_j)| <= grad_tol.
    """
    cfg = cfg or SolverConfig()
    kappa = check_kappa(kappa)
    domain = default_domain(rho, kappa)
    delta = cfg.spacing(kappa)
    nu = warm_start if warm_start is not None else init_particles(rho, kappa, cfg)
    insertions = merges = prunes = iterations = 0
    history = []
    if warm_start is not None:
        # the feasible region shifts with kappa: re-run insertion first
        nu, n_ins = insert_particles(rho, nu, kappa, cfg)
        insertions += n_ins
    best = None
    reason = "iteration cap"
    converged = False
    stat = math.inf
    cert = None
    idle_rounds = 0
    best_round, best_gap = None, math.inf
    for outer in range(cfg.max_outer_iters):
        memory = None
        if cfg.optimizer == "bfgs" and nu.size:
            memory = LBFGSMemory(_preconditioner(nu.masses, nu.dim, kappa, cfg), cfg.memory)
        stalled = False
        alpha0 = 1.0
        for _ in range(cfg.max_inner_iters):
            nu, rep = descend(rho, nu, kappa, cfg, memory, alpha0)
            iterations += 1
            if rep.converged:
                break
            if rep.stalled:
                if rep.status != "uncovered" and memory is not None and len(memory):
                    memory.reset()
                    continue
                stalled = True
                break
            if memory is None:
                alpha0 = min(1.0, 2.0 * rep.step) if rep.step > 0 else 1.0
            if memory is None:
                continue
            # a mass reaching zero changes the active set, and masses drifting far
            # from the ones the metric was built with make it stale: restart
            if np.any(nu.masses == 0.0):
                nu, n_p, n_m = prune_and_merge(nu, kappa, cfg)
                prunes += n_p
                merges += n_m
                memory = LBFGSMemory(_preconditioner(nu.masses, nu.dim, kappa, cfg), cfg.memory)
            elif _metric_stale(memory, nu.masses, cfg):
                memory = LBFGSMemory(_preconditioner(nu.masses, nu.dim, kappa, cfg), cfg.memory)
        nu, n_p, n_m = prune_and_merge(nu, kappa, cfg)
        prunes += n_p
        merges += n_m
        cert = certify(rho, nu, kappa, delta=delta, domain=domain)
        history.append(cert.objective)
        stat = _residuals(rho, nu, kappa, cfg)
        feasible = cert.sup_bound <= 1.0 + cfg.feas_tol
        if best is None or cert.gap_bound < best[1].gap_bound:
            best = (nu, cert, stat)
        if best_round is None or cert.gap_bound < 0.5 * best_gap:
            best_round, best_gap = outer, cert.gap_bound
        if feasible and stat <= cfg.grad_tol and cert.complementarity <= cfg.grad_tol:
            converged = True
            reason = "converged"
            break
        if math.isfinite(best_gap) and outer - best_round >= cfg.patience:
            # shallow landscape: extra rounds stopped paying off
            reason = "stagnated"
            break
        nu_ins, n_ins = insert_particles(rho, nu, kappa, cfg, cert)
        insertions += n_ins
        if n_ins == 0 and (stalled or (n_p == 0 and n_m == 0 and stat > cfg.grad_tol and idle_rounds >= 2)):
            idle_rounds += 1
            if idle_rounds > 3:
                reason = "stalled"
                break
        elif n_ins == 0:
            idle_rounds += 1
        else:
            idle_rounds = 0
        nu = nu_ins
    if not converged and best is not None:
        nu, cert, stat = best
    if cert is None:
        cert = certify(rho, nu, kappa, delta=delta, domain=domain)
    return SolveReport(barycenter=nu, objective=cert.objective, certificate=cert,
                       iterations=iterations, insertions=insertions, merges=merges, prunes=prunes,
                       converged=converged, reason=reason, kappa=kappa, stationarity=stat,
                       history=history)


def kappa_sweep(rho: InputMeasure, kappas, cfg: SolverConfig | None = None,
                warm: bool = True) -> SweepResult:
    """Solve for every kappa in order, warm-starting from the previous solution."""
    cfg = cfg or SolverConfig()
    ks = np.asarray(kappas, dtype=float).reshape(-1)
    if ks.size == 0:
        raise ValueError("empty kappa list")
    if np.any(~np.isfinite(ks)) or np.any(ks <= 0.0):
        raise ValueError("kappa values must be positive and finite")
    if ks.size > 1:
        diffs = np.diff(ks)
        if not (np.all(diffs > 0.0) or np.all(diffs < 0.0)):
            raise ValueError("kappa values must be strictly monotone")
    reports = []
    prev = None
    for k in ks:
        try:
            rep = solve(rho, float(k), cfg, warm_start=prev if warm else None)
        except Exception as exc:  # a failed kappa is recorded, the sweep goes on
            rep = _failed_report(rho, float(k), cfg, exc)
        reports.append(rep)
        if rep.barycenter.size:
            prev = rep.barycenter
    return SweepResult(ks, reports)


def _failed_report(rho, kappa, cfg, exc):
    nu = init_particles(rho, kappa, cfg)
    cert = certify(rho, nu, kappa, delta=cfg.spacing(kappa))
    return SolveReport(nu, cert.objective, cert, 0, 0, 0, 0, False, f"error: {exc}", kappa)
