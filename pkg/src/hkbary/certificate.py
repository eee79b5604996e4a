"""Dual potentials, the constraint function F and certified duality gaps.

For particles nu the candidate potential is psi(x) = 1 - sqrt(S(x)) with S the
coverage of x. The constraint function is

    F(y) = int Cos^2(|x - y| / kappa) / (1 - psi(x)) drho(x),

and psi is dual feasible iff F <= 1 everywhere. A scan bounds sup F from
above; dividing 1 - psi by that bound gives a feasible potential, and its dual
value lower-bounds the optimal objective.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .measures import (
    HALF_PI,
    Density1D,
    DiscreteInput,
    Domain,
    InputMeasure,
    ParticleMeasure,
    check_kappa,
)
from .objective import coverage, density_breakpoints, evaluate, uncovered_intervals
from .quadrature import gauss_legendre_panels, integrate

__all__ = [
    "UncoveredInputError",
    "DualPotential",
    "ScanResult",
    "CertificateReport",
    "psi_eval",
    "constraint_F",
    "lipschitz_bound",
    "scan_max_F",
    "certify",
    "default_domain",
    "default_spacing",
]

GOLDEN_STEPS = 40
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class UncoveredInputError(ValueError):
    """Some input mass sees no particle, so 1 - psi vanishes there and F is infinite."""

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        shown = ", ".join(str(tuple(np.round(p, 12))) for p in self.points[:5])
        more = "" if len(self.points) <= 5 else f" (+{len(self.points) - 5} more)"
        super().__init__(f"uncovered input point(s): {shown}{more}")


@dataclass(frozen=True)
class DualPotential:
    """psi(x) = 1 - sqrt(sum_j m_j Cos^2(|x - y_j| / kappa))."""

    generator: ParticleMeasure
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "kappa", check_kappa(self.kappa))

    def __call__(self, x):
        return psi_eval(self, x)

    def coverage(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, self.generator.dim) if x.ndim <= 1 else x
        if self.generator.size == 0:
            return np.zeros(pts.shape[0])
        return np.maximum(coverage(pts, self.generator.positions, self.generator.masses, self.kappa), 0.0)


def psi_eval(psi: DualPotential, x):
    """Evaluate the potential at one point or at the rows of an array."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and x.size == psi.generator.dim)
    vals = 1.0 - np.sqrt(psi.coverage(x.reshape(1, -1) if single else x))
    return float(vals[0]) if single else vals


def default_domain(rho: InputMeasure, kappa: float | None = None) -> Domain:
    """The density's own interval, or the bounding box of the input atoms.

    F decreases when y moves away from the bounding box of rho, so its sup over
    any box containing that bounding box is attained inside it. Degenerate
    directions are padded by kappa*pi/2.
    """
    if isinstance(rho, Density1D):
        return rho.domain
    lo = rho.points.min(axis=0)
    hi = rho.points.max(axis=0)
    pad = HALF_PI * (kappa if kappa is not None else 1.0)
    flat = hi - lo <= 0.0
    lo = np.where(flat, lo - pad, lo)
    hi = np.where(flat, hi + pad, hi)
    return Domain(lo, hi)


def default_spacing(domain: Domain, kappa: float) -> float:
    """Scan spacing: kappa/1000 in 1D, kappa/25 in 2D, with a floor tied to the domain size."""
    if domain.dim == 1:
        return max(kappa / 1000.0, domain.diameter / 1e6)
    return max(kappa / 25.0, domain.diameter / 2000.0)


# ---------------------------------------------------------------------------
# the constraint field for a fixed (rho, psi)
# ---------------------------------------------------------------------------

class _DiscreteField:
    def __init__(self, rho: DiscreteInput, psi: DualPotential):
        self.kappa = psi.kappa
        self.radius = HALF_PI * psi.kappa
        S = psi.coverage(rho.points)
        self.covered = S > 0.0
        self.uncovered = rho.points[~self.covered]
        with np.errstate(divide="ignore"):
            self.coef = np.where(self.covered, rho.weights / np.sqrt(np.where(self.covered, S, 1.0)), 0.0)
        self.src = rho.points
        self.integral_psi = 1.0 - math.fsum((rho.weights * np.sqrt(S)).tolist())

    def check(self, y):
        if self.uncovered.size == 0:
            return
        y = np.atleast_2d(y)
        if self.uncovered.shape[1] == 1:
            near = np.abs(self.uncovered[:, 0][None, :] - y[:, 0][:, None]) < self.radius
        else:
            d = np.hypot(self.uncovered[None, :, 0] - y[:, None, 0], self.uncovered[None, :, 1] - y[:, None, 1])
            near = d < self.radius
        hit = np.any(near, axis=0)
        if np.any(hit):
            raise UncoveredInputError(self.uncovered[hit])

    @property
    def lipschitz(self) -> float:
        if self.uncovered.size:
            return math.inf
        return math.fsum(self.coef.tolist()) / self.kappa

    def values(self, y, grad=False):
        self.check(y)
        return kernels.kernel_sums(self.src, self.coef, y, self.kappa, grad=grad)

    def curvature(self, lo, hi):
        return kernels.cell_curvature(self.src, self.coef, lo, hi, self.kappa)


class _DensityField:
    """F for a 1D density.

    F(y) = int K(x, y) w(x) dx with w = rho / sqrt(S). The integrand is smooth on
    panels between the particle breakpoints except at x = y +- kappa*pi/2; the
    (at most two) panels cut there are re-integrated exactly on the part that
    lies inside the kernel support.
    """

    ORDER = 12

    def __init__(self, rho: Density1D, psi: DualPotential):
        self.rho = rho
        self.psi = psi
        self.kappa = psi.kappa
        self.radius = HALF_PI * psi.kappa
        gen = psi.generator
        active = gen.masses > 0.0
        y = gen.positions[active, 0]
        self.uncovered = self._uncovered(y)
        brk = density_breakpoints(rho, y, self.kappa)
        width = min(self.kappa / 8.0, (rho.support[1] - rho.support[0]) / 4.0)
        nodes, weights = gauss_legendre_panels(brk, width, self.ORDER)
        self.nodes = nodes
        self.edges = np.append(self._panel_left(brk, width), brk[-1])
        self.w_nodes = self._w(nodes)
        self.coef = self.w_nodes * weights
        self.src = nodes.reshape(-1, 1)
        self._xs, self._ws = np.polynomial.legendre.leggauss(self.ORDER)
        res = integrate(lambda x: self.rho.pdf(x) * np.sqrt(self.psi.coverage(x.reshape(-1, 1))),
                        brk, tol=rho.tol)
        self.integral_psi = 1.0 - float(np.atleast_1d(res.value)[0])
        self._lip = None
        self._brk = brk

    @staticmethod
    def _panel_left(brk, width):
        out = []
        for lo, hi in zip(brk[:-1], brk[1:]):
            n = max(1, int(np.ceil((hi - lo) / width)))
            out.append(np.linspace(lo, hi, n + 1)[:-1])
        return np.concatenate(out)

    def _uncovered(self, y):
        self.gaps = uncovered_intervals(self.rho.support, y, self.radius)
        return np.array([0.5 * (a + b) for a, b in self.gaps]).reshape(-1, 1)

    def _w(self, x):
        S = self.psi.coverage(np.asarray(x).reshape(-1, 1))
        dens = self.rho.pdf(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(S > 0.0, dens / np.sqrt(S), np.where(dens > 0.0, np.inf, 0.0))

    def check(self, y):
        if not self.gaps:
            return
        t = np.atleast_2d(y)[:, 0]
        hit = [k for k, (a, b) in enumerate(self.gaps)
               if np.any((t - self.radius < b) & (t + self.radius > a))]
        if hit:
            raise UncoveredInputError(self.uncovered[hit])

    @property
    def lipschitz(self) -> float:
        if self.uncovered.size:
            return math.inf
        if self._lip is None:
            res = integrate(lambda x: np.nan_to_num(self._w(x), posinf=0.0), self._brk, tol=self.rho.tol)
            self._lip = float(np.atleast_1d(res.value)[0]) / self.kappa
        return self._lip

    def values(self, y, grad=False):
        self.check(y)
        y = np.atleast_2d(y)
        vals, grads = kernels.kernel_sums(self.src, self.coef, y, self.kappa, grad=True)
        yy = y[:, 0]
        edges = self.edges
        for sign in (-1.0, 1.0):
            b = yy + sign * self.radius
            p = np.searchsorted(edges, b, side="right") - 1
            cut = (p >= 0) & (p < edges.size - 1)
            cut &= b > edges[np.clip(p, 0, edges.size - 1)]
            if not np.any(cut):
                continue
            idx = np.nonzero(cut)[0]
            pl = edges[p[idx]]
            pr = edges[p[idx] + 1]
            # naive contribution of the cut panel's fixed nodes
            pn = self.nodes.reshape(-1, self.ORDER)[p[idx]]
            pc = self.coef.reshape(-1, self.ORDER)[p[idx]]
            nk, ndk = _k_and_dk(pn, yy[idx, None], self.kappa)
            vals[idx] -= np.sum(nk * pc, axis=1)
            grads[idx, 0] -= np.sum(ndk * pc, axis=1)
            # exact integral over the part of the panel inside the kernel support
            if sign > 0:
                a_, b_ = pl, b[idx]
            else:
                a_, b_ = b[idx], pr
            half = 0.5 * (b_ - a_)
            mid = 0.5 * (b_ + a_)
            xn = mid[:, None] + half[:, None] * self._xs[None, :]
            wn = self._w(xn.ravel()).reshape(xn.shape) * (half[:, None] * self._ws[None, :])
            ek, edk = _k_and_dk(xn, yy[idx, None], self.kappa)
            vals[idx] += np.sum(ek * wn, axis=1)
            grads[idx, 0] += np.sum(edk * wn, axis=1)
        if not grad:
            grads = np.zeros_like(grads)
        return vals, grads

    CURV_PANELS = 64

    def curvature(self, lo, hi):
        """Per-cell upper bound on F''.

        w is lumped on short panels; a panel [c - h, c + h] seen from a cell
        spans the same distances as the point c seen from the cell widened by
        h, so the point-source bound applied to the widened cell stays valid.
        """
        if not hasattr(self, "_curv_src"):
            nodes, weights = gauss_legendre_panels(self._brk, self.kappa / self.CURV_PANELS, 6)
            mass = (self._w(nodes) * weights).reshape(-1, 6).sum(axis=1)
            left = self._panel_left(self._brk, self.kappa / self.CURV_PANELS)
            right = np.append(left[1:], self._brk[-1])
            self._curv_half = float(np.max(right - left)) / 2.0 * (1.0 + 1e-12)
            # quadrature of a smooth positive w on short panels; pad against rounding
            self._curv_src = (0.5 * (left + right)).reshape(-1, 1)
            self._curv_coef = mass * (1.0 + 1e-10)
        h = self._curv_half
        return kernels.cell_curvature(self._curv_src, self._curv_coef, lo - h, hi + h, self.kappa)

    def exact_value(self, y: float) -> float:
        """F(y) by adaptive quadrature (independent of the panel scheme)."""
        self.check(np.array([[y]]))
        brk = np.concatenate([self._brk, [y - self.radius, y + self.radius]])
        lo, hi = self.rho.support
        brk = np.unique(np.clip(brk, lo, hi))

        def f(x):
            k, _ = _k_and_dk(x, y, self.kappa)
            return k * np.nan_to_num(self._w(x), posinf=0.0)

        return float(np.atleast_1d(integrate(f, brk, tol=self.rho.tol).value)[0])


def _k_and_dk(x, y, kappa):
    """Cos^2(|x-y|/kappa) and its derivative in y (1D, broadcasting)."""
    diff = y - x
    dist = np.abs(diff)
    inside = dist < HALF_PI * kappa
    s = np.where(inside, dist / kappa, 0.0)
    c = np.cos(s)
    k = np.where(inside, c * c, 0.0)
    dk = np.where(inside, -np.sin(2.0 * s) / kappa * np.sign(diff), 0.0)
    return k, dk


def _field(rho: InputMeasure, psi: DualPotential):
    if isinstance(rho, DiscreteInput):
        return _DiscreteField(rho, psi)
    if isinstance(rho, Density1D):
        return _DensityField(rho, psi)
    raise TypeError(f"unsupported input measure {type(rho).__name__}")


def constraint_F(rho: InputMeasure, psi: DualPotential, y):
    """F at one point (returns float) or at the rows of an array."""
    y = np.asarray(y, dtype=float)
    dim = psi.generator.dim if psi.generator.size else (1 if isinstance(rho, Density1D) else rho.dim)
    single = y.ndim == 0 or (y.ndim == 1 and y.size == dim)
    pts = y.reshape(-1, dim)
    f = _field(rho, psi)
    if isinstance(f, _DensityField):
        vals = np.array([f.exact_value(float(t)) for t in pts[:, 0]])
    else:
        vals, _ = f.values(pts)
    return float(vals[0]) if single else vals


def lipschitz_bound(rho: InputMeasure, psi: DualPotential) -> float:
    """(1/kappa) int drho / (1 - psi): a Lipschitz constant for y -> F(y)."""
    f = _field(rho, psi)
    if f.uncovered.size:
        raise UncoveredInputError(f.uncovered)
    return f.lipschitz


# ---------------------------------------------------------------------------
# scanning
# ---------------------------------------------------------------------------

@dataclass
class ScanResult:
    max_F: float
    argmax: np.ndarray
    sup_bound: float
    lipschitz: float
    grid_spacing: float
    # refined local maxima of F, sorted by decreasing value
    peaks: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    peak_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grid: np.ndarray | None = None
    grid_values: np.ndarray | None = None


def _taylor_cell_bound(fa, ga, fb, gb, h, U):
    """max over t in [0, h] of min(two second-order Taylor bounds from the ends)."""
    def qa(t):
        return fa + ga * t + 0.5 * U * t * t

    def qb(t):
        tau = h - t
        return fb - gb * tau + 0.5 * U * tau * tau

    def val(t):
        return np.minimum(qa(t), qb(t))

    best = np.maximum(val(np.zeros_like(h)), val(h))
    c0 = fa - fb + gb * h - 0.5 * U * h * h
    c1 = ga - gb + U * h
    with np.errstate(divide="ignore", invalid="ignore"):
        tc = np.where(c1 != 0.0, -c0 / c1, -1.0)
        ta = np.where(U < 0.0, -ga / U, -1.0)
        tb = np.where(U < 0.0, h - gb / U, -1.0)
    for t in (tc, ta, tb):
        ok = (t >= 0.0) & (t <= h)
        tt = np.where(ok, t, 0.0)
        best = np.where(ok, np.maximum(best, val(tt)), best)
    return best


def _golden_max(fun, a, b, steps=GOLDEN_STEPS):
    """Golden-section maximisation on many brackets at once (``fun`` is vectorised)."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(steps):
        left = fc >= fd
        # left: keep [a, d]; otherwise keep [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        keep_t = np.where(left, c, d)
        keep_f = np.where(left, fc, fd)
        t_new = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        f_new = fun(t_new)
        c = np.where(left, t_new, keep_t)
        fc = np.where(left, f_new, keep_f)
        d = np.where(left, keep_t, t_new)
        fd = np.where(left, keep_f, f_new)
    take_c = fc >= fd
    return np.where(take_c, c, d), np.where(take_c, fc, fd)


def _scan_1d(f, domain, delta, extra_points, n_refine):
    lo, hi = float(domain.lower[0]), float(domain.upper[0])
    n = int(math.ceil((hi - lo) / delta)) + 1
    grid = np.linspace(lo, hi, n)
    extra = np.asarray(extra_points, dtype=float).reshape(-1)
    extra = extra[(extra >= lo) & (extra <= hi)]
    grid = np.unique(np.concatenate([grid, extra]))
    F, dF = f.values(grid.reshape(-1, 1), grad=True)
    g = dF[:, 0]
    a, b = grid[:-1], grid[1:]
    h = b - a
    U = f.curvature(a.reshape(-1, 1), b.reshape(-1, 1))
    taylor = float(np.max(_taylor_cell_bound(F[:-1], g[:-1], F[1:], g[1:], h, U))) if h.size else float(F.max())
    lip = f.lipschitz
    lip_bound = float(F.max()) + lip * float(h.max() if h.size else 0.0) / 2.0
    sup_bound = max(min(taylor, lip_bound), float(F.max()))

    # local maxima on the grid, refined by golden section
    left = np.concatenate([[-np.inf], F[:-1]])
    right = np.concatenate([F[1:], [-np.inf]])
    cand = np.nonzero((F >= left) & (F >= right))[0]
    # ties (flat plateaus) keep the smallest coordinate first
    cand = cand[np.lexsort((grid[cand], -F[cand]))][:n_refine]

    def fun(t):
        return f.values(t.reshape(-1, 1))[0]

    a0 = grid[np.maximum(cand - 1, 0)]
    b0 = grid[np.minimum(cand + 1, grid.size - 1)]
    peaks = grid[cand].copy()
    peak_vals = F[cand].copy()
    ok = b0 > a0
    if np.any(ok):
        t, v = _golden_max(fun, a0[ok], b0[ok])
        better = v > peak_vals[ok]
        peaks[ok] = np.where(better, t, peaks[ok])
        peak_vals[ok] = np.where(better, v, peak_vals[ok])
    peaks = peaks.reshape(-1, 1)
    order = np.lexsort((peaks[:, 0], -peak_vals))
    peaks, peak_vals = peaks[order], peak_vals[order]
    k = int(np.argmax(F))
    max_F, argmax = float(F[k]), np.array([grid[k]])
    if peak_vals.size and peak_vals[0] > max_F:
        max_F, argmax = float(peak_vals[0]), peaks[0].copy()
    sup_bound = max(sup_bound, max_F)
    return ScanResult(max_F, argmax, sup_bound, lip, float(h.max() if h.size else 0.0),
                      peaks, peak_vals, grid, F)


_CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))
# branch and bound limits for the 2D scan
REFINE_DEPTH = 20
REFINE_CELLS = 200_000


def _cell_bounds_2d(f, clo, h, Fc, Gc, lip):
    """Upper bounds of F on cells ``[clo, clo + h]`` from corner values and gradients.

    ``Fc`` is (4, n) and ``Gc`` is (4, n, 2) in ``_CORNERS`` order. Each corner
    gives a second-order Taylor bound with curvature U (the cell-wide bound on
    the largest Hessian eigenvalue), or the vertex of its concave model when
    U < 0; the cell bound is the smallest of these, capped by a Lipschitz bound.
    """
    U = f.curvature(clo, clo + h)
    Up = np.maximum(U, 0.0)
    bounds = np.full(clo.shape[0], np.inf)
    for c, (i, j) in enumerate(_CORNERS):
        fv, gx, gy = Fc[c], Gc[c, :, 0], Gc[c, :, 1]
        best = np.full(fv.shape, -np.inf)
        for (p, q) in _CORNERS:
            dx, dy = (p - i) * h[:, 0], (q - j) * h[:, 1]
            best = np.maximum(best, fv + gx * dx + gy * dy + 0.5 * Up * (dx * dx + dy * dy))
        with np.errstate(divide="ignore", invalid="ignore"):
            concave = fv + (gx * gx + gy * gy) / (-2.0 * U)
        best = np.where(U < 0.0, np.minimum(best, concave), best)
        bounds = np.minimum(bounds, best)
    diag = np.hypot(h[:, 0], h[:, 1])
    return np.minimum(bounds, Fc.max(axis=0) + lip * diag / 2.0)


def _refine_2d(f, clo, h, bounds, best, lip, tol):
    """Split cells whose bound exceeds ``best + tol`` into quarters until none do.

    Returns the certified bound over the given cells together with the best
    corner value and its location seen while refining.
    """
    settled = -np.inf
    arg = None
    cells = 0
    for _ in range(REFINE_DEPTH):
        open_ = bounds > best + tol
        if np.any(~open_):
            settled = max(settled, float(bounds[~open_].max()))
        clo, h = clo[open_], h[open_]
        if clo.shape[0] == 0:
            return settled, best, arg
        cells += 4 * clo.shape[0]
        if cells > REFINE_CELLS:
            return max(settled, float(bounds[open_].max())), best, arg
        bounds_open = bounds[open_]
        h = np.repeat(h / 2.0, 4, axis=0)
        clo = np.repeat(clo, 4, axis=0) + np.tile(np.array(_CORNERS, dtype=float), (clo.shape[0], 1)) * h
        corners = np.concatenate([clo + np.array(c) * h for c in _CORNERS])
        Fv, Gv = f.values(corners, grad=True)
        n = clo.shape[0]
        Fc = Fv.reshape(4, n)
        Gc = Gv.reshape(4, n, 2)
        k = int(np.argmax(Fv))
        if Fv[k] > best:
            best, arg = float(Fv[k]), corners[k].copy()
        # a child never needs a looser bound than its parent
        bounds = np.minimum(_cell_bounds_2d(f, clo, h, Fc, Gc, lip), np.repeat(bounds_open, 4))
    return max(settled, float(bounds.max())), best, arg


def _scan_2d(f, domain, delta, extra_points, n_refine, refine_tol=1e-10):
    from scipy import optimize

    lo, hi = domain.lower, domain.upper
    n0 = int(math.ceil((hi[0] - lo[0]) / delta)) + 1
    n1 = int(math.ceil((hi[1] - lo[1]) / delta)) + 1
    g0 = np.linspace(lo[0], hi[0], n0)
    g1 = np.linspace(lo[1], hi[1], n1)
    X, Y = np.meshgrid(g0, g1, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    F, dF = f.values(pts, grad=True)
    Fg = F.reshape(n0, n1)
    Gg = dF.reshape(n0, n1, 2)
    h0, h1 = g0[1] - g0[0], g1[1] - g1[0]
    clo = np.column_stack([X[:-1, :-1].ravel(), Y[:-1, :-1].ravel()])
    h = np.tile([h0, h1], (clo.shape[0], 1))
    Fc = np.stack([Fg[i:n0 - 1 + i, j:n1 - 1 + j].ravel() for (i, j) in _CORNERS])
    Gc = np.stack([Gg[i:n0 - 1 + i, j:n1 - 1 + j].reshape(-1, 2) for (i, j) in _CORNERS])
    lip = f.lipschitz
    bounds = _cell_bounds_2d(f, clo, h, Fc, Gc, lip)
    diag = math.hypot(h0, h1)
    extra = np.asarray(extra_points, dtype=float).reshape(-1, 2)
    extra = extra[np.all((extra >= lo) & (extra <= hi), axis=1)]
    Fe = f.values(extra)[0] if extra.size else np.zeros(0)

    # local maxima on the tensor grid
    padded = np.pad(Fg, 1, constant_values=-np.inf)
    is_max = np.ones_like(Fg, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_max &= Fg >= padded[1 + di:1 + di + n0, 1 + dj:1 + dj + n1]
    ii, jj = np.nonzero(is_max)
    vals = Fg[ii, jj]
    order = np.lexsort((Y[ii, jj], X[ii, jj], -vals))[:n_refine]
    peaks, peak_vals = [], []
    for k in order:
        x0 = np.array([X[ii[k], jj[k]], Y[ii[k], jj[k]]])
        box = [(max(lo[0], x0[0] - h0), min(hi[0], x0[0] + h0)),
               (max(lo[1], x0[1] - h1), min(hi[1], x0[1] + h1))]

        def neg(z):
            v, gr = f.values(z.reshape(1, 2), grad=True)
            return -float(v[0]), -gr[0]

        res = optimize.minimize(neg, x0, jac=True, method="L-BFGS-B", bounds=box,
                                options={"maxiter": 50})
        if -res.fun >= vals[k]:
            peaks.append(res.x)
            peak_vals.append(-float(res.fun))
        else:
            peaks.append(x0)
            peak_vals.append(float(vals[k]))
    for p, v in zip(extra, Fe):
        peaks.append(p)
        peak_vals.append(float(v))
    peaks = np.array(peaks).reshape(-1, 2)
    peak_vals = np.array(peak_vals)
    order = np.lexsort((peaks[:, 1], peaks[:, 0], -peak_vals)) if peak_vals.size else np.zeros(0, int)
    peaks, peak_vals = peaks[order], peak_vals[order]
    k = int(np.argmax(F))
    max_F, argmax = float(F[k]), pts[k].copy()
    if peak_vals.size and peak_vals[0] > max_F:
        max_F, argmax = float(peak_vals[0]), peaks[0].copy()
    # branch and bound on the cells that could still hide a larger value
    tol = refine_tol * max(1.0, abs(max_F))
    sup_bound, best, arg = _refine_2d(f, clo, h, bounds, max_F, lip, tol)
    if best > max_F:
        max_F, argmax = best, arg
    sup_bound = max(sup_bound, max_F)
    return ScanResult(max_F, argmax, sup_bound, lip, diag, peaks, peak_vals, pts, F)


def scan_max_F(rho: InputMeasure, psi: DualPotential, delta: float | None = None,
               domain: Domain | None = None, n_refine: int = 16) -> ScanResult:
    """Evaluate F on a grid plus all atom positions and bound sup F from above.

    ``sup_bound`` is certified: it never exceeds ``max_F + lipschitz*delta/2``
    (with the cell diagonal in 2D) and is usually much tighter thanks to a
    per-cell second-order bound.
    """
    f = _field(rho, psi)
    if f.uncovered.size:
        raise UncoveredInputError(f.uncovered)
    domain = domain or default_domain(rho, psi.kappa)
    delta = float(delta) if delta is not None else default_spacing(domain, psi.kappa)
    if not delta > 0.0:
        raise ValueError("grid spacing must be positive")
    extra = [psi.generator.positions.reshape(-1, domain.dim)]
    if isinstance(rho, DiscreteInput):
        extra.append(rho.points)
    extra = np.vstack(extra)
    if domain.dim == 1:
        return _scan_1d(f, domain, delta, extra, n_refine)
    return _scan_2d(f, domain, delta, extra, n_refine)


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass
class CertificateReport:
    max_F: float
    argmax_location: np.ndarray
    lipschitz_bound: float
    feasible_dual_value: float
    gap_bound: float
    grid_spacing: float
    objective: float
    sup_bound: float
    scale: float
    integral_psi: float
    # sum_j m_j |1 - F(y_j)|
    complementarity: float
    atom_F: np.ndarray
    peaks: np.ndarray
    peak_values: np.ndarray
    uncovered: np.ndarray

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.gap_bound)


def certify(rho: InputMeasure, nu: ParticleMeasure, kappa: float, delta: float | None = None,
            domain: Domain | None = None, n_refine: int = 16) -> CertificateReport:
    """Duality-gap certificate for the particles ``nu``.

    Uncovered input mass yields a report with infinite ``max_F`` and gap and the
    offending points in ``uncovered`` (the solver inserts particles there).
    """
    kappa = check_kappa(kappa)
    psi = DualPotential(nu, kappa)
    value, grad, _ = evaluate(rho, nu.positions, nu.masses, kappa, grad=True)
    f = _field(rho, psi)
    dim = nu.dim if nu.size else (1 if isinstance(rho, Density1D) else rho.dim)
    if f.uncovered.size:
        return CertificateReport(
            max_F=math.inf, argmax_location=f.uncovered[0].copy(), lipschitz_bound=math.inf,
            feasible_dual_value=-math.inf, gap_bound=math.inf, grid_spacing=float(delta or 0.0),
            objective=value, sup_bound=math.inf, scale=math.inf, integral_psi=f.integral_psi,
            complementarity=math.inf, atom_F=1.0 - grad.d_mass, peaks=np.zeros((0, dim)),
            peak_values=np.zeros(0), uncovered=f.uncovered.copy())
    scan = scan_max_F(rho, psi, delta=delta, domain=domain, n_refine=n_refine)
    scale = max(1.0, scan.sup_bound)
    # 1 - psi' = scale * (1 - psi) makes F(psi') = F(psi) / scale <= 1
    feasible = 1.0 - scale * (1.0 - f.integral_psi)
    atom_F = 1.0 - grad.d_mass
    comp = math.fsum((nu.masses * np.abs(grad.d_mass)).tolist())
    return CertificateReport(
        max_F=scan.max_F, argmax_location=scan.argmax, lipschitz_bound=scan.lipschitz,
        feasible_dual_value=feasible, gap_bound=value - feasible, grid_spacing=scan.grid_spacing,
        objective=value, sup_bound=scan.sup_bound, scale=scale, integral_psi=f.integral_psi,
        complementarity=comp, atom_F=atom_F, peaks=scan.peaks, peak_values=scan.peak_values,
        uncovered=np.zeros((0, dim)))
