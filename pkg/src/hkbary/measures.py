"""Measures on a box domain and the truncated trigonometric kernels.

Everything here is an immutable value: arrays handed to the constructors are
copied and flagged read-only, so measures can be shared between workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import special

HALF_PI = 0.5 * math.pi

__all__ = [
    "Domain",
    "ParticleMeasure",
    "DiscreteInput",
    "Density1D",
    "InputMeasure",
    "check_kappa",
    "cos_trunc",
    "sin_trunc",
    "cos2_kernel",
    "pairwise_distance",
]


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def check_kappa(kappa) -> float:
    """Return ``kappa`` as a float, rejecting non-positive or non-finite values."""
    k = float(kappa)
    if not (math.isfinite(k) and k > 0.0):
        raise ValueError(f"kappa must be a positive finite length, got {kappa!r}")
    return k


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def cos_trunc(s):
    """cos(min(|s|, pi/2)); accepts scalars or arrays."""
    a = np.minimum(np.abs(s), HALF_PI)
    out = np.cos(a)
    # cos(pi/2) is 6e-17 in floating point; the truncation makes it exactly 0.
    out = np.where(a >= HALF_PI, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def sin_trunc(s):
    """sin(s) on [0, pi/2], zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.where((s >= 0.0) & (s <= HALF_PI), np.sin(s), 0.0)
    return float(out) if out.ndim == 0 else out


def pairwise_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows of ``x`` (r, d) and ``y`` (s, d)."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    diff = x[:, None, :] - y[None, :, :]
    if diff.shape[-1] == 1:
        return np.abs(diff[..., 0])
    if diff.shape[-1] == 2:
        return np.hypot(diff[..., 0], diff[..., 1])
    raise ValueError("only dimensions 1 and 2 are supported")


def cos2_kernel(x, y, kappa) -> float:
    """Cos^2(|x - y| / kappa) for two points."""
    kappa = check_kappa(kappa)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("points must have the same dimension")
    if x.size == 1:
        r = abs(float(x[0]) - float(y[0]))
    elif x.size == 2:
        r = math.hypot(float(x[0] - y[0]), float(x[1] - y[1]))
    else:
        raise ValueError("only dimensions 1 and 2 are supported")
    c = cos_trunc(r / kappa)
    return c * c


# ---------------------------------------------------------------------------
# domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Axis-aligned box [lower, upper] in dimension 1 or 2."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lower))
        hi = _frozen(np.atleast_1d(self.upper))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lower and upper must be vectors of equal length")
        if lo.size not in (1, 2):
            raise ValueError(f"dimension {lo.size} not supported (only 1 or 2)")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("domain bounds must be finite")
        if not np.all(lo < hi):
            raise ValueError("domain requires lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def interval(cls, a: float = 0.0, b: float = 1.0) -> "Domain":
        return cls(np.array([a]), np.array([b]))

    @classmethod
    def unit(cls, dim: int = 1) -> "Domain":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return int(self.lower.size)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, points, tol: float = 0.0) -> bool:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def clip(self, points) -> np.ndarray:
        return np.clip(np.asarray(points, dtype=float), self.lower, self.upper)

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((tuple(self.lower), tuple(self.upper)))


# ---------------------------------------------------------------------------
# particle measures
# ---------------------------------------------------------------------------

def _as_points(positions, dim: int | None = None) -> np.ndarray:
    p = np.asarray(positions, dtype=float)
    if p.ndim == 1:
        if dim is None or dim == 1:
            p = p.reshape(-1, 1)
        else:
            p = p.reshape(-1, dim)
    if p.ndim != 2:
        raise ValueError("positions must be a (n, d) array")
    if p.shape[1] not in (1, 2):
        raise ValueError(f"dimension {p.shape[1]} not supported (only 1 or 2)")
    return p


@dataclass(frozen=True)
class ParticleMeasure:
    """Finite nonnegative atomic measure sum_j m_j delta_{y_j}.

    Zero masses are allowed (transient solver states); :meth:`normalized`
    strips them.
    """

    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if m.size:
            p = _as_points(self.positions)
        else:
            p = np.asarray(self.positions, dtype=float)
            p = p.reshape(0, p.shape[1] if p.ndim == 2 and p.shape[1] else 1)
        if m.ndim != 1 or m.size != p.shape[0]:
            raise ValueError("positions and masses must have matching lengths")
        if not np.all(np.isfinite(m)) or np.any(m < 0.0):
            raise ValueError("masses must be finite and nonnegative")
        if not np.all(np.isfinite(p)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "positions", _frozen(p))
        object.__setattr__(self, "masses", _frozen(m))

    @classmethod
    def empty(cls, dim: int = 1) -> "ParticleMeasure":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple]) -> "ParticleMeasure":
        """Build from ``[(position, mass), ...]``; positions may be scalars."""
        if not atoms:
            return cls.empty(1)
        pos = [np.atleast_1d(np.asarray(a[0], dtype=float)) for a in atoms]
        return cls(np.vstack(pos), np.array([a[1] for a in atoms], dtype=float))

    @property
    def dim(self) -> int:
        return int(self.positions.shape[1])

    @property
    def size(self) -> int:
        return int(self.masses.size)

    def __len__(self) -> int:
        return self.size

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses.tolist())

    def check_domain(self, domain: Domain, tol: float = 1e-12) -> None:
        if self.size and (self.dim != domain.dim or not domain.contains(self.positions, tol)):
            raise ValueError("particle positions lie outside the domain")

    def normalized(self, threshold: float = 0.0) -> "ParticleMeasure":
        """Drop atoms with mass <= threshold (exact zeros by default)."""
        keep = self.masses > threshold
        return ParticleMeasure(self.positions[keep], self.masses[keep])

    def add(self, position, mass: float) -> "ParticleMeasure":
        pos = np.atleast_1d(np.asarray(position, dtype=float)).reshape(1, -1)
        return ParticleMeasure(np.vstack([self.positions.reshape(-1, pos.shape[1]), pos]),
                               np.append(self.masses, float(mass)))

    def remove(self, index: int) -> "ParticleMeasure":
        keep = np.ones(self.size, dtype=bool)
        keep[index] = False
        return ParticleMeasure(self.positions[keep], self.masses[keep])

    def merge(self, i: int, j: int) -> "ParticleMeasure":
        """Replace atoms i and j by one atom at their mass-weighted mean."""
        if i == j:
            raise ValueError("cannot merge an atom with itself")
        mi, mj = self.masses[i], self.masses[j]
        mass = mi + mj
        if mass > 0.0:
            pos = (mi * self.positions[i] + mj * self.positions[j]) / mass
        else:
            pos = 0.5 * (self.positions[i] + self.positions[j])
        lo = min(i, j)
        keep = np.ones(self.size, dtype=bool)
        keep[max(i, j)] = False
        positions = self.positions.copy()
        masses = self.masses.copy()
        positions[lo] = pos
        masses[lo] = mass
        return ParticleMeasure(positions[keep], masses[keep])

    def scaled(self, factor: float) -> "ParticleMeasure":
        return ParticleMeasure(self.positions, self.masses * float(factor))

    def atoms(self) -> list[tuple]:
        return [(tuple(p), float(m)) for p, m in zip(self.positions, self.masses)]

    def __eq__(self, other):
        if not isinstance(other, ParticleMeasure):
            return NotImplemented
        return (self.positions.shape == other.positions.shape
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.masses, other.masses))

    __hash__ = None


# ---------------------------------------------------------------------------
# input measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteInput:
    """Probability measure sum_i lambda_i delta_{x_i} with lambda_i > 0."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        p = _as_points(self.points)
        if w.ndim != 1 or w.size != p.shape[0] or w.size == 0:
            raise ValueError("points and weights must be nonempty with matching lengths")
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(w)):
            raise ValueError("input measure must be finite")
        if np.any(w <= 0.0):
            raise ValueError("discrete weights must be strictly positive")
        if abs(math.fsum(w.tolist()) - 1.0) > 1e-12:
            raise ValueError("discrete weights must sum to 1")
        object.__setattr__(self, "points", _frozen(p))
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple]) -> "DiscreteInput":
        """Build from ``[(weight, position), ...]``."""
        pos = [np.atleast_1d(np.asarray(a[1], dtype=float)) for a in atoms]
        return cls(np.vstack(pos), np.array([a[0] for a in atoms], dtype=float))

    @classmethod
    def uniform_weights(cls, points) -> "DiscreteInput":
        p = _as_points(points)
        n = p.shape[0]
        if n == 0:
            raise ValueError("empty sample cannot be a probability measure")
        return cls(p, np.full(n, 1.0 / n))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def mean(self) -> np.ndarray:
        return np.array([math.fsum((self.weights * self.points[:, k]).tolist())
                         for k in range(self.dim)])


_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Density1D:
    """Absolutely continuous probability on an interval domain.

    ``kind`` is ``"uniform"`` (params ``a``, ``b``) or ``"gaussian-mixture"``
    (params ``means``, ``stddevs``, ``weights``). The density is restricted to
    the domain and renormalised there. ``tol`` is the absolute quadrature
    tolerance used whenever integrals against this measure are evaluated.
    """

    kind: str
    params: dict = field(default_factory=dict)
    domain: Domain = field(default_factory=Domain.interval)
    tol: float = 1e-10

    def __post_init__(self):
        if self.domain.dim != 1:
            raise ValueError("densities are supported in dimension 1 only")
        if not self.tol > 0.0:
            raise ValueError("quadrature tolerance must be positive")
        lo, hi = float(self.domain.lower[0]), float(self.domain.upper[0])
        params = dict(self.params)
        if self.kind == "uniform":
            a, b = float(params.get("a", lo)), float(params.get("b", hi))
            if not a < b:
                raise ValueError("uniform density requires a < b")
            params = {"a": a, "b": b}
            s_lo, s_hi = max(a, lo), min(b, hi)
            if not s_lo < s_hi:
                raise ValueError("density support does not meet the domain")
            norm = s_hi - s_lo
        elif self.kind == "gaussian-mixture":
            means = np.asarray(params["means"], dtype=float)
            sds = np.asarray(params["stddevs"], dtype=float)
            w = np.asarray(params.get("weights", np.full(means.size, 1.0 / means.size)), dtype=float)
            if not (means.shape == sds.shape == w.shape and means.ndim == 1 and means.size):
                raise ValueError("mixture means, stddevs and weights must be equal-length vectors")
            if np.any(sds <= 0.0) or np.any(w < 0.0):
                raise ValueError("mixture stddevs must be positive and weights nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("mixture weights must sum to 1")
            params = {"means": tuple(means.tolist()), "stddevs": tuple(sds.tolist()),
                      "weights": tuple(w.tolist())}
            s_lo, s_hi = lo, hi
            norm = float(np.sum(w * (special.ndtr((hi - means) / sds) - special.ndtr((lo - means) / sds))))
            if not norm > 0.0:
                raise ValueError("mixture has no mass inside the domain")
        else:
            raise ValueError(f"unknown density kind {self.kind!r}")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "_support", (s_lo, s_hi))
        object.__setattr__(self, "_norm", norm)

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0, domain: Domain | None = None,
                tol: float = 1e-10) -> "Density1D":
        return cls("uniform", {"a": a, "b": b}, domain or Domain.interval(), tol)

    @classmethod
    def gaussian_mixture(cls, means, stddevs, weights=None, domain: Domain | None = None,
                         tol: float = 1e-10) -> "Density1D":
        params = {"means": means, "stddevs": stddevs}
        if weights is not None:
            params["weights"] = weights
        return cls("gaussian-mixture", params, domain or Domain.interval(), tol)

    @property
    def dim(self) -> int:
        return 1

    @property
    def support(self) -> tuple[float, float]:
        """Interval outside of which the density vanishes (within the domain)."""
        return self._support

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self._support
        inside = (x >= lo) & (x <= hi)
        if self.kind == "uniform":
            val = np.full(x.shape, 1.0 / self._norm)
        else:
            p = self.params
            means = np.asarray(p["means"])
            sds = np.asarray(p["stddevs"])
            w = np.asarray(p["weights"])
            z = (x[..., None] - means) / sds
            val = np.sum(w * np.exp(-0.5 * z * z) / (sds * math.sqrt(2.0 * math.pi)), axis=-1) / self._norm
        return np.where(inside, val, 0.0)

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self._support
        xc = np.clip(x, lo, hi)
        if self.kind == "uniform":
            return (xc - lo) / self._norm
        p = self.params
        means = np.asarray(p["means"])
        sds = np.asarray(p["stddevs"])
        w = np.asarray(p["weights"])
        c = special.ndtr((xc[..., None] - means) / sds) - special.ndtr((lo - means) / sds)
        return np.sum(w * c, axis=-1) / self._norm

    def interval_mass(self, a, b) -> np.ndarray:
        """rho([a, b]) for arrays of interval endpoints."""
        return self.cdf(b) - self.cdf(a)

    def mean(self) -> np.ndarray:
        lo, hi = self._support
        if self.kind == "uniform":
            return np.array([0.5 * (lo + hi)])
        p = self.params
        total = 0.0
        for mu, sd, w in zip(p["means"], p["stddevs"], p["weights"]):
            a, b = (lo - mu) / sd, (hi - mu) / sd
            # first moment of the truncated normal piece
            phi_a = math.exp(-0.5 * a * a) / math.sqrt(2 * math.pi)
            phi_b = math.exp(-0.5 * b * b) / math.sqrt(2 * math.pi)
            mass = special.ndtr(b) - special.ndtr(a)
            total += w * (mu * mass + sd * (phi_a - phi_b))
        return np.array([total / self._norm])

    def l2_norm_squared(self) -> float:
        if self.kind == "uniform":
            return 1.0 / self._norm
        from scipy import integrate

        lo, hi = self._support
        val, _ = integrate.quad(lambda t: float(self.pdf(t)) ** 2, lo, hi, limit=200, epsabs=1e-13)
        return val


InputMeasure = Union[DiscreteInput, Density1D]
