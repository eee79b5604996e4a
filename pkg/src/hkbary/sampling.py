"""Reproducible sampling of input measures.

Streams come from the Philox4x64 counter-based generator, keyed by
``(seed, purpose)`` through a SeedSequence, so a sample depends only on the
seed and on what it is for. Uniform variates are built from 53 random bits as
``(k + 0.5) / 2**53`` (never 0 or 1); normal variates use the inverse normal
CDF of Wichura's AS241 (PPND16) rational approximation, which is accurate to
about 1e-16 and easy to port.
"""
from __future__ import annotations

import zlib

import numpy as np

from .measures import DiscreteInput, Domain

__all__ = ["rng_stream", "uniform01", "ppnd16", "sample_density", "DEFAULT_MIXTURE_1D"]

# five-component 1D mixture: (mean, standard deviation) pairs, equal weights
DEFAULT_MIXTURE_1D = {
    "means": [0.15, 0.30, 0.46, 0.71, 0.81],
    "stddevs": [0.05, 0.03, 0.08, 0.03, 0.06],
}

_A = [3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3]
_B = [1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3]
_C = [1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4]
_D = [1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9]
_E = [6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7]
_F = [1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15]


def _horner(coef, x):
    out = np.full_like(x, coef[-1])
    for c in reversed(coef[:-1]):
        out = out * x + c
    return out


def ppnd16(p) -> np.ndarray:
    """Standard normal quantile (AS241). ``p`` must lie in (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("probabilities must lie strictly between 0 and 1")
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)
    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.sqrt(-np.log(np.where(qt < 0.0, p[tail], 1.0 - p[tail])))
        near = r <= 5.0
        z = np.where(near, _horner(_C, r - 1.6) / _horner(_D, r - 1.6),
                     _horner(_E, r - 5.0) / _horner(_F, r - 5.0))
        out[tail] = np.where(qt < 0.0, -z, z)
    return out


def rng_stream(seed: int, purpose: str) -> np.random.Generator:
    """Independent Philox stream for ``(seed, purpose)``."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    key = zlib.crc32(purpose.encode("utf-8"))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(key,))))


def uniform01(gen: np.random.Generator, size) -> np.ndarray:
    """Uniform variates on the open interval (0, 1) with 53 bits each."""
    k = gen.integers(0, 2 ** 53, size=size, dtype=np.uint64)
    return (k.astype(np.float64) + 0.5) / 2.0 ** 53


def _component_counts(n, w, u_gen, stratified):
    if stratified:
        raw = n * w
        counts = np.floor(raw).astype(int)
        # hand out the remainder by largest fractional part, ties by index
        rest = n - counts.sum()
        order = np.lexsort((np.arange(w.size), -(raw - counts)))
        counts[order[:rest]] += 1
        return np.repeat(np.arange(w.size), counts)
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, uniform01(u_gen, n), side="right")


def sample_density(kind: str, params: dict, n: int, seed: int, domain: Domain | None = None,
                   stratified: bool = False) -> DiscreteInput:
    """Draw ``n`` equal-weight atoms from a named density.

    ``kind`` is ``"uniform"`` (params ``lower``/``upper`` vectors, default the
    domain, or ``a``/``b`` in 1D) or ``"gaussian-mixture"`` (params ``means``,
    ``stddevs`` and optional ``weights``, equal by default). In 2D the means
    are pairs and each stddev is a scalar or a pair; a single stddev is shared
    by all components. Samples outside the domain are clamped to its boundary.
    ``stratified`` draws round(n * weight) points from each mixture component
    instead of choosing components at random.
    """
    n = int(n)
    if n < 0:
        raise ValueError("sample size must be nonnegative")
    if n == 0:
        raise ValueError("empty sample cannot be a probability measure")
    domain = domain or Domain.interval()
    d = domain.dim
    if kind == "uniform":
        lo = np.atleast_1d(np.asarray(params.get("lower", params.get("a", domain.lower)), dtype=float))
        hi = np.atleast_1d(np.asarray(params.get("upper", params.get("b", domain.upper)), dtype=float))
        if lo.shape != (d,) or hi.shape != (d,) or np.any(lo >= hi):
            raise ValueError("uniform sampling needs lower < upper in every coordinate")
        u = uniform01(rng_stream(seed, "uniform"), (n, d))
        pts = lo + (hi - lo) * u
    elif kind == "gaussian-mixture":
        means = np.asarray(params["means"], dtype=float).reshape(-1, d)
        c = means.shape[0]
        sds = np.asarray(params["stddevs"], dtype=float)
        if sds.size == 1:
            sds = np.full((c, d), float(sds.reshape(-1)[0]))
        elif sds.size in (c, c * d):
            sds = np.broadcast_to(sds.reshape(c, -1), (c, d))
        else:
            raise ValueError("need one stddev (or one per coordinate) for every component")
        w = np.asarray(params.get("weights", np.full(c, 1.0 / c)), dtype=float)
        if w.shape != (c,) or np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(sds <= 0.0):
            raise ValueError("mixture stddevs must be positive")
        comp = _component_counts(n, w, rng_stream(seed, "mixture-component"), stratified)
        z = ppnd16(uniform01(rng_stream(seed, "mixture-normal"), (n, d)))
        pts = means[comp] + sds[comp] * z
    else:
        raise ValueError(f"unknown density kind {kind!r}")
    pts = domain.clip(pts)
    return DiscreteInput(pts, np.full(n, 1.0 / n))
