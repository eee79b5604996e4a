"""Pure numpy implementation of the kernel sums (fallback backend).

Same contract as the compiled ``_kernels`` module: ``src`` sorted by its first
coordinate, all arrays C-contiguous float64. Targets are processed in chunks
so memory stays bounded for large scans.
"""
import math

import numpy as np

_CHUNK_ELEMS = 1 << 21


def _distances(src, tgt_chunk):
    diff = tgt_chunk[:, None, :] - src[None, :, :]
    if diff.shape[-1] == 1:
        return diff, np.abs(diff[..., 0])
    return diff, np.hypot(diff[..., 0], diff[..., 1])


def kernel_sums(src, coef, tgt, kappa, grad):
    src = np.asarray(src, dtype=float)
    coef = np.asarray(coef, dtype=float)
    tgt = np.asarray(tgt, dtype=float)
    q, d = tgt.shape
    r = src.shape[0]
    radius = 0.5 * math.pi * kappa
    values = np.zeros(q)
    grads = np.zeros((q, d))
    if r == 0 or q == 0:
        return values, grads
    step = max(1, _CHUNK_ELEMS // max(r, 1))
    for start in range(0, q, step):
        stop = min(q, start + step)
        diff, dist = _distances(src, tgt[start:stop])
        inside = dist < radius
        s = np.where(inside, dist / kappa, 0.0)
        c = np.where(inside, np.cos(s), 0.0)
        values[start:stop] = (c * c) @ coef
        if grad:
            with np.errstate(invalid="ignore", divide="ignore"):
                w = np.where(inside & (dist > 0.0),
                             -2.0 * c * np.sin(s) / (kappa * dist), 0.0) * coef
            grads[start:stop] = np.einsum("ki,kid->kd", w, diff)
    return values, grads


def cell_curvature(src, coef, lo_corner, hi_corner, kappa):
    src = np.asarray(src, dtype=float)
    coef = np.asarray(coef, dtype=float)
    lo_corner = np.asarray(lo_corner, dtype=float)
    hi_corner = np.asarray(hi_corner, dtype=float)
    q, d = lo_corner.shape
    r = src.shape[0]
    radius = 0.5 * math.pi * kappa
    inv2 = 2.0 / (kappa * kappa)
    out = np.zeros(q)
    if r == 0 or q == 0:
        return out
    step = max(1, _CHUNK_ELEMS // max(r * d, 1))
    for start in range(0, q, step):
        stop = min(q, start + step)
        lo = lo_corner[start:stop, None, :]
        hi = hi_corner[start:stop, None, :]
        p = src[None, :, :]
        below = np.clip(lo - p, 0.0, None)
        above = np.clip(p - hi, 0.0, None)
        dmin = np.sqrt(np.sum(below * below + above * above, axis=-1))
        far = np.maximum(np.abs(p - lo), np.abs(p - hi))
        e = np.minimum(np.sqrt(np.sum(far * far, axis=-1)), radius)
        u = -inv2 * np.cos(2.0 * e / kappa)
        if d == 2:
            with np.errstate(invalid="ignore", divide="ignore"):
                tang = np.where(e > 0.0, -np.sin(2.0 * e / kappa) / (kappa * e), -inv2)
            u = np.maximum(u, tang)
        u = np.where(dmin < radius, u, 0.0)
        out[start:stop] = u @ coef
    return out
