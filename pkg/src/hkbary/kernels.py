"""Backend selection for the hot kernel sums.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``HKBARY_BACKEND=python`` to force the fallback (``=compiled`` makes a
missing extension an import error).
"""
import os

import numpy as np

from . import _kernels_py

_requested = os.environ.get("HKBARY_BACKEND", "auto").lower()
if _requested not in ("auto", "python", "compiled"):
    raise ImportError(f"HKBARY_BACKEND must be auto, python or compiled, not {_requested!r}")

_compiled = None
if _requested != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        if _requested == "compiled":
            raise
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def get_impl(name: str | None = None):
    """Return the kernel module for ``name`` ("compiled" or "python")."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def _prepare(src, coef):
    src = np.ascontiguousarray(src, dtype=np.float64)
    coef = np.ascontiguousarray(coef, dtype=np.float64)
    if src.ndim != 2 or coef.shape != (src.shape[0],):
        raise ValueError("src must be (r, d) with one coefficient per row")
    if src.shape[0] > 1 and np.any(np.diff(src[:, 0]) < 0):
        order = np.argsort(src[:, 0], kind="stable")
        src = np.ascontiguousarray(src[order])
        coef = np.ascontiguousarray(coef[order])
    return src, coef


def kernel_sums(src, coef, tgt, kappa: float, grad: bool = False, backend: str | None = None):
    """sum_i coef_i Cos^2(|src_i - t| / kappa) at every row t of ``tgt``.

    Returns ``(values, grads)``; ``grads`` is the gradient with respect to the
    target point (zeros when ``grad`` is false).
    """
    src, coef = _prepare(src, coef)
    tgt = np.ascontiguousarray(tgt, dtype=np.float64)
    if tgt.ndim != 2 or tgt.shape[1] != src.shape[1]:
        raise ValueError("target dimension does not match source dimension")
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        return np.zeros(tgt.shape[0]), np.zeros(tgt.shape)
    return get_impl(backend).kernel_sums(src, coef, tgt, float(kappa), bool(grad))


def cell_curvature(src, coef, lo_corner, hi_corner, kappa: float, backend: str | None = None):
    """Per-cell upper bound on the top Hessian eigenvalue of the kernel sum."""
    src, coef = _prepare(src, coef)
    lo_corner = np.ascontiguousarray(lo_corner, dtype=np.float64)
    hi_corner = np.ascontiguousarray(hi_corner, dtype=np.float64)
    if src.shape[0] == 0 or lo_corner.shape[0] == 0:
        return np.zeros(lo_corner.shape[0])
    return get_impl(backend).cell_curvature(src, coef, lo_corner, hi_corner, float(kappa))
