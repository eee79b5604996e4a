"""CSV emission. Floats are written with 17 significant digits (round-trip exact)
and rows in a fixed order, so equal inputs give byte-identical files."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .linkage import Dendrogram
from .measures import DiscreteInput, ParticleMeasure

__all__ = [
    "fmt",
    "coordinate_columns",
    "particle_rows",
    "write_csv",
    "write_particles",
    "write_diagnostics",
    "write_fscan",
    "write_psi",
    "write_dendrogram",
    "write_samples",
    "DIAGNOSTIC_COLUMNS",
]

DIAGNOSTIC_COLUMNS = ["kappa", "n_atoms", "total_mass", "objective", "dual_value", "gap_bound",
                      "max_F", "iterations", "converged"]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def coordinate_columns(prefix: str, dim: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(dim)]


def write_csv(path: Path | str, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def particle_rows(kappa: float, nu: ParticleMeasure):
    """Rows (kappa, atom_index, x..., mass) with atoms sorted by position."""
    pos = nu.positions.reshape(nu.size, -1)
    order = np.lexsort(pos.T[::-1]) if nu.size else np.zeros(0, int)
    for k, j in enumerate(order):
        yield [float(kappa), k, *pos[j].tolist(), float(nu.masses[j])]


def write_particles(path, solutions, dim: int) -> Path:
    """``solutions`` is a sequence of (kappa, ParticleMeasure)."""
    header = ["kappa", "atom_index", *coordinate_columns("x", dim), "mass"]
    rows = [r for kappa, nu in solutions for r in particle_rows(kappa, nu)]
    return write_csv(path, header, rows)


def write_diagnostics(path, rows) -> Path:
    """``rows`` are dicts keyed by DIAGNOSTIC_COLUMNS."""
    return write_csv(path, DIAGNOSTIC_COLUMNS, ([r[c] for c in DIAGNOSTIC_COLUMNS] for r in rows))


def _field_rows(kappa, points, values):
    pts = np.asarray(points, dtype=float)
    pts = pts.reshape(pts.shape[0], -1)
    for p, v in zip(pts, np.asarray(values, dtype=float)):
        yield [float(kappa), *p.tolist(), float(v)]


def write_fscan(path, scans, dim: int) -> Path:
    """``scans`` is a sequence of (kappa, points, F values)."""
    header = ["kappa", *coordinate_columns("y", dim), "F"]
    return write_csv(path, header, (r for k, p, v in scans for r in _field_rows(k, p, v)))


def write_psi(path, fields_, dim: int) -> Path:
    """``fields_`` is a sequence of (kappa, points, psi values)."""
    header = ["kappa", *coordinate_columns("x", dim), "psi"]
    return write_csv(path, header, (r for k, p, v in fields_ for r in _field_rows(k, p, v)))


def write_dendrogram(path, dendro: Dendrogram) -> Path:
    header = ["merge_index", "cluster_a", "cluster_b", "distance", "size"]
    rows = ([k, int(a), int(b), float(d), int(s)] for k, (a, b, d, s) in enumerate(dendro.merges()))
    return write_csv(path, header, rows)


def write_samples(path, rho: DiscreteInput) -> Path:
    header = ["atom_index", *coordinate_columns("x", rho.dim), "weight"]
    rows = ([k, *p.tolist(), float(w)] for k, (p, w) in enumerate(zip(rho.points, rho.weights)))
    return write_csv(path, header, rows)
