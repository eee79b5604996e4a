"""Experiment configuration: JSON files validated against a shipped schema.

A config names the input measure, the kappa values, solver settings and what
to write. Kappa values are a single number, an explicit list or a range string
``"a:b:n[:log|:lin]"`` (log spacing unless ``lin`` is given). Relative file
paths are resolved against the directory of the config file.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .measures import Density1D, DiscreteInput, Domain, InputMeasure, ParticleMeasure
from .sampling import sample_density
from .solver import SolverConfig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "DEFAULT_EMIT",
    "F_THRESHOLD_SCALE",
    "load_schema",
    "parse_kappa_spec",
    "load_config",
    "parse_config",
]

# presentation threshold for F scans: rows with F >= 1 - scale / kappa are written
F_THRESHOLD_SCALE = math.exp(-9.5)
DEFAULT_EMIT = {"particles": True, "diagnostics": True, "fscan": False, "psi": False, "dendrogram": False}


class ConfigError(ValueError):
    """Invalid configuration (maps to exit status 2)."""


@dataclass
class ExperimentConfig:
    rho: InputMeasure
    kappas: np.ndarray
    solver: SolverConfig
    domain: Domain
    out_dir: Path
    emit: dict = field(default_factory=lambda: dict(DEFAULT_EMIT))
    warm_start: bool = True
    seed: int = 0
    name: str = ""
    nu: ParticleMeasure | None = None
    oracle: dict = field(default_factory=dict)
    scan_points: int | None = None
    f_threshold_scale: float = F_THRESHOLD_SCALE
    raw: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.domain.dim


def load_schema() -> dict:
    text = resources.files("hkbary").joinpath("schema/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def parse_kappa_spec(spec) -> np.ndarray:
    """Kappa values from a number, a list or ``"a:b:n[:log|:lin]"``."""
    if isinstance(spec, bool):
        raise ConfigError("kappa must be a number, a list or a range string")
    if isinstance(spec, (int, float)):
        values = np.array([float(spec)])
    elif isinstance(spec, (list, tuple)):
        if not spec:
            raise ConfigError("kappa list is empty")
        values = np.array([float(v) for v in spec])
    elif isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"kappa range must read a:b:n[:log|:lin], got {spec!r}")
        try:
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad kappa range {spec!r}: {exc}") from None
        mode = parts[3] if len(parts) == 4 else "log"
        if mode not in ("log", "lin"):
            raise ConfigError(f"kappa range spacing must be log or lin, got {mode!r}")
        if n < 1:
            raise ConfigError("kappa range needs at least one value")
        if not (a > 0.0 and b > 0.0):
            raise ConfigError("kappa range endpoints must be positive")
        if n == 1:
            values = np.array([a])
        else:
            values = np.geomspace(a, b, n) if mode == "log" else np.linspace(a, b, n)
    else:
        raise ConfigError("kappa must be a number, a list or a range string")
    if not np.all(np.isfinite(values) & (values > 0.0)):
        raise ConfigError("every kappa must be positive and finite")
    return values


def _points(raw) -> np.ndarray:
    dims = {1 if np.isscalar(p) else len(p) for p in raw}
    if len(dims) != 1:
        raise ConfigError("points mix scalars and vectors of different lengths")
    d = dims.pop()
    return np.array([[p] if np.isscalar(p) else list(p) for p in raw], dtype=float).reshape(-1, d)


def _infer_dim(spec: dict) -> int:
    kind = spec["type"]
    if kind == "discrete":
        return _points(spec["points"]).shape[1]
    params = spec.get("params", {})
    if kind == "sample" and spec["kind"] == "gaussian-mixture" and "means" in params:
        means = params["means"]
        return 2 if means and not np.isscalar(means[0]) else 1
    for key in ("lower", "upper"):
        if key in params:
            return len(np.atleast_1d(params[key]))
    return 1


def _build_rho(spec: dict, domain: Domain, seed: int) -> InputMeasure:
    kind = spec["type"]
    if kind == "discrete":
        pts = _points(spec["points"])
        w = np.array(spec["weights"], dtype=float)
        if w.size != pts.shape[0]:
            raise ConfigError("discrete input needs one weight per point")
        if spec.get("normalize", False):
            w = w / math.fsum(w.tolist())
        if not domain.contains(pts):
            raise ConfigError("input points lie outside the domain")
        return DiscreteInput(pts, w)
    if kind == "lattice":
        n = int(spec["n"])
        axes = [lo + (np.arange(n) + 0.5) * (hi - lo) / n for lo, hi in zip(domain.lower, domain.upper)]
        if domain.dim == 1:
            pts = axes[0].reshape(-1, 1)
        else:
            X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.column_stack([X.ravel(), Y.ravel()])
        return DiscreteInput(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))
    if kind == "density":
        if domain.dim != 1:
            raise ConfigError("density inputs are supported in dimension 1 only")
        return Density1D(spec["kind"], dict(spec.get("params", {})), domain, float(spec.get("tol", 1e-10)))
    if kind == "sample":
        return sample_density(spec["kind"], dict(spec.get("params", {})), int(spec["n"]), seed, domain,
                              stratified=bool(spec.get("stratified", False)))
    raise ConfigError(f"unknown input type {kind!r}")


def _read_particles_csv(path: Path, kappa: float | None) -> ParticleMeasure:
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path} holds no particles")
    if kappa is not None and "kappa" in rows[0]:
        rows = [r for r in rows if math.isclose(float(r["kappa"]), kappa, rel_tol=1e-12)]
        if not rows:
            raise ConfigError(f"{path} has no particles for kappa={kappa!r}")
    keys = [k for k in ("x0", "x1") if k in rows[0]]
    if not keys or "mass" not in rows[0]:
        raise ConfigError(f"{path} needs columns x0[, x1] and mass")
    pos = np.array([[float(r[k]) for k in keys] for r in rows])
    mass = np.array([float(r["mass"]) for r in rows])
    return ParticleMeasure(pos, mass)


def parse_config(raw: dict, base_dir: Path | str = ".", seed: int | None = None,
                 out_dir: Path | str | None = None) -> ExperimentConfig:
    """Validate a decoded JSON config and build the experiment objects.

    ``seed`` and ``out_dir`` override the values in the file.
    """
    base_dir = Path(base_dir)
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from None
    try:
        rho_spec = raw["rho"]
        if "domain" in raw:
            domain = Domain(np.array(raw["domain"]["lower"], float), np.array(raw["domain"]["upper"], float))
        else:
            d = _infer_dim(rho_spec)
            domain = Domain.unit(d)
            if rho_spec["type"] == "discrete":
                pts = _points(rho_spec["points"])
                domain = Domain(np.minimum(pts.min(axis=0), 0.0), np.maximum(pts.max(axis=0), 1.0))
        if seed is None:
            seed = int(rho_spec.get("seed", raw.get("seed", 0)))
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        rho = _build_rho(rho_spec, domain, seed)
        kappas = parse_kappa_spec(raw.get("kappa", 1.0))
        solver_raw = dict(raw.get("solver", {}))
        known = {f.name for f in fields(SolverConfig)}
        solver = SolverConfig(**{k: v for k, v in solver_raw.items() if k in known}, seed=seed)
        output = raw.get("output", {})
        emit = dict(DEFAULT_EMIT)
        emit.update(output.get("emit", {}))
        target = Path(out_dir) if out_dir is not None else Path(output.get("dir", "hkbary-out"))
        if out_dir is None and not target.is_absolute():
            target = base_dir / target
        nu = None
        if "nu" in raw:
            spec = raw["nu"]
            if "csv" in spec:
                path = Path(spec["csv"])
                path = path if path.is_absolute() else base_dir / path
                if not path.is_file():
                    raise ConfigError(f"particle file {path} does not exist")
                nu = _read_particles_csv(path, float(kappas[0]) if kappas.size == 1 else None)
            else:
                nu = ParticleMeasure(_points(spec["positions"]), np.array(spec["masses"], float))
        return ExperimentConfig(
            rho=rho, kappas=kappas, solver=solver, domain=domain, out_dir=target, emit=emit,
            warm_start=bool(raw.get("warm_start", True)), seed=seed, name=str(raw.get("name", "")),
            nu=nu, oracle=dict(raw.get("oracle", {})), scan_points=output.get("scan_points"),
            f_threshold_scale=float(output.get("f_threshold_scale", F_THRESHOLD_SCALE)), raw=raw)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: Path | str, seed: int | None = None, out_dir: Path | str | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return parse_config(raw, path.parent, seed=seed, out_dir=out_dir)
