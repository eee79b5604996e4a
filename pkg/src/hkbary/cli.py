"""Command-line driver: ``hkbary <command> --config <file> [--out <dir>] [--seed <u64>]``.

Commands
--------
solve       solve every kappa independently (cold start)
sweep       solve the kappas in order, warm-starting each from the previous one
certify     certify the particle measure ``nu`` given in the config
oracle      solve on a fixed grid of candidate positions (discrete inputs)
sample      draw the configured sample and write it
dendrogram  single-linkage tree of the input atoms

Exit status: 0 on success, 1 if a requested solve did not converge (outputs
are still written), 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time

import numpy as np

from .certificate import DualPotential, UncoveredInputError, certify, constraint_F, default_domain, psi_eval
from .config import ConfigError, ExperimentConfig, load_config
from .io import (
    write_dendrogram,
    write_diagnostics,
    write_fscan,
    write_particles,
    write_psi,
    write_samples,
)
from .linkage import single_linkage
from .measures import DiscreteInput, ParticleMeasure
from .oracle import solve_on_grid
from .solver import SweepResult, kappa_sweep, solve

__all__ = ["main", "build_parser", "run"]

log = logging.getLogger("hkbary")

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("solve", "sweep", "certify", "oracle", "sample", "dendrogram")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hkbary", description="Hellinger-Kantorovich barycenters of Dirac collections.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, default=None, help="sampling seed, unsigned 64-bit (overrides the config)")
    p.add_argument("--f-threshold-scale", type=float, default=None,
                   help="write F-scan rows with F >= 1 - scale/kappa (default exp(-9.5); inf writes all)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def _scan_points(cfg: ExperimentConfig, kappa: float) -> np.ndarray:
    dom = default_domain(cfg.rho, kappa)
    n = cfg.scan_points or (2001 if dom.dim == 1 else 201)
    axes = [np.linspace(lo, hi, n) for lo, hi in zip(dom.lower, dom.upper)]
    if dom.dim == 1:
        return axes[0].reshape(-1, 1)
    X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def _fscan(cfg: ExperimentConfig, kappa: float, nu: ParticleMeasure):
    pts = _scan_points(cfg, kappa)
    try:
        F = constraint_F(cfg.rho, DualPotential(nu, kappa), pts)
    except UncoveredInputError:
        F = np.full(pts.shape[0], math.inf)
    keep = F >= 1.0 - cfg.f_threshold_scale / kappa
    return kappa, pts[keep], F[keep]


def _psi(cfg: ExperimentConfig, kappa: float, nu: ParticleMeasure):
    pts = cfg.rho.points if isinstance(cfg.rho, DiscreteInput) else _scan_points(cfg, kappa)
    return kappa, pts, psi_eval(DualPotential(nu, kappa), pts)


def _emit(cfg: ExperimentConfig, solutions, rows) -> list:
    """Write the requested files; ``solutions`` is a list of (kappa, nu)."""
    out, emit, dim = cfg.out_dir, cfg.emit, cfg.dim
    written = []
    if emit.get("particles"):
        written.append(write_particles(out / "particles.csv", solutions, dim))
    if emit.get("diagnostics"):
        written.append(write_diagnostics(out / "diagnostics.csv", rows))
    if emit.get("fscan"):
        written.append(write_fscan(out / "fscan.csv", [_fscan(cfg, k, nu) for k, nu in solutions], dim))
    if emit.get("psi"):
        written.append(write_psi(out / "psi.csv", [_psi(cfg, k, nu) for k, nu in solutions], dim))
    if emit.get("dendrogram"):
        if isinstance(cfg.rho, DiscreteInput) and cfg.rho.size >= 2:
            written.append(write_dendrogram(out / "dendrogram.csv", single_linkage(cfg.rho.points)))
        else:
            log.warning("dendrogram skipped: it needs a discrete input with at least 2 atoms")
    return written


def _check_monotone(kappas):
    d = np.diff(kappas)
    if d.size and not (np.all(d > 0.0) or np.all(d < 0.0)):
        raise ConfigError("a sweep needs strictly monotone kappa values")


def _run_solves(cfg: ExperimentConfig, sweep: bool) -> int:
    if sweep:
        _check_monotone(cfg.kappas)
        result = kappa_sweep(cfg.rho, cfg.kappas, cfg.solver, warm=cfg.warm_start)
    else:
        reports = []
        for k in cfg.kappas:
            reports.append(solve(cfg.rho, float(k), cfg.solver))
            log.info("kappa=%.6g atoms=%d gap=%.3g %s", k, reports[-1].barycenter.size,
                     reports[-1].certificate.gap_bound, reports[-1].reason)
        result = SweepResult(cfg.kappas, reports)
    solutions = [(float(k), r.barycenter) for k, r in result]
    _emit(cfg, solutions, result.rows)
    ok = all(r.converged for r in result.reports)
    for k, r in result:
        if not r.converged:
            log.warning("kappa=%.17g did not converge: %s", k, r.reason)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _diag_row(kappa, nu, cert, objective, iterations, converged) -> dict:
    return {"kappa": float(kappa), "n_atoms": nu.size, "total_mass": nu.total_mass, "objective": objective,
            "dual_value": cert.feasible_dual_value, "gap_bound": cert.gap_bound, "max_F": cert.max_F,
            "iterations": iterations, "converged": converged}


def _run_certify(cfg: ExperimentConfig) -> int:
    if cfg.nu is None:
        raise ConfigError("certify needs a particle measure 'nu' in the config")
    rows, solutions = [], []
    for k in cfg.kappas:
        cert = certify(cfg.rho, cfg.nu, float(k))
        rows.append(_diag_row(k, cfg.nu, cert, cert.objective, 0, cert.feasible))
        solutions.append((float(k), cfg.nu))
    _emit(cfg, solutions, rows)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NOT_CONVERGED


def _run_oracle(cfg: ExperimentConfig) -> int:
    if not isinstance(cfg.rho, DiscreteInput):
        raise ConfigError("the grid oracle needs a discrete input")
    grid_n = int(cfg.oracle.get("grid_n", 2001 if cfg.dim == 1 else 61))
    tol = float(cfg.oracle.get("tol", 1e-10))
    method = cfg.oracle.get("method", "newton")
    rows, solutions = [], []
    for k in cfg.kappas:
        sol = solve_on_grid(cfg.rho, float(k), grid_n, tol=tol, domain=cfg.domain, method=method)
        pos, mass = sol.support()
        nu = ParticleMeasure(pos, mass)
        cert = certify(cfg.rho, nu, float(k))
        rows.append(_diag_row(k, nu, cert, sol.objective, sol.iterations, sol.converged))
        solutions.append((float(k), nu))
    _emit(cfg, solutions, rows)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NOT_CONVERGED


def run(command: str, cfg: ExperimentConfig) -> int:
    """Execute one command on a parsed config and return the exit status."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if command in ("solve", "sweep"):
        return _run_solves(cfg, sweep=command == "sweep")
    if command == "certify":
        return _run_certify(cfg)
    if command == "oracle":
        return _run_oracle(cfg)
    if not isinstance(cfg.rho, DiscreteInput):
        raise ConfigError(f"{command} needs a discrete or sampled input")
    if command == "sample":
        write_samples(cfg.out_dir / "samples.csv", cfg.rho)
        return EXIT_OK
    if command == "dendrogram":
        if cfg.rho.size < 2:
            raise ConfigError("a dendrogram needs at least 2 input atoms")
        write_dendrogram(cfg.out_dir / "dendrogram.csv", single_linkage(cfg.rho.points))
        return EXIT_OK
    raise ConfigError(f"unknown command {command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches the config error status
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
        if args.f_threshold_scale is not None:
            if not args.f_threshold_scale >= 0.0:
                raise ConfigError("--f-threshold-scale must be nonnegative")
            cfg.f_threshold_scale = args.f_threshold_scale
        status = run(args.command, cfg)
    except ConfigError as exc:
        print(f"hkbary: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished with status %d in %.2f s", args.command, status, time.perf_counter() - t0)
    return status


if __name__ == "__main__":
    sys.exit(main())
