import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from hkbary.cli import main
from hkbary.config import ConfigError, F_THRESHOLD_SCALE, load_config, parse_config, parse_kappa_spec
from hkbary.measures import Density1D, DiscreteInput

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
FOUR = {"rho": {"type": "discrete", "points": [0.0, 0.4, 0.6, 1.0], "weights": [0.4, 0.1, 0.1, 0.4]},
        "kappa": 0.08}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_kappa_specs():
    assert parse_kappa_spec(0.5).tolist() == [0.5]
    assert parse_kappa_spec([0.1, 0.2]).tolist() == [0.1, 0.2]
    assert np.allclose(parse_kappa_spec("0.1:1:3"), [0.1, math.sqrt(0.1), 1.0])
    assert np.allclose(parse_kappa_spec("0.1:1:3:lin"), [0.1, 0.55, 1.0])
    assert parse_kappa_spec("0.2:5:1").tolist() == [0.2]
    for bad in ("0.1:1", "0.1:1:3:cubic", "0:1:3", "a:b:c", [], [0.1, -1.0], True, "0.1:1:0"):
        with pytest.raises(ConfigError):
            parse_kappa_spec(bad)


def test_parse_inputs(tmp_path):
    cfg = parse_config(FOUR, tmp_path)
    assert isinstance(cfg.rho, DiscreteInput) and cfg.dim == 1
    assert cfg.f_threshold_scale == F_THRESHOLD_SCALE and cfg.emit["particles"]
    lat = parse_config({"domain": {"lower": [0, 0], "upper": [1, 1]}, "rho": {"type": "lattice", "n": 4}}, tmp_path)
    assert lat.rho.size == 16 and lat.dim == 2
    assert np.allclose(np.unique(lat.rho.points[:, 0]), [0.125, 0.375, 0.625, 0.875])
    dens = parse_config({"rho": {"type": "density", "kind": "uniform"}}, tmp_path)
    assert isinstance(dens.rho, Density1D)
    six = parse_config({"rho": {"type": "discrete", "points": [0, 1], "weights": [1, 3], "normalize": True}}, tmp_path)
    assert six.rho.weights.tolist() == [0.25, 0.75]


def test_seed_precedence(tmp_path):
    raw = {"seed": 5, "rho": {"type": "sample", "kind": "uniform", "n": 10, "seed": 3}}
    assert parse_config(raw, tmp_path).seed == 3
    assert parse_config(raw, tmp_path, seed=11).seed == 11
    raw["rho"].pop("seed")
    assert parse_config(raw, tmp_path).seed == 5


@pytest.mark.parametrize("raw", [
    {"kappa": 0.1},
    {"rho": {"type": "discrete", "points": [0.0], "weights": [1.0]}, "kappa": "fast"},
    {"rho": {"type": "discrete", "points": [0.0, 1.0], "weights": [1.0]}},
    {"rho": {"type": "discrete", "points": [0.0], "weights": [1.0]}, "unknown_key": 1},
    {"rho": {"type": "discrete", "points": [2.0], "weights": [1.0]}, "domain": {"lower": [0], "upper": [1]}},
    {"rho": {"type": "sample", "kind": "uniform", "n": 0}},
    {"rho": {"type": "discrete", "points": [0.0], "weights": [1.0]}, "nu": {"csv": "missing.csv"}},
])
def test_config_errors(tmp_path, raw):
    with pytest.raises(ConfigError):
        parse_config(raw, tmp_path)


def test_cli_config_errors_exit_2(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--config", str(bad)]) == 2
    assert main(["solve", "--config", str(write(tmp_path, {"kappa": 1}))]) == 2
    assert main(["fly", "--config", str(bad)]) == 2
    assert main(["solve", "--config", str(write(tmp_path, FOUR)), "--f-threshold-scale", "-1"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_solve_outputs(tmp_path):
    raw = dict(FOUR, output={"emit": {"fscan": True, "psi": True, "dendrogram": True}})
    out = tmp_path / "out"
    assert main(["solve", "--config", str(write(tmp_path, raw)), "--out", str(out)]) == 0
    parts = read(out / "particles.csv")
    assert list(parts[0]) == ["kappa", "atom_index", "x0", "mass"]
    assert [float(r["x0"]) for r in parts] == pytest.approx([0, 0.4, 0.6, 1], abs=1e-6)
    diag = read(out / "diagnostics.csv")
    assert diag[0]["converged"] == "1" and int(diag[0]["n_atoms"]) == 4
    assert float(diag[0]["objective"]) == pytest.approx(0.66, abs=1e-8)
    total = math.fsum(float(r["mass"]) for r in parts)
    assert abs(total - float(diag[0]["total_mass"])) <= 1e-12
    fscan = read(out / "fscan.csv")
    assert all(float(r["F"]) >= 1 - F_THRESHOLD_SCALE / 0.08 for r in fscan)
    assert len(read(out / "psi.csv")) == 4
    assert len(read(out / "dendrogram.csv")) == 3


def test_rerun_is_byte_identical(tmp_path):
    raw = {"rho": {"type": "sample", "kind": "gaussian-mixture", "n": 60,
                   "params": {"means": [0.3, 0.7], "stddevs": [0.05, 0.05]}},
           "kappa": [0.1, 0.3], "output": {"emit": {"fscan": True, "psi": True}}}
    cfg = write(tmp_path, raw)
    for name in ("a", "b"):
        main(["sweep", "--config", str(cfg), "--out", str(tmp_path / name), "--seed", "42"])
    for f in ("particles.csv", "diagnostics.csv", "fscan.csv", "psi.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "43"])
    assert (tmp_path / "a" / "particles.csv").read_bytes() != (tmp_path / "c" / "particles.csv").read_bytes()


def test_sweep_total_mass_matches(tmp_path):
    raw = dict(FOUR, kappa="0.08:0.8:6")
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(write(tmp_path, raw)), "--out", str(out)]) == 0
    parts, diag = read(out / "particles.csv"), read(out / "diagnostics.csv")
    counts = [int(r["n_atoms"]) for r in diag]
    assert counts[0] == 4 and counts[-1] == 1
    for r in diag:
        m = math.fsum(float(p["mass"]) for p in parts if p["kappa"] == r["kappa"])
        assert abs(m - float(r["total_mass"])) <= 1e-12


def test_sweep_rejects_unsorted_kappas(tmp_path):
    raw = dict(FOUR, kappa=[0.1, 0.3, 0.2])
    assert main(["sweep", "--config", str(write(tmp_path, raw)), "--out", str(tmp_path / "o")]) == 2


def test_nonconvergence_exit_1(tmp_path):
    raw = dict(FOUR, kappa=0.3, solver={"max_outer_iters": 1, "max_inner_iters": 1})
    out = tmp_path / "o"
    assert main(["solve", "--config", str(write(tmp_path, raw)), "--out", str(out)]) == 1
    assert read(out / "diagnostics.csv")[0]["converged"] == "0"


def test_certify_command(tmp_path):
    raw = dict(FOUR, nu={"positions": [0, 0.4, 0.6, 1], "masses": [0.16, 0.01, 0.01, 0.16]})
    out = tmp_path / "o"
    assert main(["certify", "--config", str(write(tmp_path, raw)), "--out", str(out)]) == 0
    d = read(out / "diagnostics.csv")[0]
    assert float(d["gap_bound"]) <= 1e-8 and d["iterations"] == "0"
    # reading the particles back from the solve output certifies the same measure
    raw2 = dict(FOUR, nu={"csv": str(out / "particles.csv")})
    assert main(["certify", "--config", str(write(tmp_path, raw2, "c2.json")), "--out", str(tmp_path / "p")]) == 0
    assert (out / "diagnostics.csv").read_bytes() == (tmp_path / "p" / "diagnostics.csv").read_bytes()
    assert main(["certify", "--config", str(write(tmp_path, FOUR, "c3.json")), "--out", str(tmp_path / "q")]) == 2


def test_oracle_sample_dendrogram_commands(tmp_path):
    cfg = write(tmp_path, dict(FOUR, oracle={"grid_n": 201}))
    assert main(["oracle", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert float(read(tmp_path / "o" / "diagnostics.csv")[0]["objective"]) == pytest.approx(0.66, abs=1e-9)
    raw = {"domain": {"lower": [0, 0], "upper": [1, 1]},
           "rho": {"type": "sample", "kind": "gaussian-mixture", "n": 30, "seed": 2, "stratified": True,
                   "params": {"means": [[0.3, 0.3], [0.7, 0.7]], "stddevs": 0.05}}}
    cfg = write(tmp_path, raw, "s.json")
    assert main(["sample", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    rows = read(tmp_path / "s" / "samples.csv")
    assert len(rows) == 30 and list(rows[0]) == ["atom_index", "x0", "x1", "weight"]
    assert main(["dendrogram", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    dist = [float(r["distance"]) for r in read(tmp_path / "s" / "dendrogram.csv")]
    assert len(dist) == 29 and dist == sorted(dist)
    dens = write(tmp_path, {"rho": {"type": "density", "kind": "uniform"}}, "d.json")
    assert main(["sample", "--config", str(dens), "--out", str(tmp_path / "d")]) == 2
    assert main(["oracle", "--config", str(dens), "--out", str(tmp_path / "d")]) == 2


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path, tmp_path):
    cfg = load_config(path, out_dir=tmp_path)
    assert cfg.kappas.size >= 1 and cfg.out_dir == tmp_path
