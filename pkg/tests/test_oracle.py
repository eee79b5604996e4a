import math

import numpy as np
import pytest

from hkbary.measures import DiscreteInput, Domain
from hkbary.oracle import OracleError, grid_nodes, solve_on_grid
from hkbary.solver import solve

METHODS = ["newton", "gradient"]


def test_grid_nodes():
    nodes = grid_nodes(Domain.interval(), 5)
    assert np.array_equal(nodes.ravel(), [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid_nodes(Domain.unit(2), 4).shape == (16, 2)


@pytest.mark.parametrize("method", METHODS)
def test_delta(method):
    rho = DiscreteInput(np.array([[0.0]]), np.array([1.0]))
    sol = solve_on_grid(rho, 0.3, 11, method=method)
    assert sol.converged
    assert sol.objective == pytest.approx(0.0, abs=1e-12)
    pos, mass = sol.support(1e-9)
    assert pos.ravel().tolist() == [0.0] and mass[0] == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("method", METHODS)
def test_four_mass(four_mass, method):
    sol = solve_on_grid(four_mass, 0.08, 2001 if method == "newton" else 201, method=method)
    assert sol.converged
    assert sol.objective == pytest.approx(0.66, abs=1e-6)


def test_two_atoms_closed_form():
    rho = DiscreteInput(np.array([[0.0], [0.5]]), np.array([0.5, 0.5]))
    sol = solve_on_grid(rho, 1.0, 2001)
    assert sol.objective == pytest.approx(1 - math.cos(0.25) ** 2, abs=1e-5)


@pytest.mark.parametrize("method", METHODS)
def test_kkt(six_mass, method):
    tol = 1e-9
    sol = solve_on_grid(six_mass, 0.12, 101, tol=tol, method=method)
    F = sol.constraint
    assert sol.converged and sol.residual <= tol
    assert F.max() <= 1.0 + tol
    assert np.all(np.abs(F[sol.masses > tol] - 1.0) <= tol)
    assert np.all(sol.masses >= 0.0)


def test_methods_agree(six_mass):
    a = solve_on_grid(six_mass, 0.3, 101, method="newton")
    b = solve_on_grid(six_mass, 0.3, 101, method="gradient")
    assert a.objective == pytest.approx(b.objective, abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_refinement_never_increases(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    w = rng.uniform(0.1, 1.0, n)
    rho = DiscreteInput(rng.uniform(0, 1, (n, 1)), w / w.sum())
    kappa = float(rng.uniform(0.05, 1.0))
    prev = math.inf
    for g in (65, 129, 257, 513):
        sol = solve_on_grid(rho, kappa, g, tol=1e-11)
        assert sol.objective <= prev + 1e-9
        prev = sol.objective


@pytest.mark.parametrize("seed", range(4))
def test_oracle_bounds_particle_solver(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 6))
    w = rng.uniform(0.1, 1.0, n)
    rho = DiscreteInput(rng.uniform(0, 1, (n, 1)), w / w.sum())
    kappa = float(rng.uniform(0.05, 1.0))
    rep = solve(rho, kappa)
    sol = solve_on_grid(rho, kappa, 2001)
    assert rep.objective <= sol.objective + 1e-8
    assert rep.objective >= sol.objective - 1e-3


def test_2d_small_grid():
    pts = np.array([[0.2, 0.3], [0.7, 0.6], [0.4, 0.8]])
    rho = DiscreteInput(pts, np.array([0.5, 0.3, 0.2]))
    sol = solve_on_grid(rho, 0.5, 61, tol=1e-9)
    rep = solve(rho, 0.5)
    assert sol.converged
    assert rep.objective <= sol.objective + 1e-8
    assert sol.objective - rep.objective <= 1e-3


def test_errors(four_mass):
    with pytest.raises(ValueError):
        solve_on_grid(four_mass, 0.1, 1)
    with pytest.raises(ValueError):
        solve_on_grid(four_mass, 0.1, 11, method="simplex")
    with pytest.raises(TypeError):
        from hkbary.measures import Density1D
        solve_on_grid(Density1D.uniform(), 0.1, 11)
    with pytest.raises(OracleError):
        solve_on_grid(four_mass, 0.3, 401, method="gradient", max_iter=3, raise_on_failure=True)
    sol = solve_on_grid(four_mass, 0.3, 401, method="gradient", max_iter=3)
    assert not sol.converged
