import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hkbary.certificate import certify
from hkbary.measures import Density1D, DiscreteInput, ParticleMeasure
from hkbary.objective import objective
from hkbary.solver import (
    INIT_MAX_ATOMS,
    LBFGSMemory,
    SolverConfig,
    descend,
    init_particles,
    insert_particles,
    kappa_sweep,
    prune_and_merge,
    solve,
)

from conftest import FOUR_POINTS, FOUR_WEIGHTS

CFG = SolverConfig()
DELTA0 = DiscreteInput(np.array([[0.0]]), np.array([1.0]))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(grad_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(c1=0.5, c2=0.4)
    with pytest.raises(ValueError):
        SolverConfig(optimizer="newton")
    with pytest.raises(ValueError):
        SolverConfig(prune_mass=1e-5, insertion_mass=1e-6)


def test_init_examples(four_mass):
    nu = init_particles(DELTA0, 0.3)
    assert nu.size == 1 and nu.positions[0, 0] == 0.0 and nu.masses[0] == 1.0
    nu = init_particles(four_mass, 0.08)
    assert np.allclose(nu.positions.ravel(), FOUR_POINTS)
    assert np.allclose(nu.masses, [0.16, 0.01, 0.01, 0.16], atol=1e-15)
    nu = init_particles(Density1D.uniform(), 0.1)
    assert nu.size == 8
    assert np.allclose(nu.masses, math.pi / 2 * 0.1, rtol=1e-12)


def test_init_aggregates_large_inputs():
    g = (np.arange(100) + 0.5) / 100
    X, Y = np.meshgrid(g, g, indexing="ij")
    rho = DiscreteInput(np.column_stack([X.ravel(), Y.ravel()]), np.full(10_000, 1e-4))
    nu = init_particles(rho, 0.1)
    assert nu.size <= INIT_MAX_ATOMS
    # each cell carries the squared weight of its aggregated atoms
    assert math.fsum(np.sqrt(nu.masses).tolist()) == pytest.approx(1.0, rel=1e-12)
    assert np.all((nu.positions >= 0.0) & (nu.positions <= 1.0))


def test_descend_at_stationary_point(four_mass, four_mass_hellinger):
    nu, rep = descend(four_mass, four_mass_hellinger, 0.08, CFG)
    assert rep.step == 0.0 and not rep.stalled and rep.converged
    assert nu is four_mass_hellinger


@pytest.mark.parametrize("use_memory", [False, True])
def test_descend_decreases_objective(four_mass, four_mass_hellinger, use_memory):
    nu = four_mass_hellinger.scaled(1.1)
    memory = LBFGSMemory(np.ones(nu.size * 2), CFG.memory) if use_memory else None
    new, rep = descend(four_mass, nu, 0.08, CFG, memory)
    assert rep.value_after < rep.value_before
    assert rep.value_before == objective(four_mass, nu, 0.08).value
    assert rep.value_after == pytest.approx(objective(four_mass, new, 0.08).value, abs=1e-15)
    assert np.all(new.masses >= 0.0)


def test_far_atom_mass_decays():
    nu = ParticleMeasure(np.array([[0.0], [5.0]]), np.array([1.0, 0.5]))
    masses = [0.5]
    for _ in range(5):
        nu, rep = descend(DELTA0, nu, 0.3, CFG)
        masses.append(nu.masses[1])
        if masses[-1] <= CFG.prune_mass:
            break
    assert all(b < a for a, b in zip(masses, masses[1:]))


def test_prune_and_merge_examples():
    cfg = SolverConfig(merge_radius_factor=1e-3)
    nu, n_p, n_m = prune_and_merge(ParticleMeasure.from_atoms([(0.0, 1e-15), (0.5, 1.0)]), 0.1, cfg)
    assert (n_p, n_m) == (1, 0) and nu.size == 1 and nu.positions[0, 0] == 0.5
    kappa = 0.2
    nu, n_p, n_m = prune_and_merge(ParticleMeasure.from_atoms([(0.5, 0.3), (0.5 + 1e-5 * kappa, 0.1)]), kappa, cfg)
    assert (n_p, n_m) == (0, 1)
    assert nu.masses[0] == pytest.approx(0.4, abs=1e-15)
    assert nu.positions[0, 0] == pytest.approx((0.3 * 0.5 + 0.1 * (0.5 + 2e-6)) / 0.4, abs=1e-15)
    sep = ParticleMeasure.from_atoms([(0.1, 0.2), (0.6, 0.3)])
    again, n_p, n_m = prune_and_merge(sep, kappa, cfg)
    assert (n_p, n_m) == (0, 0)
    assert np.array_equal(again.positions, sep.positions) and np.array_equal(again.masses, sep.masses)


@settings(max_examples=40)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=12))
def test_prune_and_merge_idempotent(atoms):
    nu = ParticleMeasure.from_atoms(atoms)
    cfg = SolverConfig(merge_radius_factor=0.05)
    once, _, _ = prune_and_merge(nu, 1.0, cfg)
    twice, n_p, n_m = prune_and_merge(once, 1.0, cfg)
    assert (n_p, n_m) == (0, 0)
    assert np.array_equal(once.positions, twice.positions)
    kept = nu.masses[nu.masses > cfg.prune_mass]
    assert once.total_mass == pytest.approx(math.fsum(kept.tolist()), rel=1e-12)


def test_insert_examples(four_mass, four_mass_hellinger):
    same, n = insert_particles(four_mass, four_mass_hellinger, 0.08, CFG)
    assert n == 0 and same is four_mass_hellinger
    nu = ParticleMeasure(four_mass_hellinger.positions[:3], four_mass_hellinger.masses[:3])
    new, n = insert_particles(four_mass, nu, 0.08, CFG)
    assert n == 1
    assert abs(new.positions[-1, 0] - 1.0) <= CFG.merge_radius_factor * 0.08
    assert new.masses[-1] == CFG.insertion_mass
    empty = ParticleMeasure(np.zeros((0, 1)), np.zeros(0))
    new, n = insert_particles(DELTA0, empty, 0.5, CFG)
    assert n == 1 and new.positions[0, 0] == 0.0


def test_insert_at_interior_violation():
    # the lone particle sits at 0, so F peaks above 1 near the input atom at 0.5
    rho = DiscreteInput(np.array([[0.0], [0.5]]), np.array([0.5, 0.5]))
    nu = ParticleMeasure.from_atoms([(0.0, 0.25), (0.45, 0.01)])
    new, n = insert_particles(rho, nu, 0.3, CFG)
    assert n >= 1
    assert np.all(np.abs(new.positions[2:, 0] - 0.5) < 0.1)


@pytest.mark.parametrize("x, kappa", [(0.0, 0.1), (0.37, 1.0), (0.9, 0.02)])
def test_solve_single_atom(x, kappa):
    rho = DiscreteInput(np.array([[x]]), np.array([1.0]))
    rep = solve(rho, kappa)
    assert rep.converged and rep.barycenter.size == 1
    assert rep.barycenter.positions[0, 0] == x and rep.barycenter.masses[0] == 1.0
    assert rep.objective == 0.0 and rep.certificate.gap_bound <= 1e-10


def test_solve_four_mass(four_mass):
    rep = solve(four_mass, 0.08)
    assert rep.converged
    nu = rep.barycenter
    order = np.argsort(nu.positions[:, 0])
    assert np.allclose(nu.positions[order, 0], FOUR_POINTS, atol=1e-6)
    assert np.allclose(nu.masses[order], np.asarray(FOUR_WEIGHTS) ** 2, atol=1e-6)
    assert rep.objective == pytest.approx(0.66, abs=1e-8)
    assert rep.certificate.gap_bound <= 1e-6


def test_solve_uniform_large_kappa():
    rep = solve(Density1D.uniform(), 1.0)
    assert rep.barycenter.size == 1
    assert rep.barycenter.positions[0, 0] == pytest.approx(0.5, abs=1e-4)
    assert rep.barycenter.masses[0] == pytest.approx((2 * math.sin(0.5)) ** 2, abs=1e-4)
    assert rep.certificate.gap_bound <= 1e-6


def test_solve_from_far_start_recovers(four_mass):
    # start far from the answer: the loop has to prune and insert its way back
    nu0 = ParticleMeasure.from_atoms([(0.2, 0.3), (0.8, 0.3)])
    rep = solve(four_mass, 0.08, warm_start=nu0)
    assert rep.converged
    assert rep.objective == pytest.approx(0.66, abs=1e-8)
    assert rep.insertions > 0


def test_outer_rounds_do_not_increase_objective(six_mass):
    rep = solve(six_mass, 0.15)
    h = np.array(rep.history)
    assert np.all(np.diff(h) <= 1e-12 * np.maximum(1.0, np.abs(h[:-1])))


def test_solve_is_deterministic(six_mass):
    a = solve(six_mass, 0.2)
    b = solve(six_mass, 0.2)
    assert np.array_equal(a.barycenter.positions, b.barycenter.positions)
    assert np.array_equal(a.barycenter.masses, b.barycenter.masses)
    assert a.objective == b.objective


def test_mass_bound(six_mass):
    # total mass of the optimum is at most 4 times the largest single-atom constant
    for kappa in (0.1, 0.4):
        rep = solve(six_mass, kappa)
        assert rep.barycenter.total_mass <= 4.0
        assert rep.barycenter.total_mass <= 1.0 + 1e-9


def test_sweep_endpoints_and_warm_vs_cold(four_mass):
    ks = np.geomspace(0.08, 0.8, 12)
    warm = kappa_sweep(four_mass, ks)
    assert warm.atom_counts[0] == 4 and warm.atom_counts[-1] == 1
    assert all(r.certificate.gap_bound <= 1e-5 for r in warm.reports)
    cold = kappa_sweep(four_mass, ks[[0, 5, 11]], warm=False)
    for k, rc in cold:
        rw = warm.reports[int(np.flatnonzero(ks == k)[0])]
        tol = rw.certificate.gap_bound + rc.certificate.gap_bound + 1e-12
        assert abs(rw.objective - rc.objective) <= tol
    assert len(warm.rows) == 12 and warm.rows[0]["n_atoms"] == 4


def test_sweep_single_atom_input():
    rho = DiscreteInput(np.array([[0.3]]), np.array([1.0]))
    res = kappa_sweep(rho, [1.0, 0.5, 0.1])
    for _, r in res:
        assert r.barycenter.size == 1 and r.barycenter.positions[0, 0] == 0.3 and r.objective == 0.0


def test_sweep_rejects_unsorted(four_mass):
    with pytest.raises(ValueError):
        kappa_sweep(four_mass, [0.1, 0.3, 0.2])
    with pytest.raises(ValueError):
        kappa_sweep(four_mass, [])


def test_solver_beats_or_matches_initial_guess(four_mass):
    for kappa in (0.15, 0.3):
        rep = solve(four_mass, kappa)
        assert rep.objective <= objective(four_mass, init_particles(four_mass, kappa), kappa).value
        cert = certify(four_mass, rep.barycenter, kappa)
        assert cert.gap_bound == pytest.approx(rep.certificate.gap_bound, abs=1e-12)
