import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hkbary.certificate import DualPotential, constraint_F
from hkbary.closed_forms import hellinger_barycenter
from hkbary.measures import Density1D, DiscreteInput, ParticleMeasure
from hkbary.objective import convexity_probe, evaluate, gradient, objective


def two_point():
    return DiscreteInput(np.array([[0.0], [0.5]]), np.array([0.5, 0.5]))


def test_objective_examples(four_mass):
    delta0 = DiscreteInput(np.array([[0.0]]), np.array([1.0]))
    assert objective(delta0, ParticleMeasure.empty(1), 1.0).value == 1.0
    assert objective(four_mass, hellinger_barycenter(four_mass), 0.08).value == pytest.approx(0.66, abs=1e-15)
    nu = ParticleMeasure(np.array([[0.25]]), np.array([math.cos(0.25) ** 2]))
    assert objective(two_point(), nu, 1.0).value == pytest.approx(1 - math.cos(0.25) ** 2, abs=1e-15)


def test_empty_measure_density():
    assert objective(Density1D.uniform(), ParticleMeasure.empty(1), 0.3).value == 1.0


def test_gradient_examples():
    rho = two_point()
    blind = ParticleMeasure(np.array([[3.0]]), np.array([0.2]))
    g = gradient(rho, blind, 1.0)
    assert np.array_equal(g.d_mass, [1.0]) and np.array_equal(g.d_pos, [[0.0]])
    opt = ParticleMeasure(np.array([[0.25]]), np.array([math.cos(0.25) ** 2]))
    g = gradient(rho, opt, 1.0)
    assert abs(g.d_mass[0]) <= 1e-10 and abs(g.d_pos[0, 0]) <= 1e-10


def _fd_check(rho, pos, mass, kappa, h=1e-6):
    _, g, _ = evaluate(rho, pos, mass, kappa)
    for j in range(mass.size):
        e = np.zeros_like(mass)
        e[j] = h
        fd = (evaluate(rho, pos, mass + e, kappa, grad=False)[0]
              - evaluate(rho, pos, mass - e, kappa, grad=False)[0]) / (2 * h)
        assert fd == pytest.approx(g.d_mass[j], rel=1e-5, abs=1e-7)
        for d in range(pos.shape[1]):
            E = np.zeros_like(pos)
            E[j, d] = h
            fd = (evaluate(rho, pos + E, mass, kappa, grad=False)[0]
                  - evaluate(rho, pos - E, mass, kappa, grad=False)[0]) / (2 * h)
            assert fd == pytest.approx(g.d_pos[j, d], rel=1e-5, abs=1e-7)


@st.composite
def instances(draw, dim=1):
    n = draw(st.integers(1, 5))
    k = draw(st.integers(1, 4))
    pts = np.array(draw(st.lists(st.floats(0, 1), min_size=n * dim, max_size=n * dim))).reshape(n, dim)
    w = np.array(draw(st.lists(st.floats(0.1, 1), min_size=n, max_size=n)))
    pos = np.array(draw(st.lists(st.floats(0, 1), min_size=k * dim, max_size=k * dim))).reshape(k, dim)
    mass = np.array(draw(st.lists(st.floats(0.05, 1), min_size=k, max_size=k)))
    kappa = draw(st.floats(0.2, 2.0))
    return DiscreteInput(pts, w / w.sum()), pos, mass, kappa


def _covered(rho, pos, kappa, margin=1e-3):
    d = np.sqrt(((rho.points[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    R = kappa * math.pi / 2
    # every input atom seen by some particle, and no distance sitting on the kernel edge
    return np.all(d.min(axis=1) < R - margin) and np.all(np.abs(d - R) > margin)


@given(instances())
def test_gradient_matches_finite_differences_1d(inst):
    rho, pos, mass, kappa = inst
    if _covered(rho, pos, kappa):
        _fd_check(rho, pos, mass, kappa)


@given(instances(dim=2))
def test_gradient_matches_finite_differences_2d(inst):
    rho, pos, mass, kappa = inst
    if _covered(rho, pos, kappa):
        _fd_check(rho, pos, mass, kappa)


@given(instances(), st.integers(0, 1000))
def test_d_mass_equals_one_minus_F(inst, seed):
    rho, pos, mass, kappa = inst
    if not _covered(rho, pos, kappa, margin=0.0):
        return
    nu = ParticleMeasure(pos, mass)
    g = gradient(rho, nu, kappa)
    F = constraint_F(rho, DualPotential(nu, kappa), pos)
    assert np.max(np.abs(g.d_mass - (1.0 - F))) <= 1e-12


@given(instances())
def test_d_pos_is_mass_times_minus_grad_F(inst):
    rho, pos, mass, kappa = inst
    if not _covered(rho, pos, kappa):
        return
    nu = ParticleMeasure(pos, mass)
    psi = DualPotential(nu, kappa)
    g = gradient(rho, nu, kappa)
    h = 1e-6
    for j in range(mass.size):
        dF = (constraint_F(rho, psi, pos[j:j + 1] + h) - constraint_F(rho, psi, pos[j:j + 1] - h))[0] / (2 * h)
        assert g.d_pos[j, 0] == pytest.approx(-mass[j] * dF, rel=1e-5, abs=1e-7)


@given(instances(), st.floats(0.0, 1.0))
def test_convexity_probe(inst, t):
    rho, pos, mass, kappa = inst
    nu1 = ParticleMeasure(pos, mass)
    nu2 = ParticleMeasure(pos[::-1] * 0.9 + 0.05, mass[::-1] * 1.3)
    assert convexity_probe(rho, nu1, nu2, kappa, t) <= 1e-12
    assert convexity_probe(rho, nu1, nu2, kappa, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert convexity_probe(rho, nu1, nu2, kappa, 1.0) == pytest.approx(0.0, abs=1e-15)


@given(instances())
def test_objective_bounded_by_one_plus_mass(inst):
    rho, pos, mass, kappa = inst
    v = objective(rho, ParticleMeasure(pos, mass), kappa)
    S = v.coverage
    expected = 1.0 + math.fsum(mass.tolist()) - 2.0 * math.fsum((rho.weights * np.sqrt(S)).tolist())
    assert v.value == pytest.approx(expected, abs=1e-14)
    assert v.value <= 1.0 + math.fsum(mass.tolist())


def test_density_matches_fine_discretisation():
    rho = Density1D.uniform(tol=1e-10)
    n = 100_000
    fine = DiscreteInput(((np.arange(n) + 0.5) / n).reshape(-1, 1), np.full(n, 1.0 / n))
    nu = ParticleMeasure(np.array([[0.1], [0.45], [0.8]]), np.array([0.2, 0.3, 0.25]))
    for kappa in (0.1, 0.3):
        a = objective(rho, nu, kappa).value
        b = objective(fine, nu, kappa).value
        assert abs(a - b) <= 1e-4


def test_density_gradient_finite_differences():
    rho = Density1D.gaussian_mixture([0.3, 0.7], [0.1, 0.05], [0.4, 0.6], tol=1e-12)
    pos = np.array([[0.2], [0.35], [0.7]])
    mass = np.array([0.1, 0.2, 0.3])
    _, g, _ = evaluate(rho, pos, mass, 0.4)
    h = 1e-5
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (evaluate(rho, pos, mass + e, 0.4, grad=False)[0] - evaluate(rho, pos, mass - e, 0.4, grad=False)[0]) / (2 * h)
        assert fd == pytest.approx(g.d_mass[j], rel=1e-5, abs=1e-7)
        E = np.zeros_like(pos)
        E[j, 0] = h
        fd = (evaluate(rho, pos + E, mass, 0.4, grad=False)[0] - evaluate(rho, pos - E, mass, 0.4, grad=False)[0]) / (2 * h)
        assert fd == pytest.approx(g.d_pos[j, 0], rel=1e-5, abs=1e-7)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(two_point(), np.zeros((1, 2)), np.ones(1), 1.0)
