import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ofdm_zzb.bounds import BoundQuery, zzb
from ofdm_zzb.convex import (
    ConvexProblem,
    InfeasibleError,
    gradient_mapping_residual,
    project_constrained_simplex,
    project_simplex,
    solve,
)
from ofdm_zzb.derivatives import zzb_and_grad
from ofdm_zzb.ofdm import DomainError, OfdmConfig, subcarrier_distances, uniform_allocation

from conftest import random_allocation

SMALL = OfdmConfig(K=16, Na=4)


def problem(scheme="coherent", gamma=10.0, cfg=SMALL, k0=(), k1=(), level=0.0):
    return ConvexProblem(BoundQuery(scheme, gamma, cfg), frozenset(k0), frozenset(k1), level)


def test_problem_validation():
    with pytest.raises(InfeasibleError):
        problem(k0={1}, k1={1}, level=0.25)
    with pytest.raises(InfeasibleError):
        problem(k1={1, 2, 3}, level=0.5)
    with pytest.raises(DomainError):
        problem(k1={1}, level=0.0)
    with pytest.raises(DomainError):
        problem(k0={16})
    with pytest.raises(InfeasibleError):
        problem(k0=set(range(15)), k1={15}, level=0.5)
    p = problem(k0={0}, k1={1, 2}, level=0.25)
    assert p.free_mass == pytest.approx(0.5)
    assert list(p.free_indices) == list(range(3, 16))
    assert p.uniform_start().sum() == pytest.approx(1.0)


def test_projection_examples():
    p = problem(cfg=OfdmConfig(K=4, Na=2))
    assert np.allclose(project_constrained_simplex(np.full(4, 0.5), p), 0.25)
    assert np.array_equal(project_constrained_simplex([2.0, 0, 0, 0], p), [1.0, 0, 0, 0])
    v = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.allclose(project_constrained_simplex(v, p), v)
    with pytest.raises(DomainError):
        project_constrained_simplex(np.ones(3), p)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=20), st.floats(0.1, 2))
def test_project_simplex_properties(v, mass):
    v = np.array(v)
    x = project_simplex(v, mass)
    assert np.all(x >= 0)
    assert x.sum() == pytest.approx(mass, rel=1e-12)
    assert np.allclose(project_simplex(x, mass), x, atol=1e-12)
    # optimality: no feasible vertex is closer to v
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = mass
        assert np.linalg.norm(v - x) <= np.linalg.norm(v - e) + 1e-12


@given(st.integers(0, 10_000))
def test_pinned_projection(seed):
    rng = np.random.default_rng(seed)
    p = problem(k0={0, 5}, k1={3, 7}, level=0.125)
    x = project_constrained_simplex(rng.normal(size=16), p)
    assert x[0] == x[5] == 0
    assert x[3] == x[7] == 0.125
    assert x.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(x >= 0)


@pytest.mark.parametrize("scheme", ["coherent", "noncoherent"])
def test_prior_limit(scheme):
    rep = solve(problem(scheme, 0.0))
    assert rep.converged
    assert rep.objective == pytest.approx(SMALL.prior_variance, rel=1e-12)


@pytest.mark.parametrize("scheme", ["coherent", "noncoherent"])
@pytest.mark.parametrize("gamma", [0.5, 10.0, 300.0])
def test_solve_small(scheme, gamma):
    p = problem(scheme, gamma)
    rep = solve(p)
    assert rep.converged and rep.first_order_residual <= 1e-7
    rho = rep.rho_star
    assert np.all(rho >= 0) and rho.sum() == pytest.approx(1.0, abs=1e-10)
    assert rep.objective == pytest.approx(zzb(rho, p.query), rel=1e-12)
    assert rep.objective <= zzb(uniform_allocation(16), p.query) + 1e-9 * SMALL.prior_variance
    h = np.array(rep.history)
    assert np.all(np.diff(h) <= 1e-15 * h[0])
    f0, g, _ = zzb_and_grad(rho, p.query)
    gfull = np.concatenate(([0.0], g)) / rep.history[0]
    assert gradient_mapping_residual(rho, gfull, p) == pytest.approx(rep.first_order_residual)


@pytest.mark.parametrize("scheme", ["coherent", "noncoherent"])
def test_initialisation_invariance(scheme, rng):
    p = problem(scheme, 20.0)
    ref = solve(p).objective
    for _ in range(5):
        rep = solve(p, random_allocation(rng, 16))
        assert rep.objective == pytest.approx(ref, rel=1e-6)


def test_init_never_worsened(rng):
    p = problem("coherent", 40.0)
    init = random_allocation(rng, 16)
    assert solve(p, init).objective <= zzb(init, p.query)


def test_pinning_tightens():
    parent = solve(problem("noncoherent", 10.0, k1={8}, level=0.25))
    for child in (
        problem("noncoherent", 10.0, k0={3}, k1={8}, level=0.25),
        problem("noncoherent", 10.0, k1={8, 3}, level=0.25),
    ):
        c = solve(child, parent.rho_star)
        assert c.objective >= parent.objective * (1 - 1e-8)
        assert c.rho_star[8] == 0.25


def test_pinned_solution_feasible():
    p = problem("coherent", 10.0, k0={1, 2}, k1={15}, level=1 / 3)
    rho = solve(p).rho_star
    assert rho[1] == rho[2] == 0.0 and rho[15] == 1 / 3
    assert rho.sum() == pytest.approx(1.0, abs=1e-10)


def test_full_scale_coherent_shape():
    # high SNR: power moves to the band edges but interior tones keep some
    cfg = OfdmConfig()
    p = ConvexProblem(BoundQuery("coherent", 1e3, cfg))
    rep = solve(p)
    assert rep.converged
    d = subcarrier_distances(64)
    rho = rep.rho_star
    assert d[np.argmax(rho)] == -32
    assert rho[np.abs(d) >= 28].sum() > 0.9
    inner = rho[np.abs(d) < 28]
    assert inner.sum() > 1e-3 and np.count_nonzero(inner > 1e-4) >= 4
    assert rep.objective < zzb(uniform_allocation(64), p.query)


def test_iteration_cap():
    rep = solve(problem("noncoherent", 50.0), max_iter=1)
    assert rep.iterations <= 1
