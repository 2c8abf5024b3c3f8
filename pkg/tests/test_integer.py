import math

import numpy as np
import pytest

from ofdm_zzb.bounds import BoundQuery, zzb
from ofdm_zzb.convex import InfeasibleError
from ofdm_zzb.integer import (
    AUTO,
    BnbConfig,
    Subproblem,
    _Search,
    branch_index,
    brute_force,
    default_anchor,
    round_max_l,
    solve_bnb,
)
from ofdm_zzb.ofdm import DomainError, OfdmConfig


def sub(rho, k0=(), k1=()):
    return Subproblem(frozenset(k0), frozenset(k1), np.asarray(rho, dtype=float), 0.0)


def test_round_max_l_examples():
    assert np.array_equal(round_max_l([0.4, 0.3, 0.2, 0.1], 2), [0.5, 0.5, 0, 0])
    assert np.array_equal(round_max_l([0.25] * 4, 2), [0.5, 0.5, 0, 0])
    integral = np.array([0, 0.5, 0, 0.5])
    assert np.array_equal(round_max_l(integral, 2), integral)
    assert np.array_equal(round_max_l([0.4, 0.3, 0.2, 0.1], 2, forced=[3]), [0.5, 0, 0, 0.5])
    with pytest.raises(DomainError):
        round_max_l([0.5, 0.5], 3)
    with pytest.raises(DomainError):
        round_max_l([0.5, 0.5, 0, 0], 1, forced=[0, 1])


def test_branch_index_examples():
    rho = np.zeros(10)
    rho[2], rho[5] = 0.06, 0.12
    assert branch_index(sub(rho, k0=[0, 1, 3, 4, 6, 7, 8, 9]), 8) == 2
    assert branch_index(sub(np.zeros(6), k0=[0]), 8) == 1
    assert branch_index(sub(np.zeros(4), k0=[0, 1], k1=[3]), 2) == 2
    with pytest.raises(DomainError):
        branch_index(sub(np.zeros(2), k0=[0], k1=[1]), 1)


def test_config_validation():
    for kw in (dict(L=0), dict(delta_tol=0), dict(n_iter=0), dict(pin_anchor="first")):
        with pytest.raises(DomainError):
            BnbConfig(**kw)
    assert BnbConfig().anchor("coherent", 64) is None
    assert BnbConfig().anchor("noncoherent", 64) == 32
    assert BnbConfig(pin_anchor=5).anchor("coherent", 64) == 5
    assert BnbConfig(pin_anchor=None).anchor("noncoherent", 64) is None
    assert default_anchor("noncoherent", 8) == 4
    assert BnbConfig().pin_anchor == AUTO


def test_infeasible_nodes_pruned():
    s = _Search(BoundQuery("coherent", 1.0, OfdmConfig(K=8, Na=2)), BnbConfig(L=2))
    assert s.relax(frozenset(), frozenset({0, 1, 2}), None) is None
    assert s.relax(frozenset(range(7)), frozenset(), None) is None
    assert s.relax(frozenset(), frozenset({0}), None) is not None


def test_l_larger_than_k():
    with pytest.raises(InfeasibleError):
        solve_bnb(BoundQuery("coherent", 1.0, OfdmConfig(K=8, Na=2)), BnbConfig(L=9))


def test_infinite_tolerance_stops_at_root():
    q = BoundQuery("coherent", 10.0, OfdmConfig(K=8, Na=2))
    rep = solve_bnb(q, BnbConfig(L=3, delta_tol=math.inf))
    assert rep.iterations == 0 and rep.nodes_explored == 1
    assert np.count_nonzero(rep.rho_star) == 3


@pytest.mark.parametrize("scheme", ["coherent", "noncoherent"])
@pytest.mark.parametrize("gamma", [0.1, 10.0, 1000.0])
def test_matches_brute_force(scheme, gamma):
    q = BoundQuery(scheme, gamma, OfdmConfig(K=8, Na=4))
    rep = solve_bnb(q, BnbConfig(L=3))
    _, best = brute_force(q, 3)
    assert rep.upper_bound <= (1 + 0.01) * best
    assert rep.upper_bound == pytest.approx(zzb(rep.rho_star, q), rel=1e-12)
    assert rep.upper_bound >= rep.best_lower_bound - 1e-10 * best
    assert np.sum(np.isclose(rep.rho_star, 1 / 3, rtol=0, atol=1e-15)) == 3
    assert rep.rho_star.sum() == pytest.approx(1.0, abs=1e-15)
    ub = np.array(rep.ub_history)
    assert np.all(np.diff(ub) <= 0)
    if scheme == "noncoherent":
        assert rep.rho_star[4] > 0


@pytest.mark.parametrize("K,L", [(8, 2), (8, 3), (10, 3), (12, 2)])
@pytest.mark.parametrize("gamma", [0.3, 30.0])
def test_anchor_loses_nothing(K, L, gamma):
    # any support can be shifted so its first tone sits at d = -K/2
    q = BoundQuery("noncoherent", gamma, OfdmConfig(K=K, Na=K / 4))
    _, free = brute_force(q, L)
    _, anchored = brute_force(q, L, anchor=K // 2)
    assert anchored == pytest.approx(free, rel=1e-12)


def test_lower_bounds_nondecreasing():
    q = BoundQuery("coherent", 30.0, OfdmConfig(K=12, Na=3))
    rep = solve_bnb(q, BnbConfig(L=3, delta_tol=1e-6, n_iter=300))
    lb = np.array(rep.lb_history)
    assert np.all(np.diff(lb) >= -1e-8 * lb[0])


def test_exhaustive_search_reports_zero_gap():
    q = BoundQuery("coherent", 30.0, OfdmConfig(K=8, Na=2))
    rep = solve_bnb(q, BnbConfig(L=2, delta_tol=1e-12, n_iter=10_000))
    _, best = brute_force(q, 2)
    assert rep.gap <= 1e-12
    assert rep.upper_bound == pytest.approx(best, rel=1e-12)


def test_deterministic():
    q = BoundQuery("noncoherent", 10.0, OfdmConfig(K=10, Na=2.5))
    a = solve_bnb(q, BnbConfig(L=3))
    b = solve_bnb(q, BnbConfig(L=3))
    assert np.array_equal(a.rho_star, b.rho_star)
    assert a.lb_history == b.lb_history
