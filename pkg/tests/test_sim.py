import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from ofdm_zzb.bounds import crlb
from ofdm_zzb.ofdm import DomainError, OfdmConfig, acf_noncoherent, uniform_allocation
from ofdm_zzb.sim import (
    TABLE_Z0,
    CampaignSpec,
    ChannelParams,
    SearchGrid,
    apply_channel,
    correlate,
    estimate_snr,
    estimate_toa,
    make_symbol,
    measure_snr,
    noise_floor,
    run_campaign,
)

from conftest import random_allocation

CFG = OfdmConfig()
U = uniform_allocation(64)


def test_make_symbol():
    sym = make_symbol(U, 64.0)
    assert np.allclose(sym.x, 1.0)
    rho = np.zeros(64)
    rho[[3, 9]] = 0.5
    sym = make_symbol(rho, 10.0, "random", 1)
    assert np.all(sym.x[rho == 0] == 0)
    assert np.allclose(np.abs(sym.x) ** 2, 10.0 * rho, rtol=1e-12)
    with pytest.raises(DomainError):
        make_symbol(U, 0.0)
    with pytest.raises(DomainError):
        make_symbol(U, 1.0, "chirp")


def test_random_phase_keeps_acf_magnitude(rng):
    rho = random_allocation(rng, 64, 0.5)
    z = np.linspace(0, 16, 97)
    ref = np.abs(correlate(make_symbol(rho, 1.0).x, make_symbol(rho, 1.0), z))
    for seed in range(10):
        sym = make_symbol(rho, 1.0, "random", seed)
        assert np.allclose(np.abs(correlate(sym.x, sym, z)), ref, atol=1e-12)


def test_channel_identity_and_integer_delay():
    sym = make_symbol(U, 64.0)
    assert np.allclose(apply_channel(sym, ChannelParams(z0=0.0)), sym.x)
    y = apply_channel(sym, ChannelParams(z0=5.0))
    grid = np.arange(0, 17, dtype=float)
    assert np.argmax(np.abs(correlate(y, sym, grid))) == 5
    with pytest.raises(DomainError):
        ChannelParams(gain=0.0)
    with pytest.raises(DomainError):
        ChannelParams(noise_var=-1.0)


def test_channel_noise_variance():
    sym = make_symbol(np.zeros(64) + 1 / 64, 64.0)
    rng = np.random.default_rng(3)
    ch = ChannelParams(gain=1.0, z0=0.0, noise_var=2.5)
    v = np.concatenate([apply_channel(sym, ch, rng) - sym.x for _ in range(1563)])
    assert v.size >= 100_000
    assert np.mean(np.abs(v) ** 2) == pytest.approx(2.5, rel=0.02)


def test_correlate_examples(rng):
    rho = random_allocation(rng, 64, 0.6)
    P, g, phi = 5.0, 2.0, 0.7
    sym = make_symbol(rho, P)
    y = apply_channel(sym, ChannelParams(gain=g, z0=3.3, phi0=phi))
    assert correlate(y, sym, 3.3) == pytest.approx(math.sqrt(g) * P * np.exp(1j * phi), rel=1e-12)
    z = np.linspace(0, 16, 301)
    y0 = apply_channel(sym, ChannelParams(gain=g, z0=0.0))
    norm = np.abs(correlate(y0, sym, z) / (math.sqrt(g) * P)) ** 2
    assert np.allclose(norm, acf_noncoherent(z, rho), atol=1e-10)
    zero = make_symbol(np.zeros(64), 1.0)
    assert correlate(y, zero, 1.0) == 0


def test_estimate_toa_noiseless():
    sym = make_symbol(U, 64.0)
    y = apply_channel(sym, ChannelParams(z0=TABLE_Z0, phi0=1.1))
    zn = estimate_toa(y, sym, "noncoherent")
    zc = estimate_toa(y, sym, "coherent", phi0_known=1.1)
    assert abs(zn - TABLE_Z0) <= 1e-3
    assert zc == pytest.approx(zn, abs=1e-3)
    with pytest.raises(DomainError):
        estimate_toa(y, sym, "coherent")
    stack = estimate_toa(np.stack([y, y]), sym, "noncoherent")
    assert stack.shape == (2,)


def test_pure_noise_estimates_spread_over_window():
    rep = run_campaign(U, "noncoherent", 0.0, CampaignSpec(trials=10_050, discard=50), seed=5)
    assert rep.rmse_samples**2 == pytest.approx(16.0**2 / 12, rel=0.15)


def test_noiseless_campaign_is_exact():
    for scheme in ("coherent", "noncoherent"):
        rep = run_campaign(U, scheme, 100.0, CampaignSpec(trials=200), noiseless=True)
        assert rep.rmse_samples <= 1e-9
        assert abs(rep.mean_estimate - TABLE_Z0) <= 1e-3


def test_campaign_spec_validation():
    with pytest.raises(DomainError):
        CampaignSpec(trials=51, discard=50)
    with pytest.raises(DomainError):
        CampaignSpec(z0="random")


def test_campaign_reproducible_and_labelled():
    spec = CampaignSpec(trials=500, discard=50, z0="uniform")
    a = run_campaign(U, "noncoherent", 64.0, spec, seed=9)
    b = run_campaign(U, "noncoherent", 64.0, spec, seed=9)
    assert a == b
    assert a.trials_used == 450
    assert a.gamma_per_subcarrier == pytest.approx(1.0)
    assert a.rmse_seconds == pytest.approx(a.rmse_samples * CFG.Ts)
    assert a.rmse_meters == pytest.approx(a.rmse_seconds * 299_792_458.0)
    assert run_campaign(U, "noncoherent", 64.0, spec, seed=10) != a


def test_phase_rule_invariance():
    # compare trial-level estimates from unit and random payload phases
    rng = np.random.default_rng(11)
    rho = random_allocation(rng, 64, 0.7)
    unit = make_symbol(rho, 64.0)
    rand = make_symbol(rho, 64.0, "random", 12)
    ch = ChannelParams(noise_var=64.0 / 30.0)
    n = 3000
    ph = rng.uniform(0, 2 * np.pi, n)
    ests = []
    for sym in (unit, rand):
        ys = np.stack([apply_channel(sym, ChannelParams(z0=TABLE_Z0, phi0=p, noise_var=ch.noise_var), rng) for p in ph])
        ests.append(estimate_toa(ys, sym, "noncoherent"))
    assert ks_2samp(*ests).pvalue > 0.01


def test_rmse_decreases_with_snr():
    db = np.array([-12.0, -8.0, -4.0, 0.0, 4.0])
    spec = CampaignSpec(trials=10_000)
    rmse = [run_campaign(U, "noncoherent", 64 * 10 ** (x / 10), spec, seed=1).rmse_samples for x in db]
    inversions = sum(b > a for a, b in zip(rmse, rmse[1:]))
    assert inversions <= 1


def test_threshold_effect():
    spec = CampaignSpec(trials=10_000)
    ratios = {}
    for x in (-20.0, -16.0, -12.0, 0.0, 10.0):
        g = 64 * 10 ** (x / 10)
        rep = run_campaign(U, "coherent", g, spec, seed=2)
        ratios[x] = rep.rmse_seconds / math.sqrt(crlb(U, g, CFG))
    assert max(ratios.values()) >= 3
    assert ratios[10.0] <= 1.3


def test_snr_estimation():
    gamma = 10.0
    est = [measure_snr(CFG, gamma, seed=s).gamma_hat for s in range(20)]
    assert abs(10 * math.log10(np.median(est) / gamma)) <= 1.5
    e = measure_snr(CFG, gamma, seed=0)
    assert e.per_subcarrier == pytest.approx(e.gamma_hat / 64)
    assert not e.below_threshold


def test_snr_zero_signal_flagged():
    est = [measure_snr(CFG, 0.0, seed=s) for s in range(10)]
    assert all(e.below_threshold for e in est)
    floor = noise_floor(250, 16.0)
    assert floor / 3 <= np.median([e.gamma_hat for e in est]) <= 3 * floor


def test_snr_grows_with_accumulation():
    sym = make_symbol(U, 64.0)
    y = apply_channel(sym, ChannelParams(z0=4.0))
    raw = [estimate_snr(np.tile(y, (m, 1)), sym, 1.0, CFG).raw for m in (1, 2, 8)]
    assert raw[1] == pytest.approx(4 * raw[0], rel=1e-9)
    assert raw[2] == pytest.approx(64 * raw[0], rel=1e-9)


def test_search_grid():
    g = SearchGrid(16.0, 64)
    assert g.z[0] == 0 and g.z[-1] == 16 and g.z.size == 1025
    with pytest.raises(DomainError):
        SearchGrid(0.0)
