"""AIR metrics: Gaussian auxiliary channel against closed-form capacity, and
the particle-filter PPN metric against a synthetic Wiener phase/polarization
channel where the true generative model is known."""

import numpy as np
import pytest

from fiberair import (
    PpnMetric,
    SymbolBlock,
    air_gaussian,
    air_ppn,
    linear_capacity,
    tune_ppn_params,
)


def awgn_pair(n_sym, snr_db, seed=0, power=1.0):
    rng = np.random.default_rng(seed)
    sigma2 = power / 10 ** (snr_db / 10)
    x = np.sqrt(power / 2) * (rng.standard_normal((2, n_sym))
                              + 1j * rng.standard_normal((2, n_sym)))
    n = np.sqrt(sigma2 / 2) * (rng.standard_normal((2, n_sym))
                               + 1j * rng.standard_normal((2, n_sym)))
    return SymbolBlock(x, power), SymbolBlock(x + n, power)


def wiener_ppn_streams(n_streams, n_sym, snr_db, phase_var, pol_var=0.0,
                       seed=0, power=1.0):
    """Streams through y_k = e^{j theta_k} R(phi_k) x_k + n with Wiener states."""
    rng = np.random.default_rng(seed)
    sigma2 = power / 10 ** (snr_db / 10)
    tx_list, rx_list = [], []
    for _ in range(n_streams):
        x = np.sqrt(power / 2) * (rng.standard_normal((2, n_sym))
                                  + 1j * rng.standard_normal((2, n_sym)))
        theta = np.cumsum(np.sqrt(phase_var) * rng.standard_normal(n_sym))
        phi = np.cumsum(np.sqrt(pol_var) * rng.standard_normal(n_sym))
        c, s = np.cos(phi), np.sin(phi)
        y = np.exp(1j * theta) * np.vstack([c * x[0] + s * x[1],
                                            -s * x[0] + c * x[1]])
        y = y + np.sqrt(sigma2 / 2) * (rng.standard_normal((2, n_sym))
                                       + 1j * rng.standard_normal((2, n_sym)))
        tx_list.append(SymbolBlock(x, power))
        rx_list.append(SymbolBlock(y, power))
    return tx_list, rx_list


def test_gaussian_air_matches_awgn_capacity():
    tx, rx = awgn_pair(1_000_000, 10.0, seed=42)
    est = air_gaussian(tx, rx)
    assert est.air == pytest.approx(np.log2(1.0 + 10.0), abs=0.02)
    assert est.std_err > 0
    assert est.n_symbols_used == 1_000_000


def test_gaussian_air_independent_streams_is_zero():
    tx, _ = awgn_pair(100_000, 10.0, seed=1)
    _, rx = awgn_pair(100_000, 10.0, seed=2)
    assert air_gaussian(tx, rx).air < 0.01


def test_gaussian_air_monotonic_in_snr():
    airs = [air_gaussian(*awgn_pair(50_000, s, seed=7)).air for s in (5.0, 10.0, 15.0)]
    assert airs[0] < airs[1] < airs[2]


def test_gaussian_air_invariant_to_per_pol_phase():
    tx, rx = awgn_pair(20_000, 12.0, seed=3)
    spun = SymbolBlock(rx.symbols * np.exp(1j * np.array([[0.7], [-2.1]])),
                       rx.per_pol_power)
    assert air_gaussian(tx, spun).air == pytest.approx(air_gaussian(tx, rx).air,
                                                       rel=1e-12)


def test_gaussian_air_reports_effective_snr():
    tx, rx = awgn_pair(200_000, 10.0, seed=6)
    est = air_gaussian(tx, rx)
    assert est.info["snr_eff_db"] == pytest.approx(10.0, abs=0.1)


def test_gaussian_air_rejects_short_blocks():
    tx, rx = awgn_pair(15, 10.0)
    with pytest.raises(ValueError, match="at least"):
        air_gaussian(tx, rx)


def test_linear_capacity_basics():
    assert linear_capacity(0.0) == 0.0
    assert linear_capacity(1.0) == 1.0
    with pytest.raises(ValueError):
        linear_capacity(-0.5)


def test_ppn_beats_gaussian_on_wiener_phase_noise():
    # Strong laser-like phase noise: the memoryless Gaussian metric buries the
    # phase walk in its residual variance, the tracker recovers it.
    tx, rx = wiener_ppn_streams(8, 1024, snr_db=15.0, phase_var=1e-3, seed=10)
    base = PpnMetric(n_particles=64)
    tuned = tune_ppn_params(tx[:2], rx[:2], base,
                            grid={"phase_step_var": (1e-5, 3e-4, 1e-3, 3e-3),
                                  "pol_step_var": (0.0,),
                                  "noise_scale": (0.1, 0.3, 1.0)}, seed=5)
    ppn = air_ppn(tx[2:], rx[2:], tuned, seed=6)
    gauss = air_gaussian(tx[2:], rx[2:])
    assert ppn.air - gauss.air >= 0.3
    assert not ppn.info["persistent_degeneracy"]


def test_ppn_matches_gaussian_without_phase_noise():
    tx, rx = wiener_ppn_streams(8, 1024, snr_db=15.0, phase_var=0.0, seed=11)
    metric = PpnMetric(n_particles=64, phase_step_var=1e-6)
    ppn = air_ppn(tx, rx, metric, seed=3)
    gauss = air_gaussian(tx, rx)
    assert abs(ppn.air - gauss.air) <= 0.05


def test_ppn_below_capacity_on_awgn():
    # Mismatched-decoder AIRs lower-bound mutual information.
    snr_db = 15.0
    tx, rx = wiener_ppn_streams(8, 1024, snr_db=snr_db, phase_var=0.0, seed=12)
    metric = PpnMetric(n_particles=64, phase_step_var=1e-6)
    est = air_ppn(tx, rx, metric, seed=4)
    assert est.air <= linear_capacity(10 ** (snr_db / 10)) + 2 * est.std_err


def test_ppn_stable_under_particle_doubling():
    tx, rx = wiener_ppn_streams(8, 1024, snr_db=15.0, phase_var=1e-3, seed=13)
    m64 = PpnMetric(n_particles=64, phase_step_var=1e-3, noise_scale=0.3)
    m128 = PpnMetric(n_particles=128, phase_step_var=1e-3, noise_scale=0.3)
    a = air_ppn(tx, rx, m64, seed=8)
    b = air_ppn(tx, rx, m128, seed=9)
    assert abs(a.air - b.air) < 2.0 * np.sqrt(a.std_err**2 + b.std_err**2) + 1e-6


def test_tuner_recovers_phase_dynamics():
    tx, rx = wiener_ppn_streams(6, 1024, snr_db=15.0, phase_var=1e-3, seed=14)
    base = PpnMetric(n_particles=64)
    grid = {"phase_step_var": (1e-6, 1e-4, 1e-3), "pol_step_var": (0.0,),
            "noise_scale": (0.3, 1.0)}
    tuned = tune_ppn_params(tx, rx, base, grid=grid, seed=1)
    assert tuned.phase_step_var == 1e-3

    tx0, rx0 = wiener_ppn_streams(6, 1024, snr_db=15.0, phase_var=0.0, seed=15)
    quiet = tune_ppn_params(tx0, rx0, base, grid=grid, seed=1)
    assert quiet.phase_step_var == 1e-6
    assert quiet.noise_scale == 1.0


def test_tuner_rejects_unknown_axis():
    tx, rx = wiener_ppn_streams(2, 128, snr_db=10.0, phase_var=0.0)
    with pytest.raises(ValueError, match="unknown tuning axes"):
        tune_ppn_params(tx, rx, PpnMetric(), grid={"bogus": (1.0,)})


def test_frozen_filter_underperforms_on_wiener_channel():
    tx, rx = wiener_ppn_streams(6, 1024, snr_db=15.0, phase_var=1e-3, seed=16)
    tracking = air_ppn(tx, rx, PpnMetric(phase_step_var=1e-3, noise_scale=0.3), seed=2)
    frozen = air_ppn(tx, rx, PpnMetric(phase_step_var=1e-6, noise_scale=1.0), seed=2)
    assert tracking.air - frozen.air > 0.2


def test_degeneracy_flag_fires_on_absurd_noise_scale():
    # ESS < 1% of particles needs clouds > 100 particles to be reachable at
    # all; a frozen filter with a crushed noise floor collapses every step.
    tx, rx = wiener_ppn_streams(4, 512, snr_db=15.0, phase_var=1e-3, seed=17)
    silly = PpnMetric(n_particles=128, phase_step_var=1e-6, noise_scale=0.003)
    est = air_ppn(tx, rx, silly, seed=2)
    assert est.info["degenerate_step_fraction"] > 0.05
    assert est.info["persistent_degeneracy"]

    sane = air_ppn(tx, rx, PpnMetric(n_particles=128, phase_step_var=1e-3,
                                     noise_scale=0.3), seed=2)
    assert not sane.info["persistent_degeneracy"]


def test_ppn_determinism():
    tx, rx = wiener_ppn_streams(4, 512, snr_db=12.0, phase_var=3e-4, seed=18)
    metric = PpnMetric(phase_step_var=3e-4, noise_scale=0.3)
    a = air_ppn(tx, rx, metric, seed=21)
    b = air_ppn(tx, rx, metric, seed=21)
    c = air_ppn(tx, rx, metric, seed=22)
    assert a.air == b.air and a.std_err == b.std_err
    assert a.air != c.air


def test_ppn_rejects_mismatched_streams():
    tx, rx = wiener_ppn_streams(2, 256, snr_db=10.0, phase_var=0.0, seed=19)
    short_rx = SymbolBlock(rx[1].symbols[:, :128], rx[1].per_pol_power)
    with pytest.raises(ValueError, match="length mismatch"):
        air_ppn(tx, [rx[0], short_rx], PpnMetric())
    short_tx = SymbolBlock(tx[1].symbols[:, :128], tx[1].per_pol_power)
    with pytest.raises(ValueError, match="one length"):
        air_ppn([tx[0], short_tx], [rx[0], short_rx], PpnMetric())
    with pytest.raises(ValueError, match="blocks"):
        air_ppn(tx, rx[:1], PpnMetric())


def test_ppn_metric_validation():
    with pytest.raises(ValueError):
        PpnMetric(n_particles=1)
    with pytest.raises(ValueError):
        PpnMetric(phase_step_var=-1e-6)
    with pytest.raises(ValueError):
        PpnMetric(noise_scale=0.0)
    with pytest.raises(ValueError):
        PpnMetric(resample_threshold=1.5)
    with pytest.raises(ValueError):
        PpnMetric(n_subcarriers=0)
