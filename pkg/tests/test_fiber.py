"""Physics oracles for the split-step propagator.

Every tolerance here comes from a closed-form result: Gaussian pulse
broadening under pure GVD, CW self-phase modulation, the fundamental
soliton of the Manakov equation, and the accumulated ASE spectral density
of an ideal distributed amplifier.
"""

import numpy as np
import pytest

from fiberair import (
    AmpSpec,
    DualPolSignal,
    FiberSpec,
    Grid,
    MANAKOV_FACTOR,
    PS2_PER_KM_TO_S2_PER_KM,
    alpha_db_to_linear,
    dispersive_step,
    effective_length,
    ssfm_propagate,
)


def gaussian_pulse(grid: Grid, t0_s: float, peak_w: float = 1e-3) -> DualPolSignal:
    """Dual-pol Gaussian field centred mid-window, exp(-t^2 / (2 T0^2))."""
    t = grid.time() - grid.duration / 2.0
    envelope = np.sqrt(peak_w) * np.exp(-(t**2) / (2.0 * t0_s**2))
    samples = np.vstack([envelope, 0.8 * envelope]).astype(np.complex128)
    return DualPolSignal(grid, samples)


def rms_width(signal: DualPolSignal) -> float:
    """Intensity RMS width of the combined |Ax|^2 + |Ay|^2 profile, s."""
    t = signal.grid.time()
    p = np.abs(signal.samples[0]) ** 2 + np.abs(signal.samples[1]) ** 2
    mean = np.sum(t * p) / np.sum(p)
    return float(np.sqrt(np.sum((t - mean) ** 2 * p) / np.sum(p)))


def test_energy_conserved_noiseless():
    grid = Grid(10e9, 8, 256)
    rng = np.random.default_rng(3)
    samples = 0.02 * (rng.standard_normal((2, grid.n_samples))
                      + 1j * rng.standard_normal((2, grid.n_samples)))
    sig = DualPolSignal(grid, samples)
    fiber = FiberSpec(length_km=60.0, step_km=0.5)
    out, record = ssfm_propagate(sig, fiber)
    assert out.energy() == pytest.approx(sig.energy(), rel=1e-12)
    assert record.exit_power_w == pytest.approx(record.launch_power_w, rel=1e-12)


def test_gaussian_pulse_broadening_matches_closed_form():
    # sigma(z) = sigma0 * sqrt(1 + (beta2 z / T0^2)^2) for a chirp-free
    # Gaussian under pure GVD; gamma = 0 so the Manakov term is off.
    grid = Grid(10e9, 8, 1024)
    t0 = 30e-12
    sig = gaussian_pulse(grid, t0)
    fiber = FiberSpec(length_km=200.0, beta2_ps2_km=-21.7, gamma_per_w_km=0.0, step_km=1.0)
    out, _ = ssfm_propagate(sig, fiber)
    beta2_si = fiber.beta2_ps2_km * PS2_PER_KM_TO_S2_PER_KM
    xi = beta2_si * fiber.length_km / t0**2
    expected = (t0 / np.sqrt(2.0)) * np.sqrt(1.0 + xi**2)
    assert rms_width(out) == pytest.approx(expected, rel=1e-3)
    assert rms_width(sig) == pytest.approx(t0 / np.sqrt(2.0), rel=1e-3)


def test_cw_spm_phase_exact():
    # A constant field lives entirely in the omega = 0 bin, so dispersion is
    # inert and the output is exactly exp(+j * (8/9) * gamma * P_tot * L).
    grid = Grid(10e9, 2, 64)
    px, py = 3e-3, 1.5e-3
    samples = np.vstack([
        np.full(grid.n_samples, np.sqrt(px), dtype=np.complex128),
        np.full(grid.n_samples, np.sqrt(py) * np.exp(0.3j)),
    ])
    sig = DualPolSignal(grid, samples)
    fiber = FiberSpec(length_km=42.0, gamma_per_w_km=1.3, step_km=1.0)
    out, _ = ssfm_propagate(sig, fiber)
    phase = MANAKOV_FACTOR * fiber.gamma_per_w_km * (px + py) * fiber.length_km
    np.testing.assert_allclose(out.samples, sig.samples * np.exp(1j * phase),
                               rtol=0, atol=1e-12 * np.sqrt(px))


def test_fundamental_soliton_shape_preserved():
    # Manakov bright soliton on one polarization: P0 = |beta2| / (gamma_eff T0^2).
    grid = Grid(10e9, 8, 512)
    t0 = 25e-12
    fiber = FiberSpec(length_km=90.0, step_km=0.1)
    beta2_si = abs(fiber.beta2_ps2_km) * PS2_PER_KM_TO_S2_PER_KM
    p0 = beta2_si / (MANAKOV_FACTOR * fiber.gamma_per_w_km * t0**2)
    t = grid.time() - grid.duration / 2.0
    samples = np.zeros((2, grid.n_samples), dtype=np.complex128)
    u = np.abs(t / t0)  # overflow-safe sech: 2 e^-|u| / (1 + e^-2|u|)
    samples[0] = np.sqrt(p0) * 2.0 * np.exp(-u) / (1.0 + np.exp(-2.0 * u))
    sig = DualPolSignal(grid, samples)
    out, _ = ssfm_propagate(sig, fiber)
    mask = np.abs(sig.samples[0]) > 1e-3 * np.sqrt(p0)
    dev = np.abs(np.abs(out.samples[0][mask]) - np.abs(sig.samples[0][mask]))
    assert np.max(dev) / np.sqrt(p0) < 0.01
    assert np.max(np.abs(out.samples[1])) < 1e-12


def test_step_halving_is_second_order():
    # Symmetric splitting has O(dz^2) global error: halving the step should
    # shrink the error by ~4x (accept 3..5 to allow higher-order residue).
    from fiberair import IidGaussian, draw_symbols, nyquist_shape

    grid = Grid(10e9, 4, 256)
    block = draw_symbols(IidGaussian(), 256, seed=11).scale_to_power(5e-3)
    sig = nyquist_shape(block, grid, rolloff=0.1)

    def run(step_km):
        fiber = FiberSpec(length_km=80.0, step_km=step_km)
        out, _ = ssfm_propagate(sig, fiber)
        return out.samples

    ref = run(0.025)
    err_coarse = np.max(np.abs(run(0.4) - ref))
    err_fine = np.max(np.abs(run(0.2) - ref))
    ratio = err_coarse / err_fine
    assert 3.0 < ratio < 5.0


def test_ase_accumulated_psd():
    # Ideal distributed amplification: after L km the per-pol noise PSD is
    # nsp * h * nu * alpha * L, i.e. per-sample variance PSD * fs.
    grid = Grid(10e9, 8, 32768)
    sig = DualPolSignal(grid, np.zeros((2, grid.n_samples), dtype=np.complex128))
    fiber = FiberSpec(length_km=100.0, gamma_per_w_km=0.0, step_km=1.0)
    amp = AmpSpec.from_alpha_db(0.2)
    out, record = ssfm_propagate(sig, fiber, amp=amp, seed=7)
    expected_var = amp.noise_psd(fiber.length_km) * grid.sample_rate
    measured = np.mean(np.abs(out.samples) ** 2)
    assert measured == pytest.approx(expected_var, rel=0.01)
    assert abs(np.mean(out.samples)) < 5.0 * np.sqrt(expected_var / out.samples.size)
    assert record.noise_samples_drawn == record.steps_executed * 2 * grid.n_samples


def test_noise_psd_formula():
    amp = AmpSpec.from_alpha_db(0.2, nsp=1.2)
    alpha = alpha_db_to_linear(0.2)
    assert amp.noise_psd(80.0) == pytest.approx(1.2 * amp.photon_energy * alpha * 80.0)
    assert AmpSpec(nsp=0.0).noise_psd(100.0) == 0.0


def test_linear_fiber_equals_single_dispersive_step():
    grid = Grid(10e9, 4, 256)
    rng = np.random.default_rng(5)
    sig = DualPolSignal(grid, 0.01 * (rng.standard_normal((2, grid.n_samples))
                                      + 1j * rng.standard_normal((2, grid.n_samples))))
    fiber = FiberSpec(length_km=73.3, gamma_per_w_km=0.0, step_km=0.5)
    out, record = ssfm_propagate(sig, fiber)
    direct = dispersive_step(sig, fiber.beta2_ps2_km, fiber.length_km)
    np.testing.assert_allclose(out.samples, direct.samples, rtol=0, atol=1e-12)
    assert record.steps_executed == 147  # 146 full steps plus the 0.3 km remainder


def test_net_loss_when_alpha_set():
    grid = Grid(10e9, 2, 64)
    sig = DualPolSignal(grid, np.full((2, grid.n_samples), 0.05 + 0j))
    fiber = FiberSpec(length_km=50.0, beta2_ps2_km=0.0, gamma_per_w_km=0.0,
                      alpha_db_per_km=0.2, step_km=1.0)
    out, _ = ssfm_propagate(sig, fiber)
    assert out.total_power() == pytest.approx(sig.total_power() * 10 ** (-1.0), rel=1e-12)


def test_effective_length_limits():
    assert effective_length(0.0, 0.7) == 0.7
    alpha = alpha_db_to_linear(0.2)
    assert effective_length(alpha, 0.5) == pytest.approx(
        (1.0 - np.exp(-alpha * 0.5)) / alpha)
    assert effective_length(alpha, 0.5) < 0.5


def test_polarization_rotation_commutes_with_propagation():
    # The Manakov nonlinearity sees only |Ax|^2 + |Ay|^2, which any Jones
    # unitary preserves, and dispersion is scalar per polarization.
    grid = Grid(10e9, 4, 128)
    rng = np.random.default_rng(9)
    sig = DualPolSignal(grid, 0.05 * (rng.standard_normal((2, grid.n_samples))
                                      + 1j * rng.standard_normal((2, grid.n_samples))))
    a = np.cos(0.4) * np.exp(0.7j)
    b = np.sin(0.4) * np.exp(-0.2j)
    u = np.array([[a, b], [-np.conj(b), np.conj(a)]])
    fiber = FiberSpec(length_km=40.0, step_km=0.5)
    rotated_first, _ = ssfm_propagate(DualPolSignal(grid, u @ sig.samples), fiber)
    rotated_last, _ = ssfm_propagate(sig, fiber)
    np.testing.assert_allclose(rotated_first.samples, u @ rotated_last.samples,
                               rtol=0, atol=1e-13)


def test_seed_determinism_and_generator_passthrough():
    grid = Grid(10e9, 2, 256)
    sig = DualPolSignal(grid, np.full((2, grid.n_samples), 0.03 + 0j))
    fiber = FiberSpec(length_km=20.0, step_km=0.5)
    amp = AmpSpec.from_alpha_db(0.2)
    out_a, _ = ssfm_propagate(sig, fiber, amp=amp, seed=123)
    out_b, _ = ssfm_propagate(sig, fiber, amp=amp, seed=123)
    out_c, _ = ssfm_propagate(sig, fiber, amp=amp, seed=124)
    out_d, _ = ssfm_propagate(sig, fiber, amp=amp, seed=np.random.default_rng(123))
    assert np.array_equal(out_a.samples, out_b.samples)
    assert not np.array_equal(out_a.samples, out_c.samples)
    assert np.array_equal(out_a.samples, out_d.samples)


def test_step_grid_covers_span():
    steps = FiberSpec(length_km=10.3, step_km=1.0).step_grid()
    assert len(steps) == 11
    assert steps[-1] == pytest.approx(0.3)
    assert np.sum(steps) == pytest.approx(10.3, abs=1e-12)
    assert len(FiberSpec(length_km=0.0).step_grid()) == 0
    exact = FiberSpec(length_km=5.0, step_km=0.5).step_grid()
    assert len(exact) == 10 and np.all(exact == 0.5)


def test_zero_length_is_identity():
    grid = Grid(10e9, 2, 32)
    sig = DualPolSignal(grid, np.full((2, grid.n_samples), 0.1 + 0.2j))
    out, record = ssfm_propagate(sig, FiberSpec(length_km=0.0))
    assert np.array_equal(out.samples, sig.samples)
    assert record.steps_executed == 0
    assert record.noise_samples_drawn == 0


def test_oversized_step_warns_and_runs():
    grid = Grid(10e9, 2, 32)
    sig = DualPolSignal(grid, np.full((2, grid.n_samples), 0.1 + 0j))
    fiber = FiberSpec(length_km=2.0, beta2_ps2_km=0.0, gamma_per_w_km=0.0, step_km=5.0)
    with pytest.warns(UserWarning, match="exceeds span length"):
        out, record = ssfm_propagate(sig, fiber)
    assert record.steps_executed == 1
    np.testing.assert_allclose(out.samples, sig.samples, rtol=0, atol=1e-15)


def test_non_finite_field_raises():
    grid = Grid(10e9, 2, 32)
    samples = np.full((2, grid.n_samples), 0.1 + 0j)
    samples[0, 5] = np.inf
    sig = DualPolSignal(grid, samples)
    with np.errstate(invalid="ignore"), pytest.raises(FloatingPointError, match="non-finite"):
        ssfm_propagate(sig, FiberSpec(length_km=1.0, step_km=0.5))


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        FiberSpec(length_km=-1.0)
    with pytest.raises(ValueError):
        FiberSpec(length_km=1.0, step_km=0.0)
    with pytest.raises(ValueError):
        AmpSpec(nsp=-0.1)
    with pytest.raises(ValueError):
        AmpSpec(mode="lumped")
