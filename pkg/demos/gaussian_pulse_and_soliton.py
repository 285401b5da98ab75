"""Two textbook propagation checks, run through the actual simulator.

Left: a chirp-free Gaussian pulse spreads under dispersion alone; the RMS
width follows sigma(z) = sigma0 sqrt(1 + (beta2 z / T0^2)^2). Right: with
the power set to |beta2| / (gamma_eff T0^2), dispersion and the Manakov
nonlinearity cancel and the sech pulse propagates without changing shape.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fiberair import (
    MANAKOV_FACTOR,
    PS2_PER_KM_TO_S2_PER_KM,
    DualPolSignal,
    FiberSpec,
    Grid,
    ssfm_propagate,
)

grid = Grid(10e9, 8, 1024)
t = grid.time() - grid.duration / 2.0
t0 = 30e-12

# --- Gaussian under pure GVD, sampled every 25 km ---------------------------
distances = np.arange(0.0, 201.0, 25.0)
beta2 = -21.7
widths = []
for z in distances:
    field = np.exp(-(t**2) / (2 * t0**2)).astype(np.complex128)
    sig = DualPolSignal(grid, np.vstack([field, np.zeros_like(field)]))
    if z > 0:
        sig, _ = ssfm_propagate(sig, FiberSpec(length_km=z, beta2_ps2_km=beta2,
                                               gamma_per_w_km=0.0, step_km=1.0))
    p = np.abs(sig.samples[0]) ** 2
    mean = np.sum(t * p) / np.sum(p)
    widths.append(np.sqrt(np.sum((t - mean) ** 2 * p) / np.sum(p)))
widths = np.asarray(widths)

beta2_si = beta2 * PS2_PER_KM_TO_S2_PER_KM
closed_form = (t0 / np.sqrt(2)) * np.sqrt(1 + (beta2_si * distances / t0**2) ** 2)
print("Gaussian RMS width, simulated vs closed form (ps):")
for z, w, c in zip(distances, widths, closed_form):
    print(f"  z = {z:5.0f} km   {w * 1e12:7.2f}   {c * 1e12:7.2f}")

# --- fundamental soliton ----------------------------------------------------
fiber = FiberSpec(length_km=90.0, step_km=0.1)
t0s = 25e-12
p0 = abs(fiber.beta2_ps2_km) * PS2_PER_KM_TO_S2_PER_KM / (
    MANAKOV_FACTOR * fiber.gamma_per_w_km * t0s**2)
u = np.abs(t / t0s)
sech = 2 * np.exp(-u) / (1 + np.exp(-2 * u))  # overflow-safe sech
launch = DualPolSignal(grid, np.vstack([np.sqrt(p0) * sech, np.zeros_like(sech)]).astype(complex))
arrived, _ = ssfm_propagate(launch, fiber)
peak_dev = np.max(np.abs(np.abs(arrived.samples[0]) - np.abs(launch.samples[0]))) / np.sqrt(p0)
print(f"\nsoliton power P0 = {p0 * 1e3:.2f} mW, 90 km, peak |A| deviation {peak_dev:.2e}")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(distances, widths * 1e12, "o", label="SSFM")
ax1.plot(distances, closed_form * 1e12, "-", lw=1, label="closed form")
ax1.set_xlabel("distance (km)")
ax1.set_ylabel("RMS width (ps)")
ax1.legend()
ax1.set_title("dispersive broadening")

win = np.abs(t) < 8 * t0s
ax2.plot(t[win] * 1e12, np.abs(launch.samples[0][win]) ** 2 * 1e3, label="launch")
ax2.plot(t[win] * 1e12, np.abs(arrived.samples[0][win]) ** 2 * 1e3, "--", label="90 km")
ax2.set_xlabel("time (ps)")
ax2.set_ylabel("power (mW)")
ax2.legend()
ax2.set_title("fundamental soliton")
fig.tight_layout()

os.makedirs("demos/figures", exist_ok=True)
out = "demos/figures/gaussian_pulse_and_soliton.png"
fig.savefig(out, dpi=140)
print(f"wrote {out}")
