"""Receiver-side processing: dispersion compensation, ideal digital
backpropagation, subcarrier demultiplexing, and carrier alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fiber import FiberSpec, PropagationRecord, _propagate_core, dispersive_step
from .signals import (
    DualPolSignal,
    SymbolBlock,
    _brick_wall,
    _shift_spectrum,
    matched_filter_downsample,
    subcarrier_grid,
    subcarrier_offsets_bins,
)

__all__ = ["DbpSpec", "edc", "dbp", "subcarrier_demux", "cpe_align"]


@dataclass(frozen=True)
class DbpSpec:
    """Backpropagation settings.

    step_km=None mirrors the forward step grid exactly (ideal DBP); a coarser
    value trades accuracy for speed. gamma_scale scales the nonlinear
    coefficient; 0 reduces DBP to plain dispersion compensation.
    """

    step_km: float | None = None
    gamma_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.step_km is not None and self.step_km <= 0:
            raise ValueError("step_km must be positive (or None for the forward grid)")


def edc(signal: DualPolSignal, fiber: FiberSpec) -> DualPolSignal:
    """Electronic dispersion compensation: one-shot inverse dispersion filter."""
    return dispersive_step(signal, -fiber.beta2_ps2_km, fiber.length_km)


def dbp(signal: DualPolSignal, fiber: FiberSpec, spec: DbpSpec | None = None) -> DualPolSignal:
    """Digital backpropagation: split-step solution with negated coefficients.

    With spec.step_km=None the forward step grid is replayed in reverse, which
    inverts a noiseless single-channel run to numerical precision.
    """
    spec = spec or DbpSpec()
    if spec.step_km is None:
        steps = fiber.step_grid()[::-1].copy()
    else:
        steps = FiberSpec(
            length_km=fiber.length_km,
            beta2_ps2_km=fiber.beta2_ps2_km,
            gamma_per_w_km=fiber.gamma_per_w_km,
            step_km=spec.step_km,
        ).step_grid()[::-1].copy()
    record = PropagationRecord()
    out = _propagate_core(
        signal.samples, signal.grid, steps,
        -fiber.beta2_ps2_km, -fiber.gamma_per_w_km * spec.gamma_scale,
        0.0, None, None, record,
    )
    return DualPolSignal(signal.grid, out, signal.center_frequency_offset)


def subcarrier_demux(signal: DualPolSignal, n_subcarriers: int, rolloff: float) -> list[SymbolBlock]:
    """Split a channel into its subcarrier symbol streams (matched filtering each).

    n_subcarriers=1 is exactly matched_filter_downsample.
    """
    if n_subcarriers == 1:
        return [matched_filter_downsample(signal, rolloff)]
    grid = signal.grid
    offsets, delta = subcarrier_offsets_bins(grid.n_symbols, n_subcarriers, rolloff)
    sc_grid = subcarrier_grid(grid, n_subcarriers)
    spec = np.fft.fft(signal.samples, axis=-1)
    blocks = []
    for off in offsets:
        sub = _brick_wall(_shift_spectrum(spec, -off), grid.n_samples, delta // 2)
        sub_sig = DualPolSignal(sc_grid, np.fft.ifft(sub, axis=-1))
        blocks.append(matched_filter_downsample(sub_sig, rolloff))
    return blocks


def cpe_align(rx: SymbolBlock, tx: SymbolBlock) -> tuple[SymbolBlock, np.ndarray]:
    """Estimate the least-squares complex gain per polarization.

    Returns the rx block unchanged together with h (shape (2,)): the average
    phase/amplitude rotation between tx and rx, consumed by the metric stage.
    """
    if rx.n != tx.n:
        raise ValueError(f"length mismatch: rx {rx.n} vs tx {tx.n}")
    denom = np.sum(np.abs(tx.symbols) ** 2, axis=-1)
    if np.any(denom == 0):
        raise ValueError("tx block has an all-zero polarization")
    h = np.sum(np.conj(tx.symbols) * rx.symbols, axis=-1) / denom
    return rx, h
