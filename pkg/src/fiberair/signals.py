"""Grids, symbol sources, Nyquist pulse shaping, and WDM (de)multiplexing.

Everything here is block-circular: a block is one period of a periodic
signal, so filtering, frequency shifting, and resampling are exact on the
DFT grid (no edge transients, no interpolation error). Frequency bins
follow the half-open convention: bin k of an N-point grid sits at
k*sample_rate/N wrapped into (-sample_rate/2, +sample_rate/2].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Grid",
    "DualPolSignal",
    "SymbolBlock",
    "IidGaussian",
    "MaxwellBoltzmannQam",
    "SelectedSequences",
    "InputLaw",
    "qam_constellation",
    "maxwell_boltzmann_probabilities",
    "draw_symbols",
    "nyquist_shape",
    "matched_filter_downsample",
    "subcarrier_mux",
    "subcarrier_offsets_bins",
    "wdm_mux",
    "wdm_demux",
    "resample",
]


# ---------------------------------------------------------------------------
# grids and containers


@dataclass(frozen=True)
class Grid:
    """Uniform time/frequency grid for one block of a dual-pol signal."""

    symbol_rate: float
    samples_per_symbol: int
    n_symbols: int

    def __post_init__(self) -> None:
        if self.symbol_rate <= 0:
            raise ValueError(f"symbol_rate must be positive, got {self.symbol_rate}")
        if self.samples_per_symbol < 1 or int(self.samples_per_symbol) != self.samples_per_symbol:
            raise ValueError(f"samples_per_symbol must be a positive integer, got {self.samples_per_symbol}")
        if self.n_symbols < 1 or int(self.n_symbols) != self.n_symbols:
            raise ValueError(f"n_symbols must be a positive integer, got {self.n_symbols}")
        if (self.n_symbols * self.samples_per_symbol) % 2 != 0:
            raise ValueError("total sample count must be even")

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.samples_per_symbol

    @property
    def n_samples(self) -> int:
        return self.n_symbols * self.samples_per_symbol

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return self.n_symbols / self.symbol_rate

    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def frequency_bins(self) -> np.ndarray:
        """Integer bin indices wrapped into (-n/2, +n/2]."""
        return wrapped_bins(self.n_samples)

    def frequencies(self) -> np.ndarray:
        """Bin frequencies in Hz, wrapped into (-fs/2, +fs/2]."""
        return self.frequency_bins() * (self.sample_rate / self.n_samples)

    def omega(self) -> np.ndarray:
        """Angular bin frequencies in rad/s."""
        return 2.0 * np.pi * self.frequencies()


def wrapped_bins(n: int) -> np.ndarray:
    """Bin indices of an n-point DFT wrapped into (-n/2, +n/2]."""
    k = np.arange(n)
    return np.where(k <= n // 2, k, k - n)


@dataclass
class DualPolSignal:
    """Sampled dual-polarization field; |sample|^2 is instantaneous power in W."""

    grid: Grid
    samples: np.ndarray  # (2, n_samples) complex
    center_frequency_offset: float = 0.0

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.shape != (2, self.grid.n_samples):
            raise ValueError(
                f"samples shape {self.samples.shape} does not match grid (2, {self.grid.n_samples})"
            )

    @property
    def samples_x(self) -> np.ndarray:
        return self.samples[0]

    @property
    def samples_y(self) -> np.ndarray:
        return self.samples[1]

    def power_per_pol(self) -> np.ndarray:
        """Mean power of each polarization, W."""
        return np.mean(np.abs(self.samples) ** 2, axis=-1)

    def total_power(self) -> float:
        """Mean total (both polarizations) power, W."""
        return float(np.sum(self.power_per_pol()))

    def energy(self) -> float:
        """Total block energy, J."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    def copy(self) -> "DualPolSignal":
        return DualPolSignal(self.grid, self.samples.copy(), self.center_frequency_offset)


@dataclass
class SymbolBlock:
    """Dual-pol symbol sequence. per_pol_power records the W applied at modulation."""

    symbols: np.ndarray  # (2, n) complex
    per_pol_power: float = 1.0

    def __post_init__(self) -> None:
        self.symbols = np.asarray(self.symbols, dtype=np.complex128)
        if self.symbols.ndim != 2 or self.symbols.shape[0] != 2:
            raise ValueError(f"symbols must have shape (2, n), got {self.symbols.shape}")

    @property
    def n(self) -> int:
        return self.symbols.shape[1]

    @property
    def sym_x(self) -> np.ndarray:
        return self.symbols[0]

    @property
    def sym_y(self) -> np.ndarray:
        return self.symbols[1]

    def mean_power_per_pol(self) -> np.ndarray:
        return np.mean(np.abs(self.symbols) ** 2, axis=-1)

    def scale_to_power(self, per_pol_power: float) -> "SymbolBlock":
        """Return a copy scaled so each polarization has exactly this mean power."""
        if per_pol_power < 0:
            raise ValueError("per_pol_power must be non-negative")
        current = self.mean_power_per_pol()
        if np.any(current <= 0) and per_pol_power > 0:
            raise ValueError("cannot scale an all-zero polarization to nonzero power")
        factors = np.where(current > 0, np.sqrt(per_pol_power / np.where(current > 0, current, 1.0)), 0.0)
        return SymbolBlock(self.symbols * factors[:, None], per_pol_power=per_pol_power)

    def guard_trimmed(self, n_guard: int) -> "SymbolBlock":
        """Drop n_guard symbols from each end (both polarizations)."""
        if n_guard == 0:
            return self
        if 2 * n_guard >= self.n:
            raise ValueError(f"guard {n_guard} leaves no symbols in a block of {self.n}")
        return SymbolBlock(self.symbols[:, n_guard:-n_guard], per_pol_power=self.per_pol_power)


# ---------------------------------------------------------------------------
# input laws


@dataclass(frozen=True)
class IidGaussian:
    """Circularly symmetric complex Gaussian, unit variance per polarization."""


@dataclass(frozen=True)
class MaxwellBoltzmannQam:
    """Square QAM with Maxwell-Boltzmann point probabilities prop. exp(-lam*|c|^2).

    lam refers to the integer-coordinate constellation before the constellation
    is renormalized to unit mean power. lam = 0 is uniform QAM.
    """

    order: int
    lam: float

    def __post_init__(self) -> None:
        if self.order not in (16, 64, 256):
            raise ValueError(f"unsupported QAM order {self.order} (expected 16, 64 or 256)")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")


@dataclass(frozen=True)
class SelectedSequences:
    """Draw whole pre-selected dual-pol blocks uniformly (with replacement)."""

    blocks: tuple  # tuple[SymbolBlock, ...]; tuple so the law stays hashable-ish

    def __post_init__(self) -> None:
        if len(self.blocks) == 0:
            raise ValueError("SelectedSequences needs at least one block")
        lengths = {b.n for b in self.blocks}
        if len(lengths) != 1:
            raise ValueError(f"library blocks must share one length, got {sorted(lengths)}")

    @property
    def block_len(self) -> int:
        return self.blocks[0].n


InputLaw = Union[IidGaussian, MaxwellBoltzmannQam, SelectedSequences]


def qam_constellation(order: int) -> np.ndarray:
    """Square QAM points on the odd-integer grid (not power-normalized)."""
    m = int(round(np.sqrt(order)))
    if m * m != order:
        raise ValueError(f"QAM order must be a perfect square, got {order}")
    levels = np.arange(-(m - 1), m, 2, dtype=float)
    re, im = np.meshgrid(levels, levels)
    return (re + 1j * im).ravel()


def maxwell_boltzmann_probabilities(points: np.ndarray, lam: float) -> np.ndarray:
    """p_i prop. exp(-lam*|c_i|^2), normalized to sum to one."""
    w = np.exp(-lam * np.abs(points) ** 2)
    return w / np.sum(w)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_symbols(law: InputLaw, n: int, seed=None) -> SymbolBlock:
    """Draw a dual-pol block of n symbols from an input law.

    Laws are normalized to unit mean power in expectation; exact empirical
    normalization happens later via SymbolBlock.scale_to_power.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = _as_rng(seed)
    if isinstance(law, IidGaussian):
        syms = (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))) / np.sqrt(2.0)
        return SymbolBlock(syms)
    if isinstance(law, MaxwellBoltzmannQam):
        points = qam_constellation(law.order)
        probs = maxwell_boltzmann_probabilities(points, law.lam)
        # renormalize the constellation to unit mean power under the law
        points = points / np.sqrt(np.sum(probs * np.abs(points) ** 2))
        idx = rng.choice(len(points), size=(2, n), p=probs)
        return SymbolBlock(points[idx])
    if isinstance(law, SelectedSequences):
        block_len = law.block_len
        if n % block_len != 0:
            raise ValueError(f"n={n} is not a multiple of the library block length {block_len}")
        idx = rng.integers(len(law.blocks), size=n // block_len)
        syms = np.concatenate([law.blocks[i].symbols for i in idx], axis=-1)
        return SymbolBlock(syms)
    raise TypeError(f"unknown input law {law!r}")


# ---------------------------------------------------------------------------
# root-raised-cosine shaping (frequency domain, circular)


def raised_cosine_bins(n_total: int, sps: int, rolloff: float) -> np.ndarray:
    """Raised-cosine power spectrum sampled on the n_total-bin wrapped grid.

    Evaluated in bin units so band edges are exact. The aliases of this
    function at multiples of the symbol rate sum to exactly 1 on every bin
    (Nyquist criterion), which is what makes shaping power-preserving and
    the matched roundtrip exact. At rolloff 0 the Nyquist-frequency weight
    goes entirely to the +Rs/2 bin, consistent with the half-open frequency
    window; an even split would break the single-pulse ISI-free property.
    """
    if not 0.0 <= rolloff < 1.0:
        raise ValueError(f"rolloff must be in [0, 1), got {rolloff}")
    if n_total % sps != 0:
        raise ValueError("n_total must be a multiple of sps")
    n_sym = n_total // sps
    b = np.abs(wrapped_bins(n_total)).astype(float)  # |frequency| in bins of Rs/n_sym
    e1 = (1.0 - rolloff) * n_sym / 2.0
    e2 = (1.0 + rolloff) * n_sym / 2.0
    rc = np.zeros(n_total)
    rc[b < e1] = 1.0
    if rolloff > 0.0:
        trans = (b >= e1) & (b <= e2)
        rc[trans] = 0.5 * (1.0 + np.cos(np.pi * (b[trans] - e1) / (rolloff * n_sym)))
    elif n_sym % 2 == 0:
        # brick wall: the +Rs/2 bin carries the full edge weight, -Rs/2 none
        rc[wrapped_bins(n_total) == n_sym // 2] = 1.0
    return rc


def nyquist_shape(block: SymbolBlock, grid: Grid, rolloff: float) -> DualPolSignal:
    """RRC-shape a symbol block onto a grid (circular frequency-domain filter).

    Per-block mean power is preserved exactly, so the signal's per-pol power
    equals the block's measured per-pol power.
    """
    if block.n != grid.n_symbols:
        raise ValueError(f"block has {block.n} symbols, grid expects {grid.n_symbols}")
    if (1.0 + rolloff) * grid.symbol_rate > grid.sample_rate:
        raise ValueError("grid too narrow: occupied bandwidth exceeds the sample rate")
    sps = grid.samples_per_symbol
    spec = np.fft.fft(block.symbols, axis=-1)
    spec = np.tile(spec, (1, sps))
    gain = sps * np.sqrt(raised_cosine_bins(grid.n_samples, sps, rolloff))
    return DualPolSignal(grid, np.fft.ifft(spec * gain, axis=-1))


def matched_filter_downsample(signal: DualPolSignal, rolloff: float) -> SymbolBlock:
    """Apply the matched RRC filter and sample at symbol instants.

    Exact inverse of nyquist_shape on a clean signal. Output symbols keep
    physical units; per_pol_power records the measured mean power.
    """
    grid = signal.grid
    sps = grid.samples_per_symbol
    gain = np.sqrt(raised_cosine_bins(grid.n_samples, sps, rolloff))
    filtered = np.fft.ifft(np.fft.fft(signal.samples, axis=-1) * gain, axis=-1)
    syms = filtered[:, ::sps]
    block = SymbolBlock(syms)
    block.per_pol_power = float(np.mean(block.mean_power_per_pol()))
    return block


# ---------------------------------------------------------------------------
# frequency translation helpers (exact on the bin grid)


def _bin_resolution(grid: Grid) -> float:
    # sample_rate/n_samples == symbol_rate/n_symbols: resolution is sps-independent
    return grid.symbol_rate / grid.n_symbols


def _shift_spectrum(spec: np.ndarray, bins: int) -> np.ndarray:
    """Circularly shift a spectrum by an integer number of bins (+ = up in frequency)."""
    return np.roll(spec, bins, axis=-1)


def resample(signal: DualPolSignal, samples_per_symbol: int) -> DualPolSignal:
    """Exact band-limited resampling to a new samples-per-symbol on the same block."""
    grid = signal.grid
    if samples_per_symbol == grid.samples_per_symbol:
        return signal.copy()
    new_grid = Grid(grid.symbol_rate, samples_per_symbol, grid.n_symbols)
    n_old, n_new = grid.n_samples, new_grid.n_samples
    spec = np.fft.fft(signal.samples, axis=-1)
    out = np.zeros((2, n_new), dtype=np.complex128)
    n_keep = min(n_old, n_new)
    # copy bins (-n_keep/2, +n_keep/2]; the discarded band must be empty for exactness
    hi = n_keep // 2 + 1  # bins 0 .. +n_keep/2
    lo = n_keep - hi      # bins -lo .. -1
    out[:, :hi] = spec[:, :hi]
    if lo:
        out[:, -lo:] = spec[:, -lo:]
    out *= n_new / n_old
    return DualPolSignal(new_grid, np.fft.ifft(out, axis=-1), signal.center_frequency_offset)


def _brick_wall(spec: np.ndarray, n_total: int, keep_half_width_bins: int) -> np.ndarray:
    b = np.abs(wrapped_bins(n_total))
    return np.where(b <= keep_half_width_bins, spec, 0.0)


# ---------------------------------------------------------------------------
# WDM multiplex / demultiplex


def _spacing_bins(spacing: float, grid: Grid) -> int:
    q = int(round(spacing / _bin_resolution(grid)))
    if q <= 0:
        raise ValueError(f"channel spacing {spacing} is below the grid resolution")
    return q


def wdm_mux(
    channels: Sequence[DualPolSignal],
    spacing: float | None,
    composite_sps: int = 8,
) -> DualPolSignal:
    """Frequency-multiplex an odd number of channels, center channel at offset 0.

    Channel k (centered index) lands at k*spacing, with spacing quantized to a
    whole number of frequency bins so the shift is circular-exact.
    """
    n_ch = len(channels)
    if n_ch < 1 or n_ch % 2 == 0:
        raise ValueError(f"need an odd number of channels, got {n_ch}")
    grid0 = channels[0].grid
    for ch in channels[1:]:
        if ch.grid != grid0:
            raise ValueError("all channels must share one grid")
    comp_grid = Grid(grid0.symbol_rate, composite_sps, grid0.n_symbols)
    if n_ch > 1:
        if spacing is None:
            raise ValueError("spacing is required for more than one channel")
        q = _spacing_bins(spacing, comp_grid)
        # channel and composite grids share one bin resolution (Rs/n_symbols),
        # so a channel's content never exceeds its own Nyquist in bins
        max_edge_bins = (n_ch // 2) * q + grid0.n_samples // 2
        if max_edge_bins > comp_grid.n_samples // 2:
            raise ValueError(
                "composite grid too narrow: outer channel would alias "
                f"(edge bin {max_edge_bins} > Nyquist bin {comp_grid.n_samples // 2})"
            )
    else:
        q = 0
    total = np.zeros((2, comp_grid.n_samples), dtype=np.complex128)
    for i, ch in enumerate(channels):
        up = resample(ch, composite_sps)
        offset_bins = (i - n_ch // 2) * q
        total += _shift_spectrum(np.fft.fft(up.samples, axis=-1), offset_bins)
    return DualPolSignal(comp_grid, np.fft.ifft(total, axis=-1))


def wdm_demux(
    composite: DualPolSignal,
    channel_index: int,
    spacing: float | None,
    channel_sps: int = 2,
    n_channels: int | None = None,
) -> DualPolSignal:
    """Extract one channel (centered index: 0 = middle) back to its own grid.

    Shifts by the quantized spacing, brick-wall filters to half the spacing
    (the full band when spacing is None), and downsamples exactly.
    """
    grid = composite.grid
    if n_channels is not None and abs(channel_index) > n_channels // 2:
        raise ValueError(f"channel index {channel_index} outside +-{n_channels // 2}")
    spec = np.fft.fft(composite.samples, axis=-1)
    if channel_index != 0 or spacing is not None:
        if spacing is None:
            raise ValueError("spacing is required to demux an off-center channel")
        q = _spacing_bins(spacing, grid)
        spec = _shift_spectrum(spec, -channel_index * q)
        spec = _brick_wall(spec, grid.n_samples, q // 2)
    shifted = DualPolSignal(grid, np.fft.ifft(spec, axis=-1))
    return resample(shifted, channel_sps)


# ---------------------------------------------------------------------------
# digital subcarriers inside one channel


def subcarrier_offsets_bins(n_symbols: int, n_subcarriers: int, rolloff: float) -> tuple[list[int], int]:
    """Center-frequency offsets (in bins) for each subcarrier, plus their spacing.

    Subcarrier spacing is (1+rolloff)*Rs/n_sc rounded UP to an even bin count:
    offsets stay integers for even subcarrier counts and sub-bands never
    overlap, at the price of at most two bins of extra guard.
    """
    if n_subcarriers < 1:
        raise ValueError("n_subcarriers must be >= 1")
    if n_symbols % n_subcarriers != 0:
        raise ValueError(f"n_symbols={n_symbols} not divisible by n_subcarriers={n_subcarriers}")
    if n_subcarriers == 1:
        return [0], 0
    exact = (1.0 + rolloff) * n_symbols / n_subcarriers  # in bins of Rs/n_symbols
    delta = 2 * int(np.ceil(exact / 2.0))
    offsets = [int(round((i - (n_subcarriers - 1) / 2.0) * delta)) for i in range(n_subcarriers)]
    return offsets, delta


def subcarrier_grid(grid: Grid, n_subcarriers: int) -> Grid:
    return Grid(
        grid.symbol_rate / n_subcarriers,
        grid.samples_per_symbol * n_subcarriers,
        grid.n_symbols // n_subcarriers,
    )


def subcarrier_mux(blocks: Sequence[SymbolBlock], grid: Grid, rolloff: float) -> DualPolSignal:
    """Modulate per-subcarrier symbol streams into one channel waveform.

    Each stream is RRC-shaped at symbol_rate/n_sc and placed on its quantized
    offset. One block reduces to plain nyquist_shape.
    """
    n_sc = len(blocks)
    if n_sc == 1:
        return nyquist_shape(blocks[0], grid, rolloff)
    offsets, delta = subcarrier_offsets_bins(grid.n_symbols, n_sc, rolloff)
    outer_edge = abs(offsets[-1]) + delta // 2
    if outer_edge > grid.n_samples // 2:
        raise ValueError("grid too narrow for the requested subcarrier count")
    sc_grid = subcarrier_grid(grid, n_sc)
    total = np.zeros((2, grid.n_samples), dtype=np.complex128)
    for block, off in zip(blocks, offsets):
        sig = nyquist_shape(block, sc_grid, rolloff)  # same n_samples as the channel grid
        total += _shift_spectrum(np.fft.fft(sig.samples, axis=-1), off)
    return DualPolSignal(grid, np.fft.ifft(total, axis=-1))
