"""Sequence selection: shape the input distribution by keeping the candidate
blocks that pick up the least nonlinear distortion on a surrogate channel.

Candidates are i.i.d. Gaussian dual-pol blocks. Each is scored by a noiseless
single-channel run through the surrogate fiber followed by dispersion
compensation, matched filtering, and least-squares gain alignment; the score
is the residual mean-square error (the NLI power the block would collect).
Keeping a fraction r of candidates costs log2(1/r)/(2*block_len) bits per
symbol per polarization of input entropy, which is reported separately and
subtracted from AIRs measured with the selected ensemble.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .dsp import DbpSpec, cpe_align, dbp, edc
from .fiber import FiberSpec, ssfm_propagate
from .signals import (
    Grid,
    IidGaussian,
    SelectedSequences,
    SymbolBlock,
    draw_symbols,
    matched_filter_downsample,
    nyquist_shape,
)

__all__ = [
    "SelectionSpec",
    "SequenceLibrary",
    "nli_cost",
    "select_sequences",
    "shaping_penalty",
    "save_library",
    "load_library",
]

log = logging.getLogger(__name__)


def shaping_penalty(block_len: int, selection_rate: float) -> float:
    """Input-entropy cost of selection, bits per symbol per polarization."""
    if not 0.0 < selection_rate <= 1.0:
        raise ValueError("selection_rate must be in (0, 1]")
    if block_len < 1:
        raise ValueError("block_len must be positive")
    return np.log2(1.0 / selection_rate) / (2.0 * block_len)


@dataclass(frozen=True)
class SelectionSpec:
    """Surrogate channel and selection parameters for sequence scoring."""

    symbol_rate: float
    fiber: FiberSpec
    power_w: float
    block_len: int = 256
    selection_rate: float = 0.002
    rolloff: float = 0.05
    samples_per_symbol: int = 2
    dbp_spec: DbpSpec | None = None  # None: EDC-terminated cost

    def __post_init__(self) -> None:
        if self.power_w <= 0:
            raise ValueError("power_w must be positive")
        if not 0.0 < self.selection_rate <= 1.0:
            raise ValueError("selection_rate must be in (0, 1]")
        if self.block_len < 2:
            raise ValueError("block_len must be at least 2")

    @property
    def candidates_per_keep(self) -> int:
        return max(1, int(round(1.0 / self.selection_rate)))

    @property
    def penalty_bits(self) -> float:
        return shaping_penalty(self.block_len, self.selection_rate)


def nli_cost(block: SymbolBlock, spec: SelectionSpec) -> float:
    """Residual NLI power (W) a block collects on the surrogate channel."""
    if block.n != spec.block_len:
        raise ValueError(f"block length {block.n} != spec.block_len {spec.block_len}")
    scaled = block.scale_to_power(spec.power_w)
    grid = Grid(spec.symbol_rate, spec.samples_per_symbol, spec.block_len)
    sig = nyquist_shape(scaled, grid, spec.rolloff)
    out, _ = ssfm_propagate(sig, spec.fiber, amp=None)
    if spec.dbp_spec is not None:
        proc = dbp(out, spec.fiber, spec.dbp_spec)
    else:
        proc = edc(out, spec.fiber)
    rx = matched_filter_downsample(proc, spec.rolloff)
    _, h = cpe_align(rx, scaled)
    resid = rx.symbols - h[:, None] * scaled.symbols
    return float(np.mean(np.abs(resid) ** 2))


@dataclass
class SequenceLibrary:
    """Kept blocks (unit power) plus the cost bookkeeping behind the selection."""

    blocks: tuple
    kept_costs: np.ndarray
    population_costs: np.ndarray
    spec: SelectionSpec
    seed: int
    pre_norm_powers: np.ndarray  # (n_keep, 2): per-pol power before renormalization

    def input_law(self) -> SelectedSequences:
        return SelectedSequences(blocks=self.blocks)

    @property
    def penalty_bits(self) -> float:
        return self.spec.penalty_bits

    def stats(self) -> dict:
        pop = self.population_costs
        return {
            "n_candidates": int(len(pop)),
            "n_kept": int(len(self.blocks)),
            "population_mean": float(np.mean(pop)),
            "population_std": float(np.std(pop)),
            "kept_mean": float(np.mean(self.kept_costs)),
            "kept_max": float(np.max(self.kept_costs)),
            "kept_over_population_mean": float(np.mean(self.kept_costs) / np.mean(pop)),
        }


def select_sequences(spec: SelectionSpec, n_keep: int, seed: int = 0) -> SequenceLibrary:
    """Score n_keep/selection_rate i.i.d. Gaussian candidates and keep the cheapest.

    Candidates that blow up numerically are logged and replaced by fresh draws.
    Kept blocks are stored renormalized to unit per-pol power with the applied
    factors recorded.
    """
    if n_keep < 1:
        raise ValueError("n_keep must be positive")
    n_candidates = n_keep * spec.candidates_per_keep
    rng = np.random.default_rng(seed)
    blocks: list[SymbolBlock] = []
    costs: list[float] = []
    attempts = 0
    while len(blocks) < n_candidates:
        attempts += 1
        if attempts > 2 * n_candidates:
            raise RuntimeError("too many failed candidates; check the surrogate spec")
        cand = draw_symbols(IidGaussian(), spec.block_len, rng)
        try:
            costs.append(nli_cost(cand, spec))
        except FloatingPointError as err:
            log.warning("discarding candidate %d: %s", attempts, err)
            continue
        blocks.append(cand)
    cost_arr = np.asarray(costs)
    order = np.argsort(cost_arr, kind="stable")[:n_keep]
    kept = [blocks[i] for i in order]
    pre_norm = np.stack([b.mean_power_per_pol() for b in kept])
    kept_norm = tuple(b.scale_to_power(1.0) for b in kept)
    return SequenceLibrary(
        blocks=kept_norm,
        kept_costs=cost_arr[order],
        population_costs=cost_arr,
        spec=spec,
        seed=seed,
        pre_norm_powers=pre_norm,
    )


# ---------------------------------------------------------------------------
# persistence (NPZ: arrays + one JSON header; complex64-free, lossless)


def _spec_to_dict(spec: SelectionSpec) -> dict:
    d = asdict(spec)
    return d


def _spec_from_dict(d: dict) -> SelectionSpec:
    d = dict(d)
    d["fiber"] = FiberSpec(**d["fiber"])
    if d.get("dbp_spec") is not None:
        d["dbp_spec"] = DbpSpec(**d["dbp_spec"])
    return SelectionSpec(**d)


def save_library(library: SequenceLibrary, path: str) -> None:
    """Write a library to an NPZ file.

    Layout: `symbols` (n_keep, 2, block_len) complex128 unit-power blocks in
    kept (ascending-cost) order; `kept_costs` (n_keep,); `population_costs`
    (n_candidates,); `pre_norm_powers` (n_keep, 2); `header` a JSON string
    with {"version", "seed", "spec"}. float64/complex128 storage keeps the
    roundtrip lossless.
    """
    header = json.dumps({"version": 1, "seed": library.seed, "spec": _spec_to_dict(library.spec)})
    np.savez(
        path,
        symbols=np.stack([b.symbols for b in library.blocks]),
        kept_costs=library.kept_costs,
        population_costs=library.population_costs,
        pre_norm_powers=library.pre_norm_powers,
        header=np.array(header),
    )


def load_library(path: str) -> SequenceLibrary:
    with np.load(path) as data:
        header = json.loads(str(data["header"]))
        if header.get("version") != 1:
            raise ValueError(f"unsupported library version {header.get('version')!r}")
        symbols = data["symbols"]
        return SequenceLibrary(
            blocks=tuple(SymbolBlock(s) for s in symbols),
            kept_costs=data["kept_costs"],
            population_costs=data["population_costs"],
            spec=_spec_from_dict(header["spec"]),
            seed=int(header["seed"]),
            pre_norm_powers=data["pre_norm_powers"],
        )
