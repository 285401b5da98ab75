"""Power-sweep experiments: transmit, propagate, receive, score, tabulate.

One "point" is (launch power, technique combo). Every point regenerates its
own symbol and ASE draws from a deterministic seed tree, so a sweep rerun
with the same config reproduces the output CSV byte for byte, regardless of
worker count or execution order.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .air import PpnMetric, air_gaussian, air_ppn, linear_capacity, tune_ppn_params
from .config import (
    LINEAR_REFERENCE_LABEL,
    ComboSpec,
    ConfigError,
    ExperimentConfig,
    dbm_to_w,
)
from .dsp import dbp, edc, subcarrier_demux
from .fiber import ssfm_propagate
from .selection import SelectionSpec, SequenceLibrary, load_library, save_library, select_sequences
from .signals import (
    IidGaussian,
    MaxwellBoltzmannQam,
    draw_symbols,
    resample,
    subcarrier_mux,
    wdm_demux,
    wdm_mux,
)

__all__ = [
    "CSV_HEADER",
    "SweepRow",
    "SweepResult",
    "OptimizeResult",
    "derive_rng",
    "derive_seed",
    "resolve_libraries",
    "selection_spec_for",
    "run_point",
    "run_sweep",
    "optimize_subcarrier_powers",
    "format_csv",
    "emit_csv",
    "parse_csv",
]

CSV_HEADER = "power_dbm,config,air_bits,std_err,snr_eff_db,blocks,seed"

_U32 = 0xFFFFFFFF
# independent seed-stream branches; every consumer of randomness gets its own
DOMAIN_SYMBOLS = 0x51
DOMAIN_ASE = 0x52
DOMAIN_METRIC = 0x53
DOMAIN_TUNE = 0x54
DOMAIN_SELECTION = 0x55


def _branch_key(master_seed: int, parts) -> list[int]:
    return [int(master_seed) & _U32] + [int(p) & _U32 for p in parts]


def derive_rng(master_seed: int, *parts) -> np.random.Generator:
    """Generator for the seed-tree branch (master, *parts)."""
    return np.random.default_rng(np.random.SeedSequence(_branch_key(master_seed, parts)))


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 32-bit integer seed for the branch (master, *parts)."""
    ss = np.random.SeedSequence(_branch_key(master_seed, parts))
    return int(ss.generate_state(1, np.uint32)[0])


def power_key(power_dbm: float) -> int:
    """Launch power as a seed-tree part (milli-dB resolution)."""
    return round(power_dbm * 1000.0) & _U32


@dataclass
class SweepRow:
    power_dbm: float
    config: str
    air_bits: float
    std_err: float
    snr_eff_db: float
    blocks: int
    seed: int
    status: str = "ok"
    runtime_s: float = 0.0
    is_peak: bool = False
    detail: dict = field(default_factory=dict, repr=False, compare=False)

    def csv_line(self) -> str:
        return (
            f"{self.power_dbm:.6g},{self.config},{self.air_bits:.6g},"
            f"{self.std_err:.6g},{self.snr_eff_db:.6g},{self.blocks},{self.seed}"
        )


def _sort_rows(rows) -> list[SweepRow]:
    return sorted(rows, key=lambda r: (r.power_dbm, r.config))


@dataclass
class SweepResult:
    rows: list
    config: ExperimentConfig | None = None
    runtime_s: float = 0.0

    def ok_rows(self) -> list[SweepRow]:
        return [r for r in self.rows if r.status == "ok" and np.isfinite(r.air_bits)]

    def peaks(self) -> dict:
        """Best row per config label (reference series excluded)."""
        best: dict[str, SweepRow] = {}
        for row in self.ok_rows():
            if row.config == LINEAR_REFERENCE_LABEL:
                continue
            if row.config not in best or row.air_bits > best[row.config].air_bits:
                best[row.config] = row
        return best

    def csv_text(self) -> str:
        return format_csv(self.rows)


# ---------------------------------------------------------------------------
# input laws and sequence libraries


def selection_spec_for(cfg: ExperimentConfig) -> SelectionSpec:
    """Surrogate-propagation spec used to score candidate sequences."""
    se, scen = cfg.selection, cfg.scenario
    if se is None:
        raise ConfigError(["config has no selection section"])
    return SelectionSpec(
        symbol_rate=scen.symbol_rate,
        fiber=replace(scen.fiber, step_km=se.surrogate_step_km),
        power_w=dbm_to_w(se.power_dbm),
        block_len=se.block_len,
        selection_rate=se.selection_rate,
        rolloff=se.rolloff if se.rolloff is not None else scen.rolloff,
    )


def _build_or_load_shared(cfg: ExperimentConfig, log=None) -> SequenceLibrary:
    se = cfg.selection
    if se.library and os.path.exists(se.library):
        if log:
            log(f"loading sequence library {se.library}")
        return load_library(se.library)
    spec = selection_spec_for(cfg)
    seed = derive_seed(cfg.sweep.master_seed, DOMAIN_SELECTION)
    if log:
        log(f"selecting {se.n_keep} blocks from "
            f"{se.n_keep * spec.candidates_per_keep} candidates...")
    library = select_sequences(spec, se.n_keep, seed)
    if se.library:
        save_library(library, se.library)
        if log:
            log(f"saved sequence library to {se.library}")
    return library


def resolve_libraries(cfg: ExperimentConfig, log=None) -> dict:
    """Sequence library per combo index, building the shared one at most once."""
    libraries: dict[int, SequenceLibrary] = {}
    shared = None
    for idx, combo in enumerate(cfg.combos):
        if combo.input_type != "selected":
            continue
        if combo.library_path:
            library = load_library(combo.library_path)
        else:
            if shared is None:
                shared = _build_or_load_shared(cfg, log)
            library = shared
        block_len = library.blocks[0].n
        n_per_sc = cfg.sweep.n_symbols // combo.n_subcarriers
        if n_per_sc % block_len != 0:
            raise ConfigError([
                f"combo {combo.label!r}: stream length {n_per_sc} is not a "
                f"multiple of the library block length {block_len}"
            ])
        libraries[idx] = library
    return libraries


def _combo_law(combo: ComboSpec, libraries: dict, idx: int):
    if combo.input_type == "gaussian":
        return IidGaussian()
    if combo.input_type == "mb":
        return MaxwellBoltzmannQam(order=combo.mb_order, lam=combo.mb_lambda)
    return libraries[idx].input_law()


def _sc_powers(power_w: float, combo: ComboSpec) -> list[float]:
    """Per-subcarrier per-pol powers; tilts renormalized so the total stays put."""
    n_sc = combo.n_subcarriers
    if combo.sc_power_tilt_db is None:
        return [power_w / n_sc] * n_sc
    weights = 10.0 ** (np.asarray(combo.sc_power_tilt_db, dtype=float) / 10.0)
    weights = weights / weights.sum()
    return [power_w * float(w) for w in weights]


# ---------------------------------------------------------------------------
# one sweep point


def _run_combo_point(cfg: ExperimentConfig, idx: int, combo: ComboSpec,
                     power_dbm: float, libraries: dict) -> SweepRow:
    scen, sw = cfg.scenario, cfg.sweep
    power_w = dbm_to_w(power_dbm)
    n_sc = combo.n_subcarriers
    n_per_sc = sw.n_symbols // n_sc
    ch_grid = scen.channel_grid(sw.n_symbols)
    law = _combo_law(combo, libraries, idx)
    sc_powers = _sc_powers(power_w, combo)
    master = sw.master_seed
    pkey = power_key(power_dbm)

    tx_streams, rx_streams = [], []
    for block in range(sw.blocks_per_point):
        tx_center = None
        channel_sigs = []
        for ch in range(scen.n_channels):
            rng = derive_rng(master, DOMAIN_SYMBOLS, pkey, idx, block, ch)
            sc_blocks = [draw_symbols(law, n_per_sc, rng).scale_to_power(p)
                         for p in sc_powers]
            channel_sigs.append(subcarrier_mux(sc_blocks, ch_grid, scen.rolloff))
            if ch == scen.n_channels // 2:
                tx_center = sc_blocks
        if scen.n_channels == 1:
            composite = resample(channel_sigs[0], scen.composite_sps)
        else:
            composite = wdm_mux(channel_sigs, scen.channel_spacing, scen.composite_sps)
        rx_comp, _ = ssfm_propagate(
            composite, scen.fiber, scen.amp,
            seed=derive_rng(master, DOMAIN_ASE, pkey, idx, block),
        )
        ch_rx = wdm_demux(
            rx_comp, 0,
            scen.channel_spacing if scen.n_channels > 1 else None,
            scen.channel_sps, scen.n_channels,
        )
        if combo.processing == "dbp":
            proc = dbp(ch_rx, scen.fiber, cfg.dbp)
        else:
            proc = edc(ch_rx, scen.fiber)
        rx_blocks = subcarrier_demux(proc, n_sc, scen.rolloff)
        tx_streams.extend(b.guard_trimmed(sw.guard_symbols) for b in tx_center)
        rx_streams.extend(b.guard_trimmed(sw.guard_symbols) for b in rx_blocks)

    detail: dict = {}
    if combo.metric == "awgn":
        est = air_gaussian(tx_streams, rx_streams,
                           seed=derive_seed(master, DOMAIN_METRIC, pkey, idx))
        snr_eff_db = est.info["snr_eff_db"]
        blocks_used = sw.blocks_per_point
    else:
        ppn = combo.ppn
        base = PpnMetric(
            n_particles=ppn.n_particles,
            phase_step_var=ppn.phase_step_var,
            pol_step_var=ppn.pol_step_var,
            n_subcarriers=n_sc,
            noise_scale=ppn.noise_scale,
            resample_threshold=ppn.resample_threshold,
        )
        n_cal = ppn.cal_blocks * n_sc if ppn.tune else 0
        metric = base
        if ppn.tune:
            metric = tune_ppn_params(
                tx_streams[:n_cal], rx_streams[:n_cal], base, grid=ppn.tune_grid,
                seed=derive_seed(master, DOMAIN_TUNE, pkey, idx),
            )
            detail["tuned"] = {
                "phase_step_var": metric.phase_step_var,
                "pol_step_var": metric.pol_step_var,
                "noise_scale": metric.noise_scale,
            }
        est = air_ppn(tx_streams[n_cal:], rx_streams[n_cal:], metric,
                      seed=derive_seed(master, DOMAIN_METRIC, pkey, idx))
        gaussian_fit = air_gaussian(tx_streams[n_cal:], rx_streams[n_cal:],
                                    seed=derive_seed(master, DOMAIN_METRIC, pkey, idx, 1))
        snr_eff_db = gaussian_fit.info["snr_eff_db"]
        blocks_used = sw.blocks_per_point - (ppn.cal_blocks if ppn.tune else 0)
        detail["degenerate_step_fraction"] = est.info["degenerate_step_fraction"]
        detail["persistent_degeneracy"] = est.info["persistent_degeneracy"]

    air = est.air
    if combo.input_type == "selected":
        # informational AIR pays for the restricted input set
        air = max(0.0, air - libraries[idx].penalty_bits)
        detail["shaping_penalty_bits"] = libraries[idx].penalty_bits
    detail["n_symbols_used"] = est.n_symbols_used
    return SweepRow(
        power_dbm=power_dbm,
        config=combo.label,
        air_bits=air,
        std_err=est.std_err,
        snr_eff_db=float(snr_eff_db),
        blocks=blocks_used,
        seed=master,
        detail=detail,
    )


def run_point(cfg: ExperimentConfig, power_dbm: float, libraries: dict | None = None,
              log=None) -> list[SweepRow]:
    """All combo rows at one launch power; failures become status='failed' rows."""
    cfg.validate()
    if libraries is None:
        libraries = resolve_libraries(cfg, log)
    rows = []
    for idx, combo in enumerate(cfg.combos):
        start = time.perf_counter()
        try:
            row = _run_combo_point(cfg, idx, combo, power_dbm, libraries)
        except Exception as err:  # contain: one bad combo must not sink the sweep
            row = SweepRow(power_dbm, combo.label, float("nan"), float("nan"),
                           float("nan"), 0, cfg.sweep.master_seed,
                           status=f"failed: {err}")
        row.runtime_s = time.perf_counter() - start
        rows.append(row)
        if log:
            if row.status == "ok":
                log(f"[{power_dbm:+.1f} dBm] {combo.label}: "
                    f"{row.air_bits:.4f} +- {row.std_err:.4f} bits "
                    f"({row.runtime_s:.1f} s)")
            else:
                log(f"[{power_dbm:+.1f} dBm] {combo.label}: {row.status}")
    return rows


def _linear_reference_rows(cfg: ExperimentConfig) -> list[SweepRow]:
    rows = []
    for p in cfg.sweep.powers_dbm:
        snr = cfg.scenario.analytic_snr(dbm_to_w(p))
        rows.append(SweepRow(
            power_dbm=p,
            config=LINEAR_REFERENCE_LABEL,
            air_bits=linear_capacity(snr),
            std_err=0.0,
            snr_eff_db=float(10.0 * np.log10(snr)) if np.isfinite(snr) else float("inf"),
            blocks=0,
            seed=cfg.sweep.master_seed,
        ))
    return rows


def _point_worker(args):
    cfg, power_dbm, libraries = args
    try:
        return run_point(cfg, power_dbm, libraries)
    except Exception as err:
        return [SweepRow(power_dbm, c.label, float("nan"), float("nan"), float("nan"),
                         0, cfg.sweep.master_seed, status=f"failed: {err}")
                for c in cfg.combos]


def run_sweep(cfg: ExperimentConfig, workers: int | None = None, log=None) -> SweepResult:
    """Full power sweep. workers > 1 fans points out over processes
    (default from FIBERAIR_WORKERS); the result is identical either way."""
    cfg.validate()
    start = time.perf_counter()
    libraries = resolve_libraries(cfg, log)
    if workers is None:
        workers = int(os.environ.get("FIBERAIR_WORKERS", "1") or "1")
    powers = list(cfg.sweep.powers_dbm)
    rows: list[SweepRow] = []
    if workers > 1 and len(powers) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(powers))) as pool:
            for point_rows in pool.map(_point_worker,
                                       [(cfg, p, libraries) for p in powers]):
                rows.extend(point_rows)
                if log:
                    for row in point_rows:
                        log(f"[{row.power_dbm:+.1f} dBm] {row.config}: "
                            f"{row.air_bits:.4f} bits [{row.status}]")
    else:
        for p in powers:
            rows.extend(run_point(cfg, p, libraries, log))
    if cfg.sweep.include_linear_reference:
        rows.extend(_linear_reference_rows(cfg))
    rows = _sort_rows(rows)
    _mark_peaks(rows)
    return SweepResult(rows=rows, config=cfg, runtime_s=time.perf_counter() - start)


def _mark_peaks(rows) -> None:
    best: dict[str, SweepRow] = {}
    for row in rows:
        if row.config == LINEAR_REFERENCE_LABEL or row.status != "ok":
            continue
        if not np.isfinite(row.air_bits):
            continue
        if row.config not in best or row.air_bits > best[row.config].air_bits:
            best[row.config] = row
    for row in best.values():
        row.is_peak = True


# ---------------------------------------------------------------------------
# CSV


def format_csv(rows_or_result) -> str:
    rows = rows_or_result.rows if isinstance(rows_or_result, SweepResult) else list(rows_or_result)
    lines = [CSV_HEADER]
    lines.extend(row.csv_line() for row in _sort_rows(rows))
    return "\n".join(lines) + "\n"


def emit_csv(rows_or_result, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_csv(rows_or_result))


def parse_csv(path: str) -> list[SweepRow]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise ValueError(f"malformed CSV row {line!r}")
            air = float(parts[2])
            rows.append(SweepRow(
                power_dbm=float(parts[0]), config=parts[1], air_bits=air,
                std_err=float(parts[3]), snr_eff_db=float(parts[4]),
                blocks=int(parts[5]), seed=int(parts[6]),
                status="ok" if np.isfinite(air) else "failed",
            ))
    return rows


# ---------------------------------------------------------------------------
# per-subcarrier power allocation


@dataclass
class OptimizeResult:
    combo_label: str
    power_dbm: float
    tilts_db: tuple
    best: SweepRow
    uniform: SweepRow
    evaluations: list

    @property
    def gain_bits(self) -> float:
        return self.best.air_bits - self.uniform.air_bits


def _ring_groups(n_sc: int) -> list[tuple]:
    """Subcarrier indices grouped by distance from band center, innermost first.

    The spectrum is symmetric under the channel statistics, so tilts are
    searched per ring, not per subcarrier."""
    groups = [(k, n_sc - 1 - k) for k in range(n_sc // 2)]
    if n_sc % 2:
        groups.append((n_sc // 2,))
    return groups[::-1]


def _tilts_from_rings(groups, ring_tilts, n_sc: int) -> tuple:
    tilts = [0.0] * n_sc
    for group, tilt in zip(groups, ring_tilts):
        for i in group:
            tilts[i] = tilt
    return tuple(tilts)


def optimize_subcarrier_powers(
    cfg: ExperimentConfig,
    combo_label: str | None = None,
    power_dbm: float | None = None,
    tilt_grid_db=None,
    opt_blocks: int = 4,
    max_rounds: int = 2,
    log=None,
) -> OptimizeResult:
    """Search ring-symmetric per-subcarrier power tilts (total power fixed).

    Coordinate descent over the outer rings (the innermost ring is the 0 dB
    reference) on a reduced block count, then a full-size evaluation of the
    winner against the uniform allocation. Same seed tree as run_sweep, so
    candidate tilts see identical symbol and noise draws.
    """
    cfg.validate()
    if combo_label is None:
        candidates = [c for c in cfg.combos if c.n_subcarriers > 1]
        if not candidates:
            raise ConfigError(["no multi-subcarrier combo to optimize"])
        combo = candidates[0]
    else:
        matches = [c for c in cfg.combos if c.label == combo_label]
        if not matches:
            raise ConfigError([f"no combo labeled {combo_label!r}"])
        combo = matches[0]
        if combo.n_subcarriers < 2:
            raise ConfigError([f"combo {combo.label!r} has a single subcarrier"])
    n_sc = combo.n_subcarriers
    if power_dbm is None:
        ordered = sorted(cfg.sweep.powers_dbm)
        power_dbm = ordered[len(ordered) // 2]
    grid = tuple(float(t) for t in tilt_grid_db) if tilt_grid_db else \
        (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)

    combo_idx = cfg.combos.index(combo)
    libraries_full = resolve_libraries(cfg, log)
    libraries = {0: libraries_full[combo_idx]} if combo_idx in libraries_full else {}
    if combo.metric == "ppn" and combo.ppn.tune:
        opt_blocks = max(opt_blocks, combo.ppn.cal_blocks + 1)

    cache: dict = {}

    def evaluate(ring_tilts, blocks) -> SweepRow:
        tilts = _tilts_from_rings(groups, ring_tilts, n_sc)
        key = (tilts, blocks)
        if key not in cache:
            eval_cfg = replace(
                cfg,
                combos=(replace(combo, sc_power_tilt_db=tilts),),
                sweep=replace(cfg.sweep, blocks_per_point=blocks,
                              powers_dbm=(power_dbm,),
                              include_linear_reference=False),
            )
            row = run_point(eval_cfg, power_dbm, libraries)[0]
            if row.status != "ok":
                raise RuntimeError(f"tilt evaluation failed: {row.status}")
            if log:
                log(f"tilt {tilts} dB ({blocks} blocks): "
                    f"{row.air_bits:.4f} +- {row.std_err:.4f} bits")
            cache[key] = row
        return cache[key]

    groups = _ring_groups(n_sc)
    ring_tilts = [0.0] * len(groups)
    evaluations = []
    for _ in range(max_rounds):
        changed = False
        for ring in range(1, len(groups)):
            best_row = None
            best_val = ring_tilts[ring]
            for tilt in grid:
                trial = list(ring_tilts)
                trial[ring] = tilt
                row = evaluate(trial, opt_blocks)
                evaluations.append((_tilts_from_rings(groups, trial, n_sc),
                                    row.air_bits, row.std_err))
                if best_row is None or row.air_bits > best_row.air_bits:
                    best_row, best_val = row, tilt
            if best_val != ring_tilts[ring]:
                ring_tilts[ring] = best_val
                changed = True
        if not changed:
            break

    final_tilts = _tilts_from_rings(groups, ring_tilts, n_sc)
    best = evaluate(ring_tilts, cfg.sweep.blocks_per_point)
    uniform = evaluate([0.0] * len(groups), cfg.sweep.blocks_per_point)
    return OptimizeResult(
        combo_label=combo.label,
        power_dbm=power_dbm,
        tilts_db=final_tilts,
        best=best,
        uniform=uniform,
        evaluations=evaluations,
    )
