"""Experiment configuration: scenario, technique combos, sweep settings.

JSON layout (all keys optional unless noted):

{
  "scenario": {
    "n_channels": 3,                  // odd
    "symbol_rate_hz": 10e9,           // required
    "channel_spacing_hz": 11e9,       // >= symbol_rate*(1+rolloff); required if n_channels > 1
    "rolloff": 0.05,
    "channel_sps": 2,
    "composite_sps": 8,
    "fiber": {"length_km": 200, "beta2_ps2_km": -21.7, "gamma_per_w_km": 1.27,
               "alpha_db_per_km": 0.0, "step_km": 0.1},
    "amp":   {"nsp": 1.0, "ase_alpha_db_per_km": 0.2, "center_frequency_hz": 193.41e12}
  },
  "sweep": {
    "powers_dbm": [-14, -12, -10],    // per channel per polarization; required
    "blocks_per_point": 16,
    "n_symbols": 4096,
    "master_seed": 1,
    "guard_symbols": 4,
    "include_linear_reference": true
  },
  "combos": [                          // required, >= 1 entry
    {"label": "benchmark",            // unique, no commas
     "input": "gaussian",             // or {"type":"mb","order":64,"lambda":0.1}
                                       // or "selected" / {"type":"selected","library":"lib.npz"}
     "processing": "edc",             // or "dbp"
     "metric": "awgn",                // or "ppn"
     "n_subcarriers": 1,
     "sc_power_tilt_db": null,        // per-subcarrier dB offsets (normalized to fixed total)
     "ppn": {"n_particles": 64, "tune": true, "cal_blocks": 1,
              "phase_step_var": 1e-4, "pol_step_var": 0.0, "noise_scale": 1.0,
              "tune_grid": null}}      // null: built-in grid
  ],
  "selection": {                       // needed when any combo input is "selected" without a library
    "n_keep": 32, "power_dbm": -6.0, "block_len": 256, "selection_rate": 0.002,
    "surrogate_step_km": 2.0, "rolloff": null,   // null: scenario rolloff
    "library": null                    // path to a prebuilt NPZ library
  },
  "dbp": {"step_km": null, "gamma_scale": 1.0},  // null step: mirror the forward grid
  "output_csv": "sweep.csv"
}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .dsp import DbpSpec
from .fiber import DEFAULT_CENTER_FREQUENCY, AmpSpec, FiberSpec
from .signals import Grid

__all__ = [
    "ConfigError",
    "Scenario",
    "PpnSettings",
    "ComboSpec",
    "SweepSettings",
    "SelectionSettings",
    "ExperimentConfig",
    "dbm_to_w",
    "w_to_dbm",
    "load_config",
    "desk_scale_config",
    "full_scale_config",
]

LINEAR_REFERENCE_LABEL = "linear-capacity"


class ConfigError(ValueError):
    """Invalid experiment configuration; .errors lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors) if isinstance(errors, (list, tuple)) else [errors]
        super().__init__("; ".join(self.errors))


def dbm_to_w(dbm: float) -> float:
    return 1e-3 * 10.0 ** (dbm / 10.0)


def w_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError("power must be positive")
    return 10.0 * np.log10(watts / 1e-3)


@dataclass(frozen=True)
class Scenario:
    symbol_rate: float
    n_channels: int = 1
    channel_spacing: float | None = None
    rolloff: float = 0.05
    channel_sps: int = 2
    composite_sps: int = 8
    fiber: FiberSpec = field(default_factory=lambda: FiberSpec(length_km=1000.0))
    amp: AmpSpec | None = field(default_factory=AmpSpec)

    def channel_grid(self, n_symbols: int) -> Grid:
        return Grid(self.symbol_rate, self.channel_sps, n_symbols)

    def ase_psd(self) -> float:
        """Accumulated ASE PSD per polarization at the receiver, W/Hz."""
        if self.amp is None:
            return 0.0
        return self.amp.noise_psd(self.fiber.length_km)

    def analytic_snr(self, power_w_per_pol: float) -> float:
        """Matched-filter SNR with ASE as the only impairment."""
        psd = self.ase_psd()
        if psd == 0.0:
            return np.inf
        return power_w_per_pol / (psd * self.symbol_rate)


@dataclass(frozen=True)
class PpnSettings:
    n_particles: int = 64
    tune: bool = True
    cal_blocks: int = 1
    phase_step_var: float = 1e-4
    pol_step_var: float = 0.0
    noise_scale: float = 1.0
    tune_grid: dict | None = None
    resample_threshold: float = 0.5


@dataclass(frozen=True)
class ComboSpec:
    label: str
    input_type: str = "gaussian"  # gaussian | mb | selected
    mb_order: int = 64
    mb_lambda: float = 0.1
    library_path: str | None = None
    processing: str = "edc"  # edc | dbp
    metric: str = "awgn"  # awgn | ppn
    n_subcarriers: int = 1
    sc_power_tilt_db: tuple | None = None
    ppn: PpnSettings = field(default_factory=PpnSettings)


@dataclass(frozen=True)
class SweepSettings:
    powers_dbm: tuple
    blocks_per_point: int = 16
    n_symbols: int = 4096
    master_seed: int = 1
    guard_symbols: int = 4
    include_linear_reference: bool = True


@dataclass(frozen=True)
class SelectionSettings:
    n_keep: int = 32
    power_dbm: float = -6.0
    block_len: int = 256
    selection_rate: float = 0.002
    surrogate_step_km: float = 2.0
    rolloff: float | None = None
    library: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario
    sweep: SweepSettings
    combos: tuple
    selection: SelectionSettings | None = None
    dbp: DbpSpec = field(default_factory=DbpSpec)
    output_csv: str = "sweep.csv"

    def validate(self) -> None:
        errors = []
        sc = self.scenario
        if sc.symbol_rate <= 0:
            errors.append("scenario.symbol_rate_hz must be positive")
        if sc.n_channels < 1 or sc.n_channels % 2 == 0:
            errors.append(f"scenario.n_channels must be odd and positive, got {sc.n_channels}")
        if not 0.0 <= sc.rolloff < 1.0:
            errors.append(f"scenario.rolloff must be in [0, 1), got {sc.rolloff}")
        if sc.channel_sps < 2:
            errors.append("scenario.channel_sps must be >= 2")
        if sc.composite_sps < sc.channel_sps:
            errors.append("scenario.composite_sps must be >= channel_sps")
        if sc.n_channels > 1:
            if sc.channel_spacing is None:
                errors.append("scenario.channel_spacing_hz is required for multiple channels")
            else:
                min_spacing = sc.symbol_rate * (1.0 + sc.rolloff)
                if sc.channel_spacing < min_spacing:
                    errors.append(
                        f"scenario.channel_spacing_hz {sc.channel_spacing:g} aliases neighboring "
                        f"channels: need >= symbol_rate*(1+rolloff) = {min_spacing:g}"
                    )
                else:
                    # outermost occupied frequency, plus a 5% guard for
                    # nonlinear spectral broadening during propagation
                    edge = ((sc.n_channels // 2) * sc.channel_spacing
                            + sc.symbol_rate * (1.0 + sc.rolloff) / 2.0)
                    nyquist = sc.symbol_rate * sc.composite_sps / 2.0
                    if edge > 0.95 * nyquist:
                        errors.append(
                            f"composite grid too narrow: outer channel band edge {edge:g} Hz "
                            f"exceeds 95% of Nyquist {nyquist:g} Hz; raise composite_sps"
                        )
        if sc.fiber.step_km > sc.fiber.length_km > 0:
            errors.append("fiber.step_km exceeds fiber.length_km")

        sw = self.sweep
        if len(sw.powers_dbm) == 0:
            errors.append("sweep.powers_dbm must not be empty")
        if sw.blocks_per_point < 1:
            errors.append("sweep.blocks_per_point must be >= 1")
        if sw.n_symbols < 16:
            errors.append("sweep.n_symbols must be >= 16")
        if sw.guard_symbols < 0:
            errors.append("sweep.guard_symbols must be >= 0")

        if not self.combos:
            errors.append("combos must contain at least one entry")
        labels = [c.label for c in self.combos]
        if len(set(labels)) != len(labels):
            errors.append("combo labels must be unique")
        for combo in self.combos:
            where = f"combo {combo.label!r}"
            if not combo.label or "," in combo.label or "\n" in combo.label:
                errors.append(f"{where}: label must be non-empty and comma/newline-free")
            if combo.label == LINEAR_REFERENCE_LABEL:
                errors.append(f"{where}: label collides with the reserved reference series")
            if combo.input_type not in ("gaussian", "mb", "selected"):
                errors.append(f"{where}: unknown input {combo.input_type!r}")
            if combo.processing not in ("edc", "dbp"):
                errors.append(f"{where}: unknown processing {combo.processing!r}")
            if combo.metric not in ("awgn", "ppn"):
                errors.append(f"{where}: unknown metric {combo.metric!r}")
            if combo.input_type == "mb" and combo.mb_order not in (16, 64, 256):
                errors.append(f"{where}: mb order must be 16, 64 or 256")
            n_sc = combo.n_subcarriers
            if n_sc < 1:
                errors.append(f"{where}: n_subcarriers must be >= 1")
            elif sw.n_symbols % n_sc != 0:
                errors.append(f"{where}: n_symbols {sw.n_symbols} not divisible by {n_sc} subcarriers")
            elif sw.n_symbols // n_sc <= 2 * sw.guard_symbols:
                errors.append(f"{where}: guard_symbols leave no symbols per subcarrier stream")
            if combo.sc_power_tilt_db is not None and len(combo.sc_power_tilt_db) != n_sc:
                errors.append(f"{where}: sc_power_tilt_db needs {n_sc} entries")
            if combo.metric == "ppn":
                if combo.ppn.n_particles < 2:
                    errors.append(f"{where}: ppn.n_particles must be >= 2")
                if combo.ppn.tune and not 1 <= combo.ppn.cal_blocks < sw.blocks_per_point:
                    errors.append(
                        f"{where}: ppn.cal_blocks must be in [1, blocks_per_point) when tuning"
                    )
            if combo.input_type == "selected":
                if combo.library_path is None and self.selection is None:
                    errors.append(f"{where}: selected input needs a library path or a selection section")
                block_len = self.selection.block_len if self.selection else None
                if combo.library_path is None and block_len and (sw.n_symbols // n_sc) % block_len != 0:
                    errors.append(
                        f"{where}: per-stream length {sw.n_symbols // n_sc} not a multiple of "
                        f"selection block_len {block_len}"
                    )
        if self.selection is not None:
            se = self.selection
            if se.n_keep < 1:
                errors.append("selection.n_keep must be >= 1")
            if not 0.0 < se.selection_rate <= 1.0:
                errors.append("selection.selection_rate must be in (0, 1]")
            if se.block_len < 2:
                errors.append("selection.block_len must be >= 2")
            if se.surrogate_step_km <= 0:
                errors.append("selection.surrogate_step_km must be positive")
        if errors:
            raise ConfigError(errors)


# ---------------------------------------------------------------------------
# JSON parsing (strict: unknown keys are errors)


def _check_keys(section: dict, allowed: set, where: str, errors: list) -> None:
    unknown = set(section) - allowed
    if unknown:
        errors.append(f"{where}: unknown keys {sorted(unknown)}")


def _parse_input(value, errors: list, where: str) -> dict:
    out = {"input_type": "gaussian", "mb_order": 64, "mb_lambda": 0.1, "library_path": None}
    if value is None:
        return out
    if isinstance(value, str):
        kind, extra = value, {}
    elif isinstance(value, dict):
        kind = value.get("type", "gaussian")
        extra = {k: v for k, v in value.items() if k != "type"}
    else:
        errors.append(f"{where}: input must be a string or object")
        return out
    if kind == "gaussian":
        _check_keys(extra, set(), f"{where}.input", errors)
    elif kind == "mb":
        _check_keys(extra, {"order", "lambda"}, f"{where}.input", errors)
        out["mb_order"] = int(extra.get("order", 64))
        out["mb_lambda"] = float(extra.get("lambda", 0.1))
    elif kind == "selected":
        _check_keys(extra, {"library"}, f"{where}.input", errors)
        out["library_path"] = extra.get("library")
    else:
        errors.append(f"{where}: unknown input type {kind!r}")
    out["input_type"] = kind if kind in ("gaussian", "mb", "selected") else "gaussian"
    return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    errors: list[str] = []
    _check_keys(raw, {"scenario", "sweep", "combos", "selection", "dbp", "output_csv"}, "config", errors)

    sc_raw = raw.get("scenario", {})
    _check_keys(
        sc_raw,
        {"n_channels", "symbol_rate_hz", "channel_spacing_hz", "rolloff",
         "channel_sps", "composite_sps", "fiber", "amp"},
        "scenario", errors,
    )
    fiber_raw = sc_raw.get("fiber", {})
    _check_keys(
        fiber_raw,
        {"length_km", "beta2_ps2_km", "gamma_per_w_km", "alpha_db_per_km", "step_km"},
        "scenario.fiber", errors,
    )
    amp_raw = sc_raw.get("amp", {})
    _check_keys(amp_raw, {"nsp", "ase_alpha_db_per_km", "center_frequency_hz"}, "scenario.amp", errors)
    if "symbol_rate_hz" not in sc_raw:
        errors.append("scenario.symbol_rate_hz is required")
    if errors:
        raise ConfigError(errors)
    try:
        fiber = FiberSpec(
            length_km=float(fiber_raw.get("length_km", 1000.0)),
            beta2_ps2_km=float(fiber_raw.get("beta2_ps2_km", -21.7)),
            gamma_per_w_km=float(fiber_raw.get("gamma_per_w_km", 1.27)),
            alpha_db_per_km=float(fiber_raw.get("alpha_db_per_km", 0.0)),
            step_km=float(fiber_raw.get("step_km", 0.1)),
        )
        amp = AmpSpec.from_alpha_db(
            float(amp_raw.get("ase_alpha_db_per_km", 0.2)),
            nsp=float(amp_raw.get("nsp", 1.0)),
            center_frequency=float(amp_raw.get("center_frequency_hz", DEFAULT_CENTER_FREQUENCY)),
        )
        scenario = Scenario(
            symbol_rate=float(sc_raw["symbol_rate_hz"]),
            n_channels=int(sc_raw.get("n_channels", 1)),
            channel_spacing=(float(sc_raw["channel_spacing_hz"])
                             if "channel_spacing_hz" in sc_raw else None),
            rolloff=float(sc_raw.get("rolloff", 0.05)),
            channel_sps=int(sc_raw.get("channel_sps", 2)),
            composite_sps=int(sc_raw.get("composite_sps", 8)),
            fiber=fiber,
            amp=amp,
        )
    except (ValueError, TypeError) as err:
        raise ConfigError([f"scenario: {err}"]) from err

    sw_raw = raw.get("sweep", {})
    _check_keys(
        sw_raw,
        {"powers_dbm", "blocks_per_point", "n_symbols", "master_seed",
         "guard_symbols", "include_linear_reference"},
        "sweep", errors,
    )
    if "powers_dbm" not in sw_raw:
        errors.append("sweep.powers_dbm is required")
    if errors:
        raise ConfigError(errors)
    sweep = SweepSettings(
        powers_dbm=tuple(float(p) for p in sw_raw["powers_dbm"]),
        blocks_per_point=int(sw_raw.get("blocks_per_point", 16)),
        n_symbols=int(sw_raw.get("n_symbols", 4096)),
        master_seed=int(sw_raw.get("master_seed", 1)),
        guard_symbols=int(sw_raw.get("guard_symbols", 4)),
        include_linear_reference=bool(sw_raw.get("include_linear_reference", True)),
    )

    combos = []
    for i, combo_raw in enumerate(raw.get("combos", [])):
        where = f"combos[{i}]"
        _check_keys(
            combo_raw,
            {"label", "input", "processing", "metric", "n_subcarriers", "sc_power_tilt_db", "ppn"},
            where, errors,
        )
        ppn_raw = combo_raw.get("ppn", {})
        _check_keys(
            ppn_raw,
            {"n_particles", "tune", "cal_blocks", "phase_step_var", "pol_step_var",
             "noise_scale", "tune_grid", "resample_threshold"},
            f"{where}.ppn", errors,
        )
        input_fields = _parse_input(combo_raw.get("input"), errors, where)
        tune_grid = ppn_raw.get("tune_grid")
        ppn = PpnSettings(
            n_particles=int(ppn_raw.get("n_particles", 64)),
            tune=bool(ppn_raw.get("tune", True)),
            cal_blocks=int(ppn_raw.get("cal_blocks", 1)),
            phase_step_var=float(ppn_raw.get("phase_step_var", 1e-4)),
            pol_step_var=float(ppn_raw.get("pol_step_var", 0.0)),
            noise_scale=float(ppn_raw.get("noise_scale", 1.0)),
            tune_grid={k: tuple(v) for k, v in tune_grid.items()} if tune_grid else None,
            resample_threshold=float(ppn_raw.get("resample_threshold", 0.5)),
        )
        tilt = combo_raw.get("sc_power_tilt_db")
        combos.append(ComboSpec(
            label=str(combo_raw.get("label", f"combo{i}")),
            processing=str(combo_raw.get("processing", "edc")),
            metric=str(combo_raw.get("metric", "awgn")),
            n_subcarriers=int(combo_raw.get("n_subcarriers", 1)),
            sc_power_tilt_db=tuple(float(t) for t in tilt) if tilt is not None else None,
            ppn=ppn,
            **input_fields,
        ))

    selection = None
    if "selection" in raw:
        se_raw = raw["selection"]
        _check_keys(
            se_raw,
            {"n_keep", "power_dbm", "block_len", "selection_rate",
             "surrogate_step_km", "rolloff", "library"},
            "selection", errors,
        )
        selection = SelectionSettings(
            n_keep=int(se_raw.get("n_keep", 32)),
            power_dbm=float(se_raw.get("power_dbm", -6.0)),
            block_len=int(se_raw.get("block_len", 256)),
            selection_rate=float(se_raw.get("selection_rate", 0.002)),
            surrogate_step_km=float(se_raw.get("surrogate_step_km", 2.0)),
            rolloff=(float(se_raw["rolloff"]) if se_raw.get("rolloff") is not None else None),
            library=se_raw.get("library"),
        )

    dbp_raw = raw.get("dbp", {})
    _check_keys(dbp_raw, {"step_km", "gamma_scale"}, "dbp", errors)
    if errors:
        raise ConfigError(errors)
    dbp_spec = DbpSpec(
        step_km=(float(dbp_raw["step_km"]) if dbp_raw.get("step_km") is not None else None),
        gamma_scale=float(dbp_raw.get("gamma_scale", 1.0)),
    )

    cfg = ExperimentConfig(
        scenario=scenario,
        sweep=sweep,
        combos=tuple(combos),
        selection=selection,
        dbp=dbp_spec,
        output_csv=str(raw.get("output_csv", "sweep.csv")),
    )
    cfg.validate()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError([f"cannot read {path}: {err}"]) from err
    except json.JSONDecodeError as err:
        raise ConfigError([f"{path} is not valid JSON: {err}"]) from err
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a JSON object"])
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# named profiles


def _standard_combos() -> tuple:
    ppn4 = PpnSettings(n_particles=64, tune=True, cal_blocks=1)
    return (
        ComboSpec(label="benchmark"),
        ComboSpec(label="ss", input_type="selected"),
        ComboSpec(label="dbp", processing="dbp"),
        ComboSpec(label="ss+dbp", input_type="selected", processing="dbp"),
        ComboSpec(label="ppn4+dbp", processing="dbp", metric="ppn", n_subcarriers=4, ppn=ppn4),
        ComboSpec(label="ss+ppn4+dbp", input_type="selected", processing="dbp",
                  metric="ppn", n_subcarriers=4, ppn=ppn4),
    )


def desk_scale_config(output_csv: str = "desk_sweep.csv", master_seed: int = 20250811) -> ExperimentConfig:
    """Minutes-scale profile: 3 x 10 GBd channels over 200 km.

    Channels sit on a 50 GHz grid rather than near-Nyquist packing: over
    200 km the inter-channel walk-off at 50 GHz spans ~85 symbols of a
    2.5 GBd subcarrier, so the cross-channel phase ripple is a slowly
    varying process a per-subcarrier tracker can follow.  At denser
    spacings the walk-off per symbol collapses and the same ripple looks
    white.  composite_sps 12 puts the outer band edge (55.25 GHz) under
    the 60 GHz composite Nyquist with guard to spare.
    """
    scenario = Scenario(
        symbol_rate=10e9,
        n_channels=3,
        channel_spacing=50e9,
        rolloff=0.05,
        channel_sps=2,
        composite_sps=12,
        fiber=FiberSpec(length_km=200.0, step_km=0.5),
        amp=AmpSpec(),
    )
    sweep = SweepSettings(
        powers_dbm=(-17.0, -15.0, -13.0, -11.0, -9.0),
        blocks_per_point=16,
        n_symbols=4096,
        master_seed=master_seed,
    )
    selection = SelectionSettings(n_keep=32, power_dbm=-5.0, surrogate_step_km=2.0)
    return ExperimentConfig(
        scenario=scenario,
        sweep=sweep,
        combos=_standard_combos(),
        selection=selection,
        output_csv=output_csv,
    )


def full_scale_config(output_csv: str = "full_sweep.csv", master_seed: int = 20250812) -> ExperimentConfig:
    """Hours-scale profile: 5 x 50 GBd channels over 1000 km, 0.1 km truth step.

    Spacing is 1.1x the symbol rate (55 GHz): the aliasing validation requires
    spacing >= symbol_rate*(1+rolloff).  Alongside the standard chains this
    profile also runs phase tracking on the plain dispersion-compensated
    receiver ("ppn4"), to separate the tracker's contribution from DBP's.
    """
    scenario = Scenario(
        symbol_rate=50e9,
        n_channels=5,
        channel_spacing=55e9,
        rolloff=0.05,
        channel_sps=2,
        composite_sps=8,
        fiber=FiberSpec(length_km=1000.0, step_km=0.1),
        amp=AmpSpec(),
    )
    sweep = SweepSettings(
        powers_dbm=(-15.0, -13.0, -11.0, -9.0, -7.0),
        blocks_per_point=16,
        n_symbols=4096,
        master_seed=master_seed,
    )
    selection = SelectionSettings(n_keep=32, power_dbm=-11.0, surrogate_step_km=1.0)
    combos = list(_standard_combos())
    combos.insert(3, ComboSpec(label="ppn4", metric="ppn", n_subcarriers=4,
                               ppn=PpnSettings(n_particles=64, tune=True, cal_blocks=1)))
    return ExperimentConfig(
        scenario=scenario,
        sweep=sweep,
        combos=tuple(combos),
        selection=selection,
        output_csv=output_csv,
    )
