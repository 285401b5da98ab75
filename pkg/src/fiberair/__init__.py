"""Achievable information rates over the nonlinear fiber-optic channel.

Dual-polarization split-step simulation (Manakov, ideal distributed
amplification), block-circular pulse shaping and WDM/subcarrier muxing,
mismatched-decoder AIR metrics (memoryless Gaussian and a particle-filter
phase-and-polarization tracker), low-NLI sequence selection, and a
deterministic power-sweep runner.
"""

from .air import (
    AirEstimate,
    AwgnMetric,
    PpnMetric,
    air_gaussian,
    air_ppn,
    linear_capacity,
    tune_ppn_params,
)
from .config import (
    ComboSpec,
    ConfigError,
    ExperimentConfig,
    PpnSettings,
    Scenario,
    SelectionSettings,
    SweepSettings,
    dbm_to_w,
    desk_scale_config,
    full_scale_config,
    load_config,
    w_to_dbm,
)
from .dsp import DbpSpec, cpe_align, dbp, edc, subcarrier_demux
from .experiments import (
    OptimizeResult,
    SweepResult,
    SweepRow,
    emit_csv,
    format_csv,
    optimize_subcarrier_powers,
    parse_csv,
    run_point,
    run_sweep,
)
from .fiber import (
    MANAKOV_FACTOR,
    PS2_PER_KM_TO_S2_PER_KM,
    AmpSpec,
    FiberSpec,
    PropagationRecord,
    alpha_db_to_linear,
    dispersive_step,
    effective_length,
    nonlinear_step,
    ssfm_propagate,
)
from .selection import (
    SelectionSpec,
    SequenceLibrary,
    load_library,
    save_library,
    select_sequences,
    shaping_penalty,
)
from .signals import (
    DualPolSignal,
    Grid,
    IidGaussian,
    MaxwellBoltzmannQam,
    SelectedSequences,
    SymbolBlock,
    draw_symbols,
    matched_filter_downsample,
    nyquist_shape,
    resample,
    subcarrier_mux,
    wdm_demux,
    wdm_mux,
)

__version__ = "0.1.0"
