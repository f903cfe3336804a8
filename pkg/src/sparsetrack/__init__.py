"""Tracking dynamic sparse channels with differential OMP (D-OMP)."""

__version__ = "0.1.0"

from .analysis import (
    SnrSetting,
    min_detectable_gain,
    p_detect_persistent,
    sigma_n_for_snr,
    snr_of,
    threshold_from_snr,
)
from .bench import (
    ConfigError,
    ExperimentConfig,
    RunResult,
    compute_mse,
    detect_prob_experiment,
    emit_results,
    load_config,
    run_experiment,
    support_metrics,
)
from .channel import (
    ChannelEvent,
    ChannelState,
    EventError,
    ModelParams,
    ParameterError,
    apply_event,
    assemble_h,
    init_state,
    simulate,
    step_state,
)
from .measurement import (
    MeasurementSystem,
    Observation,
    equivalent_noise_sigma,
    gen_matrix,
    load_matrix,
    measure,
    save_matrix,
)
from .pursuit import (
    CapacityError,
    OpCounters,
    RankError,
    TrackerState,
    compute_threshold,
    domp_step,
    domp_track,
    linear_ls_solve,
    omp_solve,
    restricted_ls,
)
