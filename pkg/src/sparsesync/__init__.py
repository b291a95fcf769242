"""Joint frame synchronization and sparse channel estimation.

The receiver folds the unknown frame boundary into a long, sparse combined
channel and recovers it with orthogonal matching pursuit; the estimate then
drives an MMSE sparse FIR equalizer.
"""

from .capture import IqCapture, ingest_capture, load_iq, save_iq
from .channel import (
    LinkRealization,
    SampleStream,
    assemble_stream,
    collect_training_window,
    propagate,
    snr_to_noise_variance,
)
from .config import ConfigError, parse_config
from .equalizer import (
    EqualizerDesign,
    apply_equalizer,
    design_mmse,
    measure_mse,
    optimize_delay,
    sparsify_taps,
)
from .estimators import (
    ChannelEstimate,
    MeasurementMatrix,
    Method,
    OmpStop,
    build_measurement_matrix,
    estimate_classical,
    estimate_conventional,
    estimate_noise_variance,
    estimate_omp,
    extract_boundary,
    sync_crosscorr,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    TrialRecord,
    dump_estimates,
    run_snr_sweep,
    run_tap_sweep,
    run_trial,
    simulate_link,
    to_db,
)
from .model import (
    CombinedCir,
    FrameConfig,
    Modulation,
    TrainingFrame,
    build_combined_cir,
    decide_symbols,
    generate_data_frame,
    generate_training,
    validate_frame_config,
)
from .numerics import convolve, cross_correlate, solve_least_squares

__version__ = "0.1.0"
