"""Pattern recognition on binary cell arrays via wave-number spectra.

A desk-scale, bit-exact simulator of the pipeline: encode an N x M
binary array in a superposition over white-cell coordinates (oracle +
post-selection), Fourier transform, and read line-pattern parameters
(spacing, angle, coverage) off the measured wave-number peaks. A
classical radix-2 transform provides the independent reference
spectrum, and detection/estimation work from either exact spectra or
measured samples.
"""

from .grid import (
    BackgroundSpec,
    CellGrid,
    LinePatternSpec,
    flatten,
    generate_grid,
    perfect_grating,
    probability_field,
    read_grid,
    subgrid,
    transpose_grid,
    unflatten,
    write_grid,
)
from .qsim import (
    Counters,
    MeasurementSample,
    PostselectionError,
    PureState,
    RunResult,
    oracle_amplitude,
    oracle_phase_xor,
    postselect_f1,
    prepare_superposition,
    qft_circuit,
    qft_gate_total,
    run_pipeline,
    sample_k,
    samples_to_array,
    semiclassical_distribution,
    semiclassical_qft_sample,
)
from .spectral import (
    PeakPrediction,
    Spectrum,
    exact_distribution,
    laue,
    noise_floor,
    peak_probability_estimate,
    predict_column_condition,
    predict_resonances,
    predict_row_peaks,
    radix2_dft,
    write_spectrum_csv,
)
from .recognize import (
    ChiEstimate,
    DetectionPolicy,
    InconsistentPeaksError,
    LocaliseReport,
    PatternEstimate,
    PeakCluster,
    PeakReport,
    common_spacing,
    decide_pattern_present,
    detect_peaks,
    estimate_chi,
    estimate_parameters,
    localise,
)
from .config import (
    ConfigError,
    DetectConfig,
    ExperimentConfig,
    GridConfig,
    OutputConfig,
    PatternConfig,
    RunConfig,
    build_policy,
    build_specs,
    config_hash,
    load_config,
    parse_config,
)

__version__ = "0.1.0"
