"""Anti-aliased time-series token codec and draft/main racing forecaster.

The pipeline has two halves. The codec turns a raw series into discrete
tokens (low-pass filter, unit scaling, fixed-point grid, token IDs) and
back. The racer runs a fast draft forecaster and a slow main forecaster
concurrently, checks the main's completed prefix against the draft, and
splices the two when they agree, cutting long-horizon latency.
"""

from .codec import (
    NormalizationRecord,
    QuantizationConfig,
    TokenSequence,
    decode,
    decode_frames,
    denormalize,
    detokenize,
    encode,
    normalize,
    quantize,
    read_token_file,
    tokenize,
    write_token_file,
)
from .dsp import (
    FilterCoefficients,
    FilterSpec,
    Spectrum,
    band_power,
    design_butterworth,
    dft,
    filtfilt,
    frequency_response,
    idft,
    snr,
)
from .errors import (
    ConfigurationError,
    ExecutionError,
    InputDataError,
    RacecastError,
    UndefinedMetricError,
)
from .forecast import (
    ForecastRequest,
    ForecastResult,
    FrameSink,
    PredictorHandle,
    fit_ar,
    make_reference_predictor,
    make_subprocess_predictor,
    predict_stream,
    with_simulated_latency,
)
from .metrics import (
    DEFAULT_QUANTILE_LEVELS,
    EvalInput,
    MetricReport,
    aggregate_relative,
    evaluate,
    mae,
    mase,
    mse,
    wql,
)
from .race import RaceConfig, RaceOutcome, concatenate, race, tolerance_check
from .series import TimeSeries

__version__ = "0.1.0"
