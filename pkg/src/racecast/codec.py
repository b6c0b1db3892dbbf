"""Token codec: filter, normalize, quantize, tokenize, and the exact inverses.

Encoding runs the series through the anti-aliasing low-pass filter, maps it
affinely onto [0, 1] using the min/max of the (filtered) context window,
snaps it to a grid of 1/Q steps, and emits grid indices as token IDs. The
vocabulary is the Q+1 grid levels 0..Q. Every step is invertible given the
normalization record, so decoded forecasts come back in original units.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import FilterSpec, design_butterworth, filtfilt
from .errors import ConfigurationError, InputDataError
from .series import TimeSeries

ROUNDING_MODES = ("floor", "nearest")

DEFAULT_QUANT_FACTOR = 10_000

_MAGIC = b"RCTS"
_VERSION = 1
# magic, version, quant factor, rounding mode, min, max, token count
_HEADER = struct.Struct("<4sHIBddQ")


@dataclass(frozen=True)
class QuantizationConfig:
    """Grid resolution and rounding rule for the fixed-point step.

    ``floor`` follows the truncating definition (error in (-1/Q, 0]);
    ``nearest`` rounds to the closest level (error within +-1/(2Q)).
    """

    quant_factor: int = DEFAULT_QUANT_FACTOR
    rounding_mode: str = "floor"

    def __post_init__(self) -> None:
        if not isinstance(self.quant_factor, (int, np.integer)) or isinstance(
            self.quant_factor, bool
        ):
            raise ConfigurationError(
                f"quant_factor must be an integer, got {self.quant_factor!r}"
            )
        if self.quant_factor < 1:
            raise ConfigurationError(f"quant_factor must be >= 1, got {self.quant_factor}")
        if self.rounding_mode not in ROUNDING_MODES:
            raise ConfigurationError(
                f"rounding_mode must be one of {ROUNDING_MODES}, got {self.rounding_mode!r}"
            )

    @property
    def vocabulary_size(self) -> int:
        return self.quant_factor + 1


@dataclass(frozen=True)
class NormalizationRecord:
    """Min/max of the context window; everything needed to invert Eq-style
    unit scaling. ``min_val == max_val`` marks a constant (degenerate) window.
    """

    min_val: float
    max_val: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.min_val) and np.isfinite(self.max_val)):
            raise InputDataError("normalization bounds must be finite")
        if self.max_val < self.min_val:
            raise InputDataError(
                f"max_val {self.max_val} is below min_val {self.min_val}"
            )

    @property
    def is_degenerate(self) -> bool:
        return self.max_val == self.min_val

    @property
    def value_range(self) -> float:
        return self.max_val - self.min_val


_IDENTITY_RECORD = NormalizationRecord(0.0, 1.0)


@dataclass
class TokenSequence:
    """Discrete token IDs plus the record needed for exact inversion."""

    tokens: np.ndarray
    norm: NormalizationRecord
    config: QuantizationConfig
    sample_rate_hz: float = 1.0

    def __post_init__(self) -> None:
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        if self.tokens.ndim != 1:
            raise InputDataError("tokens must be one-dimensional")
        if self.tokens.size:
            lo, hi = int(self.tokens.min()), int(self.tokens.max())
            if lo < 0 or hi > self.config.quant_factor:
                raise InputDataError(
                    f"token IDs must lie in [0, {self.config.quant_factor}], "
                    f"found range [{lo}, {hi}]"
                )

    def __len__(self) -> int:
        return self.tokens.size


def normalize(x: TimeSeries) -> tuple[TimeSeries, NormalizationRecord]:
    """Affine map of the series onto [0, 1]; min -> 0, max -> 1.

    A constant series maps to all 0.5 with a degenerate record, which
    inverts back to the constant.
    """
    if len(x) == 0:
        raise InputDataError("cannot normalize an empty series")
    values = x.values
    if not np.isfinite(values).all():
        raise InputDataError("cannot normalize a series containing non-finite samples")
    lo = float(values.min())
    hi = float(values.max())
    record = NormalizationRecord(lo, hi)
    if record.is_degenerate:
        return x.with_values(np.full(len(x), 0.5)), record
    # Clip to guard against one-ulp overshoot from the division.
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    return x.with_values(scaled), record


def denormalize(y: TimeSeries, record: NormalizationRecord) -> TimeSeries:
    """Inverse of :func:`normalize`; a degenerate record yields the constant."""
    return y.with_values(record.min_val + y.values * record.value_range)


def quantize(y_norm: TimeSeries, config: QuantizationConfig) -> TimeSeries:
    """Snap unit-scaled values onto the grid of 1/Q steps.

    Floor mode truncates (1.0 still maps to level Q, keeping the grid
    closed); nearest mode rounds to the closest level.
    """
    values = y_norm.values
    if len(values) == 0:
        raise InputDataError("cannot quantize an empty series")
    if not np.isfinite(values).all():
        raise InputDataError("cannot quantize non-finite values")
    if values.min() < 0.0 or values.max() > 1.0:
        raise InputDataError("quantize expects values inside [0, 1]")
    q = config.quant_factor
    if config.rounding_mode == "floor":
        idx = np.floor(values * q)
        # A product that rounds up across an integer would break the
        # truncation bound; push those indices back down.
        idx -= idx / q > values
    else:
        idx = np.round(values * q)
    return y_norm.with_values(idx / q)


def tokenize(
    x_q: TimeSeries,
    config: QuantizationConfig,
    norm: NormalizationRecord = _IDENTITY_RECORD,
) -> TokenSequence:
    """Map quantized grid values to their integer grid indices."""
    values = x_q.values
    if len(values) == 0:
        raise InputDataError("cannot tokenize an empty series")
    q = config.quant_factor
    idx = np.round(values * q)
    off_grid = np.abs(values - idx / q) > 1e-9
    if off_grid.any():
        where = int(np.argmax(off_grid))
        raise InputDataError(
            f"value {values[where]} at position {where} is not on the 1/{q} grid"
        )
    if idx.min() < 0 or idx.max() > q:
        raise InputDataError(f"grid indices must lie in [0, {q}]")
    return TokenSequence(idx.astype(np.int64), norm, config, x_q.sample_rate_hz)


def detokenize(t: TokenSequence) -> TimeSeries:
    """Token IDs back to grid values in [0, 1]. Exact."""
    return TimeSeries(
        t.tokens.astype(np.float64) / t.config.quant_factor, t.sample_rate_hz
    )


def encode(
    x: TimeSeries,
    filter_spec: FilterSpec | None,
    config: QuantizationConfig = QuantizationConfig(),
) -> TokenSequence:
    """Full encode pipeline: filter, normalize, quantize, tokenize.

    The normalization record is computed on the *filtered* signal. Passing
    ``filter_spec=None`` skips the anti-aliasing filter (used for ablation
    comparisons); the rest of the pipeline is identical.
    """
    if filter_spec is not None:
        if filter_spec.sample_rate_hz != x.sample_rate_hz:
            raise ConfigurationError(
                f"filter designed for {filter_spec.sample_rate_hz} Hz cannot be "
                f"applied to a series sampled at {x.sample_rate_hz} Hz"
            )
        x = filtfilt(design_butterworth(filter_spec), x)
    y_norm, record = normalize(x)
    x_q = quantize(y_norm, config)
    return tokenize(x_q, config, record)


def decode(t: TokenSequence) -> TimeSeries:
    """Tokens back to original units via the carried normalization record."""
    return denormalize(detokenize(t), t.norm)


def decode_frames(frames: np.ndarray, t: TokenSequence) -> np.ndarray:
    """Decode an array of token IDs (any shape) with ``t``'s record."""
    grid = np.asarray(frames, dtype=np.float64) / t.config.quant_factor
    return t.norm.min_val + grid * t.norm.value_range


def write_token_file(path: str | Path, t: TokenSequence) -> None:
    """Serialize tokens to the binary stream format.

    Layout: magic ``RCTS``, u16 version, u32 quant factor, u8 rounding mode
    (0 floor, 1 nearest), f64 min, f64 max, u64 count, then little-endian
    u32 token IDs.
    """
    if t.config.quant_factor >= 2**32:
        raise ConfigurationError("quant_factor too large for the u32 token format")
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        t.config.quant_factor,
        ROUNDING_MODES.index(t.config.rounding_mode),
        t.norm.min_val,
        t.norm.max_val,
        len(t),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(t.tokens.astype("<u4").tobytes())


def read_token_file(path: str | Path) -> TokenSequence:
    """Parse the binary stream format written by :func:`write_token_file`."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise InputDataError(f"{path}: truncated token file header")
        magic, version, q, mode, lo, hi, count = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise InputDataError(f"{path}: not a token file (bad magic {magic!r})")
        if version != _VERSION:
            raise InputDataError(f"{path}: unsupported token file version {version}")
        if mode >= len(ROUNDING_MODES):
            raise InputDataError(f"{path}: unknown rounding mode byte {mode}")
        payload = fh.read(4 * count)
        if len(payload) != 4 * count:
            raise InputDataError(f"{path}: truncated token payload")
        tokens = np.frombuffer(payload, dtype="<u4").astype(np.int64)
    return TokenSequence(
        tokens,
        NormalizationRecord(lo, hi),
        QuantizationConfig(q, ROUNDING_MODES[mode]),
    )
