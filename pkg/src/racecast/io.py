"""Dataset ingestion, run configuration, and report persistence.

Datasets are delimited text, one series per run. Config files are JSON or
TOML with a strict schema: unknown keys are rejected and every invariant
violation names the offending field path. Reports go out as CSV rows or
JSON documents.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .codec import QuantizationConfig
from .dsp import FilterSpec
from .errors import ConfigurationError, InputDataError
from .metrics import DEFAULT_QUANTILE_LEVELS
from .race import RaceConfig
from .series import TimeSeries

OUTPUT_DIR_ENV = "RACECAST_OUTPUT_DIR"
WORKERS_ENV = "RACECAST_WORKERS"

REPORT_COLUMNS = ("dataset", "method", "horizon", "wql", "mase", "mae", "mse", "latency_s")


@dataclass(frozen=True)
class DatasetSpec:
    """Where a dataset lives and how to window it."""

    path: str
    value_column: str = "value"
    timestamp_column: str | None = None
    sample_rate_hz: float = 1.0
    context_length: int = 256
    horizon: int = 64
    season_length: int = 1

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0 or not np.isfinite(self.sample_rate_hz):
            raise ConfigurationError(
                f"sample_rate_hz must be positive and finite, got {self.sample_rate_hz}"
            )
        for name in ("context_length", "horizon", "season_length"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")


def read_series_csv(
    path: str | Path,
    value_column: str = "value",
    timestamp_column: str | None = None,
    sample_rate_hz: float = 1.0,
) -> TimeSeries:
    """Read one series from a delimited file.

    Rows with missing or unparseable values are rejected with their line
    numbers.
    """
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"dataset file not found: {path}")
    values: list[float] = []
    timestamps: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or value_column not in reader.fieldnames:
            raise InputDataError(
                f"{path}: missing value column {value_column!r} "
                f"(found {reader.fieldnames})"
            )
        if timestamp_column is not None and timestamp_column not in reader.fieldnames:
            raise InputDataError(f"{path}: missing timestamp column {timestamp_column!r}")
        bad_rows: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            raw = row.get(value_column)
            try:
                v = float(raw)  # type: ignore[arg-type]
                if not np.isfinite(v):
                    raise ValueError
            except (TypeError, ValueError):
                bad_rows.append(lineno)
                continue
            values.append(v)
            if timestamp_column is not None:
                timestamps.append(row[timestamp_column])
        if bad_rows:
            shown = ", ".join(str(r) for r in bad_rows[:10])
            more = "" if len(bad_rows) <= 10 else f" (+{len(bad_rows) - 10} more)"
            raise InputDataError(
                f"{path}: non-numeric or missing values at line(s) {shown}{more}"
            )
    if not values:
        raise InputDataError(f"{path}: no data rows")
    ts = np.array(timestamps) if timestamp_column is not None else None
    return TimeSeries(np.array(values), sample_rate_hz, ts)


def load_csv(spec: DatasetSpec) -> TimeSeries:
    """Read a windowed dataset; it must cover context_length + horizon rows."""
    series = read_series_csv(
        spec.path, spec.value_column, spec.timestamp_column, spec.sample_rate_hz
    )
    if len(series) < spec.context_length + spec.horizon:
        raise InputDataError(
            f"{spec.path}: {len(series)} rows, need at least "
            f"context_length + horizon = {spec.context_length + spec.horizon}"
        )
    return series


def write_series_csv(
    path: str | Path,
    series: TimeSeries,
    value_column: str = "value",
    timestamp_column: str | None = None,
) -> None:
    """Write a series as delimited text, the inverse of :func:`load_csv`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if timestamp_column is not None and series.timestamps is not None:
            writer.writerow([timestamp_column, value_column])
            for t, v in zip(series.timestamps, series.values):
                writer.writerow([t, repr(float(v))])
        else:
            writer.writerow([value_column])
            for v in series.values:
                writer.writerow([repr(float(v))])


# --- run configuration -----------------------------------------------------


@dataclass(frozen=True)
class FilterSettings:
    """Filter design knobs; the sample rate may be deferred to the dataset."""

    cutoff_hz: float = 10.0
    order: int = 5
    sample_rate_hz: float | None = None

    def spec_for(self, sample_rate_hz: float) -> FilterSpec:
        return FilterSpec(self.order, self.cutoff_hz, sample_rate_hz)


@dataclass(frozen=True)
class PredictorSettings:
    kind: str = "ar"
    order: int | None = 3
    period: int | None = None
    per_frame_delay: float = 0.0
    jitter: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("persistence", "seasonal_naive", "ar"):
            raise ConfigurationError(
                f"kind must be persistence, seasonal_naive, or ar, got {self.kind!r}"
            )
        if self.per_frame_delay < 0:
            raise ConfigurationError("per_frame_delay cannot be negative")
        if self.jitter < 0:
            raise ConfigurationError("jitter cannot be negative")


@dataclass(frozen=True)
class PredictorsSettings:
    main: PredictorSettings = field(
        default_factory=lambda: PredictorSettings(kind="ar", order=3, per_frame_delay=0.004)
    )
    draft: PredictorSettings = field(
        default_factory=lambda: PredictorSettings(kind="ar", order=2, per_frame_delay=0.0005)
    )


@dataclass(frozen=True)
class EvalSettings:
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS
    baseline: str = "none"
    seed: int = 0
    num_samples: int = 20

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise ConfigurationError("num_samples must be >= 1")
        levels = tuple(float(q) for q in self.quantile_levels)
        if not levels or any(not 0 < q < 1 for q in levels):
            raise ConfigurationError("quantile_levels must lie strictly inside (0, 1)")
        object.__setattr__(self, "quantile_levels", levels)


@dataclass(frozen=True)
class DatasetDefaults:
    """Windowing applied to every file a bench run picks up."""

    value_column: str = "value"
    timestamp_column: str | None = None
    sample_rate_hz: float = 100.0
    context_length: int = 480
    horizon: int = 48
    season_length: int = 1

    def spec_for(self, path: str | Path) -> DatasetSpec:
        return DatasetSpec(
            path=str(path),
            value_column=self.value_column,
            timestamp_column=self.timestamp_column,
            sample_rate_hz=self.sample_rate_hz,
            context_length=self.context_length,
            horizon=self.horizon,
            season_length=self.season_length,
        )


@dataclass(frozen=True)
class RunConfig:
    filter: FilterSettings = field(default_factory=FilterSettings)
    quant: QuantizationConfig = field(default_factory=QuantizationConfig)
    race: RaceConfig = field(default_factory=RaceConfig)
    predictors: PredictorsSettings = field(default_factory=PredictorsSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)
    datasets: DatasetDefaults = field(default_factory=DatasetDefaults)

    def effective_sample_rate(self) -> float:
        if self.filter.sample_rate_hz is not None:
            return self.filter.sample_rate_hz
        return self.datasets.sample_rate_hz


_SECTION_TYPES: dict[str, type] = {
    "filter": FilterSettings,
    "quant": QuantizationConfig,
    "race": RaceConfig,
    "predictors": PredictorsSettings,
    "eval": EvalSettings,
    "datasets": DatasetDefaults,
}


def _build_dataclass(cls: type, data: dict, path: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a table/object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigurationError(
            f"{path}: unknown key(s) {sorted(unknown)}; allowed: {sorted(known)}"
        )
    kwargs = {}
    for name, value in data.items():
        if name in ("main", "draft") and cls is PredictorsSettings:
            kwargs[name] = _build_dataclass(PredictorSettings, value, f"{path}.{name}")
        elif name == "quantile_levels" and isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def config_from_dict(data: dict, source: str = "config") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: top level must be a table/object")
    unknown = set(data) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigurationError(
            f"{source}: unknown section(s) {sorted(unknown)}; "
            f"allowed: {sorted(_SECTION_TYPES)}"
        )
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        if name in data:
            sections[name] = _build_dataclass(cls, data[name], f"{source}.{name}")
    cfg = RunConfig(**sections)
    _validate_cross_fields(cfg, source)
    return cfg


def _validate_cross_fields(cfg: RunConfig, source: str) -> None:
    fs = cfg.effective_sample_rate()
    try:
        cfg.filter.spec_for(fs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}.filter.cutoff_hz: {exc}") from None
    for role in ("main", "draft"):
        p: PredictorSettings = getattr(cfg.predictors, role)
        if p.kind == "ar" and (p.order is None or p.order < 1):
            raise ConfigurationError(
                f"{source}.predictors.{role}.order: ar predictor needs order >= 1"
            )
        if p.kind == "seasonal_naive" and (p.period is None or p.period < 1):
            raise ConfigurationError(
                f"{source}.predictors.{role}.period: seasonal_naive needs period >= 1"
            )


def config_to_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)


def load_config(path: str | Path | None = None) -> RunConfig:
    """Parse a JSON or TOML config file; ``None`` yields the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise InputDataError(f"config file not found: {path}")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib  # type: ignore[no-redef]
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigurationError(f"{path}: malformed TOML: {exc}") from None
    else:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}: malformed JSON: {exc}") from None
    return config_from_dict(data, source=str(path))


def save_config(cfg: RunConfig, path: str | Path) -> None:
    """Persist a config as JSON (the round-trippable format)."""
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- reports ----------------------------------------------------------------


def save_report_csv(rows: list[dict], path: str | Path) -> None:
    """Write metric rows with the fixed report column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in REPORT_COLUMNS})


def save_report_json(obj: Any, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def output_dir(cli_value: str | None = None) -> Path:
    """Resolve the output directory, honoring the environment override."""
    if cli_value:
        return Path(cli_value)
    return Path(os.environ.get(OUTPUT_DIR_ENV, "racecast-out"))


def worker_count(cli_value: int | None = None) -> int:
    """Resolve the bench worker count, honoring the environment override."""
    if cli_value is not None:
        return max(1, cli_value)
    env = os.environ.get(WORKERS_ENV)
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    return 1
