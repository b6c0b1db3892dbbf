"""Forecast accuracy metrics: WQL, MASE, MAE, MSE, and relative aggregation.

Probabilistic forecasts arrive as sample paths; point metrics score the
per-step median path, and WQL scores empirical quantiles of the paths with
the pinball loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputDataError, UndefinedMetricError

DEFAULT_QUANTILE_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass
class EvalInput:
    """Ground truth, forecast sample paths, and the scaling context."""

    ground_truth: np.ndarray
    forecast_samples: np.ndarray
    in_sample_context: np.ndarray
    season_length: int = 1

    def __post_init__(self) -> None:
        self.ground_truth = np.asarray(self.ground_truth, dtype=np.float64)
        self.forecast_samples = np.asarray(self.forecast_samples, dtype=np.float64)
        self.in_sample_context = np.asarray(self.in_sample_context, dtype=np.float64)
        if self.ground_truth.ndim != 1 or self.ground_truth.size < 1:
            raise InputDataError("ground_truth must be a nonempty vector")
        if self.forecast_samples.ndim != 2:
            raise InputDataError("forecast_samples must be [num_samples x horizon]")
        if self.forecast_samples.shape[1] != self.ground_truth.size:
            raise InputDataError(
                f"forecast horizon {self.forecast_samples.shape[1]} does not match "
                f"ground truth length {self.ground_truth.size}"
            )
        if self.forecast_samples.shape[0] < 1:
            raise InputDataError("need at least one forecast sample path")
        if not isinstance(self.season_length, (int, np.integer)) or self.season_length < 1:
            raise InputDataError(f"season_length must be a positive integer, got {self.season_length}")
        if self.in_sample_context.size <= self.season_length:
            raise InputDataError(
                "in_sample_context must be longer than season_length for scaling"
            )

    @property
    def horizon(self) -> int:
        return self.ground_truth.size

    @property
    def median_path(self) -> np.ndarray:
        return np.median(self.forecast_samples, axis=0)


@dataclass
class MetricReport:
    """One row of evaluation output."""

    wql: float
    mase: float
    mae: float
    mse: float
    latency_seconds: float = float("nan")

    def as_dict(self) -> dict[str, float]:
        return {
            "wql": self.wql,
            "mase": self.mase,
            "mae": self.mae,
            "mse": self.mse,
            "latency_seconds": self.latency_seconds,
        }


def pinball_loss(y: np.ndarray, y_hat: np.ndarray, level: float) -> np.ndarray:
    """Per-step quantile (pinball) loss, scaled by 2 so the median level
    reproduces the absolute error."""
    under = np.maximum(y - y_hat, 0.0)
    over = np.maximum(y_hat - y, 0.0)
    return 2.0 * (level * under + (1.0 - level) * over)


def wql(
    input: EvalInput, quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS
) -> float:
    """Weighted quantile loss, averaged over levels.

    For each level q, sums the pinball loss between the truth and the
    empirical q-quantile of the sample paths, normalized by the total
    absolute ground truth.
    """
    levels = tuple(float(q) for q in quantile_levels)
    if not levels:
        raise InputDataError("need at least one quantile level")
    if any(not 0.0 < q < 1.0 for q in levels):
        raise InputDataError("quantile levels must lie strictly inside (0, 1)")
    if sorted(set(levels)) != list(levels):
        raise InputDataError("quantile levels must be sorted and distinct")
    denom = float(np.sum(np.abs(input.ground_truth)))
    if denom == 0.0:
        raise UndefinedMetricError("ground truth is identically zero; WQL is undefined")
    q_forecasts = np.quantile(input.forecast_samples, levels, axis=0)
    total = 0.0
    for row, level in zip(q_forecasts, levels):
        total += float(np.sum(pinball_loss(input.ground_truth, row, level))) / denom
    return total / len(levels)


def mase(input: EvalInput) -> float:
    """Mean absolute error of the median path scaled by the in-sample
    seasonal-naive error; 1.0 means parity with the naive forecaster."""
    m = input.season_length
    ctx = input.in_sample_context
    scale = float(np.mean(np.abs(ctx[m:] - ctx[:-m])))
    if scale == 0.0:
        raise UndefinedMetricError(
            "in-sample seasonal-naive error is zero; MASE is undefined"
        )
    return float(np.mean(np.abs(input.ground_truth - input.median_path))) / scale


def mae(input: EvalInput) -> float:
    return float(np.mean(np.abs(input.ground_truth - input.median_path)))


def mse(input: EvalInput) -> float:
    return float(np.mean((input.ground_truth - input.median_path) ** 2))


def aggregate_relative(per_dataset: list[tuple[float, float]]) -> float:
    """Geometric mean of method/baseline score ratios across datasets."""
    if not per_dataset:
        raise InputDataError("need at least one (method, baseline) score pair")
    ratios = []
    for method_score, baseline_score in per_dataset:
        if method_score <= 0 or baseline_score <= 0:
            raise InputDataError(
                f"relative aggregation needs positive scores, got "
                f"({method_score}, {baseline_score})"
            )
        ratios.append(method_score / baseline_score)
    return float(np.exp(np.mean(np.log(ratios))))


def evaluate(
    input: EvalInput,
    latency_seconds: float = float("nan"),
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS,
) -> MetricReport:
    """All metrics for one forecast in a single report."""
    return MetricReport(
        wql=wql(input, quantile_levels),
        mase=mase(input),
        mae=mae(input),
        mse=mse(input),
        latency_seconds=latency_seconds,
    )
