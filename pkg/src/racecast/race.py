"""Race two predictors: fast draft versus slow main, splice on agreement.

Both predictors run concurrently on the same request. When the draft
finishes all frames, the main's completed prefix is compared against the
draft's corresponding frames; if the range-normalized difference stays
under the tolerance, the main is cancelled and its prefix is concatenated
with the draft's suffix. Otherwise the main runs to completion and its full
result is returned. Total time is therefore bounded by the faster of
(draft + check) and (main alone), up to scheduling overhead.
"""

from __future__ import annotations

import math
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ExecutionError, InputDataError
from .forecast import (
    ForecastRequest,
    ForecastResult,
    FrameSink,
    PredictorHandle,
    predict_stream,
)

NORM_KINDS = ("rmse", "mean_abs")
COMPARE_PATHS = ("median_path", "mean_path")


@dataclass(frozen=True)
class RaceConfig:
    """Tolerance and comparison settings for the prefix agreement check.

    ``gamma`` is in range-normalized units (fraction of the context's value
    range), so the same tolerance transfers across datasets. ``min_overlap``
    defaults to 5% of the horizon (at least 1). ``pinned_prefix`` forces the
    check to happen at a fixed prefix length, trading a little latency for
    bit-reproducible outputs in benchmark runs.
    """

    gamma: float = 0.1
    min_overlap: int | None = None
    norm_kind: str = "rmse"
    compare_on: str = "median_path"
    pinned_prefix: int | None = None

    def __post_init__(self) -> None:
        if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma)):
            raise ConfigurationError(f"gamma must be finite, got {self.gamma!r}")
        if self.gamma < 0:
            raise ConfigurationError(f"gamma cannot be negative, got {self.gamma}")
        if self.min_overlap is not None and (
            not isinstance(self.min_overlap, (int, np.integer)) or self.min_overlap < 1
        ):
            raise ConfigurationError(
                f"min_overlap must be a positive integer, got {self.min_overlap}"
            )
        if self.norm_kind not in NORM_KINDS:
            raise ConfigurationError(f"norm_kind must be one of {NORM_KINDS}")
        if self.compare_on not in COMPARE_PATHS:
            raise ConfigurationError(f"compare_on must be one of {COMPARE_PATHS}")
        if self.pinned_prefix is not None and (
            not isinstance(self.pinned_prefix, (int, np.integer)) or self.pinned_prefix < 1
        ):
            raise ConfigurationError(
                f"pinned_prefix must be a positive integer, got {self.pinned_prefix}"
            )

    def effective_min_overlap(self, horizon: int) -> int:
        if self.min_overlap is not None:
            return int(self.min_overlap)
        return max(1, math.ceil(0.05 * horizon))


@dataclass
class RaceOutcome:
    """Final forecast plus which branch produced it and the timing split."""

    forecast: ForecastResult
    branch: str  # "concatenated" | "main_only" | "draft_only"
    k: int
    delta_p: float | None
    gamma: float
    t_draft: float
    t_main: float
    t_main_is_projected: bool
    t_tolerance: float
    t_total: float
    provenance: list[str]
    degraded: str | None = None

    @property
    def speedup(self) -> float:
        if self.t_total <= 0:
            return float("inf")
        return self.t_main / self.t_total

    def to_report(self) -> dict:
        """JSON-ready structured race report."""
        return {
            "branch": self.branch,
            "k": self.k,
            "delta_p": self.delta_p,
            "gamma": self.gamma,
            "horizon": self.forecast.horizon,
            "num_samples": self.forecast.num_samples,
            "model_id": self.forecast.model_id,
            "timings": {
                "t_draft_s": self.t_draft,
                "t_main_s": self.t_main,
                "t_main_is_projected": self.t_main_is_projected,
                "t_tolerance_s": self.t_tolerance,
                "t_total_s": self.t_total,
                "speedup": self.speedup,
            },
            "per_frame_provenance": list(self.provenance),
            "degraded": self.degraded,
        }


def tolerance_check(
    main_prefix: np.ndarray,
    draft_prefix: np.ndarray,
    cfg: RaceConfig,
    quant_factor: int,
) -> tuple[float, bool]:
    """Range-normalized difference between the two prefixes.

    The summary path (median or mean across sample paths) of each prefix is
    compared frame by frame; dividing token IDs by the quantization factor
    expresses the difference as a fraction of the context's value range,
    which makes the result scale-free. Passing requires strictly less than
    ``gamma``.
    """
    main_prefix = np.asarray(main_prefix, dtype=np.float64)
    draft_prefix = np.asarray(draft_prefix, dtype=np.float64)
    if main_prefix.ndim != 2 or draft_prefix.ndim != 2:
        raise InputDataError("prefixes must be [num_samples x k] frame matrices")
    if main_prefix.shape != draft_prefix.shape:
        raise InputDataError(
            f"prefix shapes differ: {main_prefix.shape} vs {draft_prefix.shape}"
        )
    if main_prefix.shape[1] < 1:
        raise InputDataError("tolerance check needs at least one overlapping frame")
    summarize = np.median if cfg.compare_on == "median_path" else np.mean
    diff = (summarize(main_prefix, axis=0) - summarize(draft_prefix, axis=0)) / quant_factor
    if cfg.norm_kind == "rmse":
        delta = float(np.sqrt(np.mean(diff**2)))
    else:
        delta = float(np.mean(np.abs(diff)))
    return delta, delta < cfg.gamma


def concatenate(
    main_prefix: np.ndarray,
    draft_suffix: np.ndarray,
    main_done_at: np.ndarray,
    draft_done_at: np.ndarray,
    model_id: str,
    started_at: float,
) -> ForecastResult:
    """Splice k main frames with the draft's remaining frames.

    The pieces must tile the horizon exactly: k main frames followed by
    H - k draft frames, same sample-path count on both sides.
    """
    main_prefix = np.asarray(main_prefix, dtype=np.int64)
    draft_suffix = np.asarray(draft_suffix, dtype=np.int64)
    if main_prefix.ndim != 2 or draft_suffix.ndim != 2:
        raise InputDataError("frame blocks must be [num_samples x frames]")
    if main_prefix.shape[0] != draft_suffix.shape[0]:
        raise InputDataError(
            f"sample-path counts differ: {main_prefix.shape[0]} vs {draft_suffix.shape[0]}"
        )
    k = main_prefix.shape[1]
    h = k + draft_suffix.shape[1]
    if len(main_done_at) != k or len(draft_done_at) != draft_suffix.shape[1]:
        raise InputDataError("timestamp lengths must match their frame blocks")
    frames = np.concatenate([main_prefix, draft_suffix], axis=1)
    done_at = np.concatenate([main_done_at, draft_done_at])
    return ForecastResult(
        frames=frames,
        frame_done_at=done_at,
        model_id=model_id,
        horizon=h,
        num_samples=frames.shape[0],
        started_at=started_at,
        provenance=["main"] * k + ["draft"] * (h - k),
    )


def _sink_duration(sink: FrameSink) -> float:
    count = sink.count
    if count == 0:
        return 0.0
    _, done_at = sink.prefix(count)
    return float(done_at[-1] - sink.started_at)


def race(
    main: PredictorHandle,
    draft: PredictorHandle,
    req: ForecastRequest,
    cfg: RaceConfig = RaceConfig(),
) -> RaceOutcome:
    """Run the draft/main race for one request.

    Both predictors start immediately on identical requests. The first to
    finish decides the flow: a finished main short-circuits to its own
    result; a finished draft triggers the prefix agreement check against
    however many frames the main has completed (waiting, if needed, until
    the minimum overlap exists). On a pass the main is cancelled and the
    spliced forecast is returned, otherwise the main's full result is
    awaited. Predictor failures degrade to whichever side is healthy; only
    the loss of both is an error. Cancelled streams are abandoned rather
    than joined, so a slow loser never delays the returned result.
    """
    if main.model_id == draft.model_id:
        raise ConfigurationError("main and draft must have distinct model_ids")
    horizon = req.horizon
    min_overlap = cfg.effective_min_overlap(horizon)
    if horizon < min_overlap:
        raise ConfigurationError(
            f"horizon {horizon} is below the minimum overlap {min_overlap}"
        )
    quant_factor = req.context.config.quant_factor

    t_start = time.perf_counter()
    main_sink = FrameSink(horizon, req.num_samples, quant_factor)
    draft_sink = FrameSink(horizon, req.num_samples, quant_factor)
    cancel_main = threading.Event()
    cancel_draft = threading.Event()

    pool = ThreadPoolExecutor(max_workers=2, thread_name_prefix="race")
    try:
        fut_main = pool.submit(predict_stream, main, req, main_sink, cancel_main)
        fut_draft = pool.submit(predict_stream, draft, req, draft_sink, cancel_draft)
        done, _ = wait({fut_main, fut_draft}, return_when=FIRST_COMPLETED)

        if fut_main in done and fut_main.result().complete:
            # Main crossed the line first; the draft no longer matters.
            cancel_draft.set()
            main_res = fut_main.result()
            t_total = time.perf_counter() - t_start
            return RaceOutcome(
                forecast=main_res,
                branch="main_only",
                k=horizon,
                delta_p=None,
                gamma=cfg.gamma,
                t_draft=_sink_duration(draft_sink),
                t_main=main_res.duration,
                t_main_is_projected=False,
                t_tolerance=0.0,
                t_total=t_total,
                provenance=["main"] * horizon,
            )

        draft_res = fut_draft.result()
        if not draft_res.complete:
            # Draft is gone; quietly fall back to the main alone.
            main_res = fut_main.result()
            t_total = time.perf_counter() - t_start
            if not main_res.complete:
                raise ExecutionError(
                    f"both predictors failed: main={main_res.error!r} "
                    f"draft={draft_res.error!r}"
                )
            return RaceOutcome(
                forecast=main_res,
                branch="main_only",
                k=horizon,
                delta_p=None,
                gamma=cfg.gamma,
                t_draft=draft_res.duration,
                t_main=main_res.duration,
                t_main_is_projected=False,
                t_tolerance=0.0,
                t_total=t_total,
                provenance=["main"] * horizon,
                degraded=f"draft failed: {draft_res.error}",
            )

        t_draft = draft_res.duration

        # How much of the main do we have to compare against?
        k = main_sink.count
        target = cfg.pinned_prefix if cfg.pinned_prefix is not None else min_overlap
        target = min(target, horizon)
        if k < target or cfg.pinned_prefix is not None:
            main_sink.wait_count(target)
            k = main_sink.count
        if cfg.pinned_prefix is not None:
            k = min(k, target)
        k = min(k, horizon)

        delta_p: float | None = None
        passed = False
        main_prefix = main_done_at = None
        t_check_start = time.perf_counter()
        if k >= 1:
            main_prefix, main_done_at = main_sink.prefix(k)
            draft_prefix, _ = draft_sink.prefix(k)
            delta_p, passed = tolerance_check(main_prefix, draft_prefix, cfg, quant_factor)
        t_tolerance = time.perf_counter() - t_check_start

        if passed:
            cancel_main.set()
            draft_frames, draft_done_at = draft_sink.prefix(horizon)
            forecast = concatenate(
                main_prefix,
                draft_frames[:, k:],
                main_done_at,
                draft_done_at[k:],
                model_id=f"{main.model_id}+{draft.model_id}",
                started_at=main_sink.started_at,
            )
            main_error = main_sink.error
            full_main_known = k == horizon and main_error is None
            t_main = (
                _sink_duration(main_sink)
                if full_main_known
                else _projected_main_time(main_sink, k, horizon)
            )
            t_total = time.perf_counter() - t_start
            return RaceOutcome(
                forecast=forecast,
                branch="concatenated",
                k=k,
                delta_p=delta_p,
                gamma=cfg.gamma,
                t_draft=t_draft,
                t_main=t_main,
                t_main_is_projected=not full_main_known,
                t_tolerance=t_tolerance,
                t_total=t_total,
                provenance=list(forecast.provenance or []),
                degraded=f"main failed: {main_error}" if main_error else None,
            )

        # Check failed (or no overlap was possible): wait out the main.
        main_res = fut_main.result()
        t_total = time.perf_counter() - t_start
        if main_res.complete:
            return RaceOutcome(
                forecast=main_res,
                branch="main_only",
                k=horizon,
                delta_p=delta_p,
                gamma=cfg.gamma,
                t_draft=t_draft,
                t_main=main_res.duration,
                t_main_is_projected=False,
                t_tolerance=t_tolerance,
                t_total=t_total,
                provenance=["main"] * horizon,
            )
        # Main died and its prefix disagreed; the draft's complete forecast
        # is the only full result available.
        draft_res.provenance = ["draft"] * horizon
        return RaceOutcome(
            forecast=draft_res,
            branch="draft_only",
            k=0,
            delta_p=delta_p,
            gamma=cfg.gamma,
            t_draft=t_draft,
            t_main=main_res.duration,
            t_main_is_projected=False,
            t_tolerance=t_tolerance,
            t_total=t_total,
            provenance=["draft"] * horizon,
            degraded=f"main failed: {main_res.error}",
        )
    finally:
        pool.shutdown(wait=False)


def _projected_main_time(sink: FrameSink, k: int, horizon: int) -> float:
    """Extrapolate the main's full-horizon time from its first k frames."""
    if k < 1:
        return float("nan")
    _, done_at = sink.prefix(k)
    elapsed = float(done_at[-1] - sink.started_at)
    return elapsed * horizon / k
