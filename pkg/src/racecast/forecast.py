"""Pluggable forecasters that stream token frames.

A predictor turns a token context into ``horizon`` frames, one frame per
future step, where a frame is the vector of token IDs across all sample
paths for that step. Frames are published in order to a thread-safe sink so
a concurrent consumer can read the completed prefix while the producer is
still running; publication is atomic at frame granularity.

Reference predictors (persistence, seasonal-naive, autoregressive) stand in
for large sequence models; :func:`with_simulated_latency` reproduces the
speed asymmetry between a big main model and a small draft model. External
processes can participate through a line protocol: the parent writes one
JSON request line to the child's stdin and the child prints one line per
frame, comma-separated token IDs, flushed as soon as the frame exists.
"""

from __future__ import annotations

import json
import subprocess
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from .codec import TokenSequence, decode_frames
from .errors import ConfigurationError, ExecutionError, InputDataError

ROLES = ("main", "draft")

FrameSource = Callable[["ForecastRequest"], Iterator[np.ndarray]]


@dataclass(frozen=True)
class ForecastRequest:
    """One forecasting job: token history, horizon, and sampling controls."""

    context: TokenSequence
    horizon: int
    num_samples: int = 1
    temperature_seed: int = 0

    def __post_init__(self) -> None:
        if len(self.context) == 0:
            raise InputDataError("forecast context must be nonempty")
        if not isinstance(self.horizon, (int, np.integer)) or self.horizon < 1:
            raise ConfigurationError(f"horizon must be a positive integer, got {self.horizon}")
        if not isinstance(self.num_samples, (int, np.integer)) or self.num_samples < 1:
            raise ConfigurationError(
                f"num_samples must be a positive integer, got {self.num_samples}"
            )


@dataclass
class ForecastResult:
    """Frames produced by one streaming run, with per-frame completion times."""

    frames: np.ndarray  # [num_samples x frames_done] token IDs
    frame_done_at: np.ndarray  # monotonic seconds, one per completed frame
    model_id: str
    horizon: int
    num_samples: int
    started_at: float
    cancelled: bool = False
    error: str | None = None
    provenance: list[str] | None = None

    @property
    def frames_done(self) -> int:
        return self.frames.shape[1]

    @property
    def complete(self) -> bool:
        return self.error is None and self.frames_done == self.horizon

    @property
    def duration(self) -> float:
        if self.frames_done == 0:
            return 0.0
        return float(self.frame_done_at[-1] - self.started_at)


class FrameSink:
    """Ordered, thread-safe frame store shared by producer and consumers.

    The producer appends frames; consumers read any completed prefix without
    blocking the producer. A consumer never observes a partially written
    frame: frames are copied in under the lock and the count is bumped last.
    """

    def __init__(self, horizon: int, num_samples: int, max_token: int) -> None:
        self._lock = threading.Lock()
        self._grown = threading.Condition(self._lock)
        self.horizon = horizon
        self.num_samples = num_samples
        self.max_token = max_token
        self._frames = np.zeros((num_samples, horizon), dtype=np.int64)
        self._done_at = np.zeros(horizon, dtype=np.float64)
        self._count = 0
        self._finished = False
        self._error: str | None = None
        self.started_at = time.perf_counter()

    def publish(self, frame: np.ndarray) -> None:
        frame = np.asarray(frame)
        if frame.shape != (self.num_samples,):
            raise ExecutionError(
                f"frame must have shape ({self.num_samples},), got {frame.shape}"
            )
        if not np.issubdtype(frame.dtype, np.integer):
            if not np.all(frame == np.round(frame)):
                raise ExecutionError("frame token IDs must be integers")
            frame = np.round(frame).astype(np.int64)
        if frame.min() < 0 or frame.max() > self.max_token:
            raise ExecutionError(
                f"frame token IDs must lie in [0, {self.max_token}]"
            )
        with self._grown:
            if self._finished:
                raise ExecutionError("cannot publish to a finished stream")
            if self._count >= self.horizon:
                raise ExecutionError("cannot publish beyond the horizon")
            self._frames[:, self._count] = frame
            self._done_at[self._count] = time.perf_counter()
            self._count += 1
            self._grown.notify_all()

    def fail(self, message: str) -> None:
        with self._grown:
            if self._error is None:
                self._error = message
            self._finished = True
            self._grown.notify_all()

    def finish(self) -> None:
        with self._grown:
            self._finished = True
            self._grown.notify_all()

    @property
    def count(self) -> int:
        with self._lock:
            return self._count

    @property
    def finished(self) -> bool:
        with self._lock:
            return self._finished

    @property
    def error(self) -> str | None:
        with self._lock:
            return self._error

    def prefix(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Copy of the first k published frames and their timestamps."""
        with self._lock:
            if k > self._count:
                raise ExecutionError(f"only {self._count} frames published, asked for {k}")
            return self._frames[:, :k].copy(), self._done_at[:k].copy()

    def wait_count(self, k: int, timeout: float | None = None) -> int:
        """Block until at least k frames exist or the stream finishes."""
        deadline = None if timeout is None else time.perf_counter() + timeout
        with self._grown:
            while self._count < k and not self._finished:
                remaining = None if deadline is None else deadline - time.perf_counter()
                if remaining is not None and remaining <= 0:
                    break
                self._grown.wait(remaining)
            return self._count

    def result(self, model_id: str, cancelled: bool = False) -> ForecastResult:
        with self._lock:
            return ForecastResult(
                frames=self._frames[:, : self._count].copy(),
                frame_done_at=self._done_at[: self._count].copy(),
                model_id=model_id,
                horizon=self.horizon,
                num_samples=self.num_samples,
                started_at=self.started_at,
                cancelled=cancelled,
                error=self._error,
            )


@dataclass
class PredictorHandle:
    """A named frame source plus scheduling metadata."""

    model_id: str
    source: FrameSource = field(repr=False)
    expected_per_frame_latency: float = 0.0
    role: str = "main"

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ConfigurationError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.expected_per_frame_latency < 0:
            raise ConfigurationError("expected_per_frame_latency cannot be negative")


def predict_stream(
    handle: PredictorHandle,
    req: ForecastRequest,
    sink: FrameSink | None = None,
    cancel: threading.Event | None = None,
) -> ForecastResult:
    """Run one forecast, publishing frames to ``sink`` in index order.

    Frames are deterministic for a fixed (request, seed). A predictor
    failure mid-stream is recorded on the sink as an error event; frames
    already published are retained in the returned result. Cancellation is
    cooperative, checked between frames.
    """
    if sink is None:
        sink = FrameSink(req.horizon, req.num_samples, req.context.config.quant_factor)
    sink.started_at = time.perf_counter()
    cancelled = False
    try:
        for frame in handle.source(req):
            if cancel is not None and cancel.is_set():
                cancelled = True
                break
            sink.publish(frame)
            if sink.count >= req.horizon:
                break
    except Exception as exc:  # predictor failures become sink error events
        sink.fail(f"{handle.model_id}: {exc}")
    finally:
        sink.finish()
    return sink.result(handle.model_id, cancelled=cancelled)


def _persistence_source(req: ForecastRequest) -> Iterator[np.ndarray]:
    last = int(req.context.tokens[-1])
    frame = np.full(req.num_samples, last, dtype=np.int64)
    for _ in range(req.horizon):
        yield frame.copy()


def _seasonal_naive_source(period: int) -> FrameSource:
    def source(req: ForecastRequest) -> Iterator[np.ndarray]:
        tokens = req.context.tokens
        if len(tokens) < period:
            raise InputDataError(
                f"seasonal-naive needs at least {period} context values, got {len(tokens)}"
            )
        tail = tokens[-period:]
        for t in range(req.horizon):
            yield np.full(req.num_samples, int(tail[t % period]), dtype=np.int64)

    return source


def fit_ar(values: np.ndarray, order: int) -> tuple[np.ndarray, float, float]:
    """Least-squares AR(p) fit with intercept.

    Returns (coefficients phi_1..phi_p, intercept, residual std). phi_j
    multiplies the value j steps back.
    """
    values = np.asarray(values, dtype=np.float64)
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise ConfigurationError(f"AR order must be a positive integer, got {order}")
    n = values.size
    if n < 2 * order + 2:
        raise InputDataError(
            f"need at least {2 * order + 2} values to fit AR({order}), got {n}"
        )
    rows = n - order
    X = np.ones((rows, order + 1))
    for j in range(1, order + 1):
        X[:, j] = values[order - j : n - j]
    y = values[order:]
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = max(rows - (order + 1), 1)
    sigma = float(np.sqrt(np.sum(resid**2) / dof))
    return beta[1:], float(beta[0]), sigma


def _ar_source(order: int) -> FrameSource:
    def source(req: ForecastRequest) -> Iterator[np.ndarray]:
        q = req.context.config.quant_factor
        values = req.context.tokens.astype(np.float64) / q
        phi, intercept, sigma = fit_ar(values, order)
        rng = np.random.default_rng(req.temperature_seed)
        # Each sample path keeps its own rolling history of the last p values.
        history = np.tile(values[-order:], (req.num_samples, 1))
        for _ in range(req.horizon):
            mean = intercept + history[:, ::-1] @ phi
            draws = mean + rng.normal(0.0, sigma, req.num_samples)
            idx = np.clip(np.round(draws * q), 0, q).astype(np.int64)
            yield idx
            history = np.roll(history, -1, axis=1)
            history[:, -1] = idx.astype(np.float64) / q

    return source


def make_reference_predictor(
    kind: str,
    *,
    model_id: str | None = None,
    role: str = "main",
    period: int | None = None,
    order: int | None = None,
) -> PredictorHandle:
    """Build one of the desk-scale reference predictors.

    ``persistence`` carries the last token forward; ``seasonal_naive``
    repeats the last ``period`` context frames; ``ar`` fits an AR(``order``)
    by least squares on the context and samples Gaussian innovation paths.
    """
    if kind == "persistence":
        source: FrameSource = _persistence_source
        default_id = "persistence"
    elif kind == "seasonal_naive":
        if period is None or not isinstance(period, (int, np.integer)) or period < 1:
            raise ConfigurationError(
                f"seasonal_naive needs a season period >= 1, got {period}"
            )
        source = _seasonal_naive_source(int(period))
        default_id = f"seasonal_naive_{period}"
    elif kind == "ar":
        if order is None or not isinstance(order, (int, np.integer)) or order < 1:
            raise ConfigurationError(f"ar needs a lag order >= 1, got {order}")
        source = _ar_source(int(order))
        default_id = f"ar{order}"
    else:
        raise ConfigurationError(
            f"unknown predictor kind {kind!r}; expected persistence, seasonal_naive, or ar"
        )
    return PredictorHandle(model_id=model_id or default_id, source=source, role=role)


def with_simulated_latency(
    handle: PredictorHandle, per_frame_delay: float, jitter: float = 0.0
) -> PredictorHandle:
    """Wrap a predictor so each frame costs ``per_frame_delay`` +- ``jitter``
    seconds of wall time. Forecast values are unchanged; only timing moves.
    """
    if per_frame_delay < 0:
        raise ConfigurationError("per_frame_delay cannot be negative")
    if jitter != 0 and not 0 <= jitter <= per_frame_delay:
        raise ConfigurationError("jitter must lie in [0, per_frame_delay]")
    inner = handle.source

    def source(req: ForecastRequest) -> Iterator[np.ndarray]:
        rng = np.random.default_rng()
        for frame in inner(req):
            if per_frame_delay > 0 or jitter > 0:
                pause = per_frame_delay + (rng.uniform(-jitter, jitter) if jitter else 0.0)
                if pause > 0:
                    time.sleep(pause)
            yield frame

    return replace(
        handle,
        source=source,
        expected_per_frame_latency=handle.expected_per_frame_latency + per_frame_delay,
    )


def make_subprocess_predictor(
    argv: list[str],
    *,
    model_id: str | None = None,
    role: str = "draft",
    timeout: float = 60.0,
) -> PredictorHandle:
    """Predictor backed by an external process speaking the line protocol.

    The request is written to the child's stdin as one JSON line with keys
    ``tokens``, ``quant_factor``, ``min_val``, ``max_val``, ``horizon``,
    ``num_samples``, ``seed``. The child must print one line per frame,
    comma-separated token IDs (one per sample path), flushing each line.
    """

    def source(req: ForecastRequest) -> Iterator[np.ndarray]:
        request_line = json.dumps(
            {
                "tokens": req.context.tokens.tolist(),
                "quant_factor": req.context.config.quant_factor,
                "min_val": req.context.norm.min_val,
                "max_val": req.context.norm.max_val,
                "horizon": req.horizon,
                "num_samples": req.num_samples,
                "seed": req.temperature_seed,
            }
        )
        proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            assert proc.stdin is not None and proc.stdout is not None
            proc.stdin.write(request_line + "\n")
            proc.stdin.flush()
            proc.stdin.close()
            for _ in range(req.horizon):
                line = proc.stdout.readline()
                if not line:
                    stderr = proc.stderr.read() if proc.stderr else ""
                    raise ExecutionError(
                        f"predictor process ended early: {stderr.strip() or 'no output'}"
                    )
                try:
                    frame = np.array([int(v) for v in line.strip().split(",")], dtype=np.int64)
                except ValueError as exc:
                    raise ExecutionError(f"unparseable frame line {line!r}") from exc
                yield frame
        finally:
            try:
                proc.wait(timeout=timeout)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    return PredictorHandle(
        model_id=model_id or f"proc:{argv[0]}", source=source, role=role
    )


def decode_result(result: ForecastResult, context: TokenSequence) -> np.ndarray:
    """Forecast frames in original units, decoded with the context's record."""
    return decode_frames(result.frames, context)
