"""Predictor contracts: streaming order, determinism, latency simulation."""

import sys
import threading
import time

import numpy as np
import pytest

from conftest import ar_series, make_series
from oracles import yule_walker

from racecast import (
    ConfigurationError,
    ForecastRequest,
    FrameSink,
    InputDataError,
    NormalizationRecord,
    PredictorHandle,
    QuantizationConfig,
    TokenSequence,
    encode,
    fit_ar,
    make_reference_predictor,
    make_subprocess_predictor,
    predict_stream,
    with_simulated_latency,
)

Q = 10_000


def token_context(values, fs=1.0):
    return encode(make_series(values, fs), None, QuantizationConfig(Q))


def plain_tokens(ids):
    return TokenSequence(np.array(ids), NormalizationRecord(0.0, 1.0), QuantizationConfig(Q))


class TestReferencePredictors:
    def test_persistence_carries_last_token(self):
        req = ForecastRequest(plain_tokens([10, 20, 1234]), horizon=5, num_samples=3)
        result = predict_stream(make_reference_predictor("persistence"), req)
        assert result.complete
        assert result.frames.shape == (3, 5)
        assert np.all(result.frames == 1234)

    def test_seasonal_naive_repeats_period(self):
        period = 4
        pattern = [100, 200, 300, 400]
        req = ForecastRequest(plain_tokens(pattern * 5), horizon=10, num_samples=2)
        handle = make_reference_predictor("seasonal_naive", period=period)
        result = predict_stream(handle, req)
        want = [pattern[t % period] for t in range(10)]
        assert np.array_equal(result.frames[0], want)
        assert np.array_equal(result.frames[1], want)

    def test_seasonal_naive_exact_periodic_continuation(self):
        period = 7
        base = (np.sin(2 * np.pi * np.arange(period) / period) * 4000 + 5000).astype(int)
        tokens = np.tile(base, 6)
        req = ForecastRequest(plain_tokens(tokens), horizon=21, num_samples=1)
        result = predict_stream(make_reference_predictor("seasonal_naive", period=period), req)
        want = np.tile(base, 3)
        assert np.array_equal(result.frames[0], want)

    def test_ar_fit_close_to_yule_walker(self):
        x = ar_series(5, 512, coefs=(0.55, 0.2, 0.15), sigma=0.3)
        phi, intercept, sigma = fit_ar(x, 3)
        ref = yule_walker(x, 3)
        assert np.max(np.abs(phi - ref)) / np.max(np.abs(ref)) < 0.10
        assert sigma == pytest.approx(0.3, rel=0.2)

    def test_ar_one_step_near_conditional_mean(self):
        coefs = (0.6, 0.25)
        sigma = 0.15
        raw = ar_series(11, 600, coefs=coefs, sigma=sigma, intercept=2.0)
        ctx = token_context(raw)
        req = ForecastRequest(ctx, horizon=1, num_samples=400, temperature_seed=3)
        result = predict_stream(make_reference_predictor("ar", order=2), req)
        decoded = ctx.norm.min_val + result.frames.astype(float) / Q * ctx.norm.value_range
        point = float(np.median(decoded))
        # conditional mean from the true process coefficients
        mu = 2.0 + coefs[0] * raw[-1] + coefs[1] * raw[-2]
        assert abs(point - mu) < 3 * sigma

    def test_ar_needs_enough_context(self):
        req = ForecastRequest(plain_tokens([1, 2, 3]), horizon=2)
        result = predict_stream(make_reference_predictor("ar", order=3), req)
        assert not result.complete
        assert result.error is not None

    def test_param_validation(self):
        with pytest.raises(ConfigurationError):
            make_reference_predictor("seasonal_naive")
        with pytest.raises(ConfigurationError):
            make_reference_predictor("seasonal_naive", period=0)
        with pytest.raises(ConfigurationError):
            make_reference_predictor("ar", order=0)
        with pytest.raises(ConfigurationError):
            make_reference_predictor("lstm")


class TestStreaming:
    def test_frames_in_order_no_gaps(self):
        req = ForecastRequest(plain_tokens([5] * 16), horizon=12, num_samples=2)
        sink = FrameSink(req.horizon, req.num_samples, Q)
        seen = []
        handle = make_reference_predictor("persistence")

        def watcher():
            last = 0
            while True:
                count = sink.wait_count(last + 1, timeout=2.0)
                if count > last:
                    seen.append(count)
                    last = count
                if last >= req.horizon or sink.finished:
                    break

        t = threading.Thread(target=watcher)
        t.start()
        predict_stream(handle, req, sink)
        t.join()
        assert seen == sorted(seen)
        assert seen[-1] == 12

    def test_timestamps_non_decreasing(self):
        req = ForecastRequest(plain_tokens([5] * 16), horizon=20)
        result = predict_stream(make_reference_predictor("persistence"), req)
        assert np.all(np.diff(result.frame_done_at) >= 0)

    def test_determinism_across_runs(self):
        raw = ar_series(21, 300)
        ctx = token_context(raw)
        req = ForecastRequest(ctx, horizon=25, num_samples=6, temperature_seed=77)
        handle = make_reference_predictor("ar", order=2)
        a = predict_stream(handle, req)
        b = predict_stream(handle, req)
        assert np.array_equal(a.frames, b.frames)
        c = predict_stream(handle, ForecastRequest(ctx, 25, 6, temperature_seed=78))
        assert not np.array_equal(a.frames, c.frames)

    def test_token_closure(self):
        raw = ar_series(31, 256, sigma=1.5)
        req = ForecastRequest(token_context(raw), horizon=64, num_samples=16, temperature_seed=9)
        result = predict_stream(make_reference_predictor("ar", order=2), req)
        assert result.frames.min() >= 0
        assert result.frames.max() <= Q

    def test_midstream_failure_retains_prefix(self):
        def flaky_source(req):
            for i in range(req.horizon):
                if i == 4:
                    raise RuntimeError("synthetic fault")
                yield np.full(req.num_samples, 7, dtype=np.int64)

        handle = PredictorHandle(model_id="flaky", source=flaky_source)
        req = ForecastRequest(plain_tokens([7] * 8), horizon=10, num_samples=3)
        sink = FrameSink(10, 3, Q)
        result = predict_stream(handle, req, sink)
        assert not result.complete
        assert "synthetic fault" in (result.error or "")
        assert result.frames.shape == (3, 4)  # four frames got out
        assert sink.error is not None

    def test_cancellation_between_frames(self):
        cancel = threading.Event()

        def source(req):
            for i in range(req.horizon):
                if i == 3:
                    cancel.set()  # simulate an external cancel arriving now
                yield np.full(req.num_samples, 1, dtype=np.int64)

        handle = PredictorHandle(model_id="c", source=source)
        req = ForecastRequest(plain_tokens([1] * 8), horizon=50)
        result = predict_stream(handle, req, cancel=cancel)
        assert result.cancelled
        assert result.frames_done == 3  # the frame in flight is discarded

    def test_out_of_range_frame_is_error_event(self):
        def bad_source(req):
            yield np.full(req.num_samples, Q + 5, dtype=np.int64)

        handle = PredictorHandle(model_id="bad", source=bad_source)
        req = ForecastRequest(plain_tokens([1] * 8), horizon=4)
        result = predict_stream(handle, req)
        assert not result.complete
        assert "token IDs" in (result.error or "")


class TestSimulatedLatency:
    def test_zero_delay_changes_nothing(self):
        req = ForecastRequest(plain_tokens([9] * 8), horizon=30)
        base = make_reference_predictor("persistence")
        wrapped = with_simulated_latency(base, 0.0)
        a = predict_stream(base, req)
        b = predict_stream(wrapped, req)
        assert np.array_equal(a.frames, b.frames)
        assert b.duration < 0.05

    def test_total_stream_time_tracks_delay(self):
        req = ForecastRequest(plain_tokens([9] * 8), horizon=100)
        handle = with_simulated_latency(make_reference_predictor("persistence"), 0.010)
        start = time.perf_counter()
        result = predict_stream(handle, req)
        elapsed = time.perf_counter() - start
        assert result.complete
        assert 1.0 <= elapsed <= 1.0 * 1.10 + 0.05

    def test_latency_ratio_matches_configuration(self):
        req = ForecastRequest(plain_tokens([9] * 8), horizon=100)
        fast = with_simulated_latency(make_reference_predictor("persistence"), 0.002)
        slow = with_simulated_latency(
            make_reference_predictor("persistence", model_id="slow"), 0.020
        )
        t_fast = predict_stream(fast, req).duration
        t_slow = predict_stream(slow, req).duration
        assert t_slow / t_fast >= 8.0

    def test_values_unchanged_under_jitter(self):
        raw = ar_series(41, 256)
        req = ForecastRequest(token_context(raw), horizon=10, num_samples=4, temperature_seed=1)
        base = make_reference_predictor("ar", order=2)
        wrapped = with_simulated_latency(base, 0.002, jitter=0.001)
        assert np.array_equal(predict_stream(base, req).frames, predict_stream(wrapped, req).frames)

    def test_validation(self):
        base = make_reference_predictor("persistence")
        with pytest.raises(ConfigurationError):
            with_simulated_latency(base, -0.1)
        with pytest.raises(ConfigurationError):
            with_simulated_latency(base, 0.001, jitter=0.01)


class TestSubprocessProtocol:
    CHILD = (
        "import sys, json\n"
        "req = json.loads(sys.stdin.readline())\n"
        "last = req['tokens'][-1]\n"
        "for _ in range(req['horizon']):\n"
        "    print(','.join([str(last)] * req['num_samples']), flush=True)\n"
    )

    def test_external_persistence_process(self):
        handle = make_subprocess_predictor([sys.executable, "-c", self.CHILD])
        req = ForecastRequest(plain_tokens([3, 4, 777]), horizon=6, num_samples=3)
        result = predict_stream(handle, req)
        assert result.complete
        assert np.all(result.frames == 777)

    def test_matches_in_process_persistence(self):
        handle = make_subprocess_predictor([sys.executable, "-c", self.CHILD])
        req = ForecastRequest(plain_tokens([3, 4, 777]), horizon=5, num_samples=2)
        external = predict_stream(handle, req)
        internal = predict_stream(make_reference_predictor("persistence"), req)
        assert np.array_equal(external.frames, internal.frames)

    def test_early_exit_surfaces_error(self):
        child = "import sys; sys.stdin.readline(); print('1,2'); sys.exit(1)"
        handle = make_subprocess_predictor([sys.executable, "-c", child])
        req = ForecastRequest(plain_tokens([1, 2]), horizon=5, num_samples=2)
        result = predict_stream(handle, req)
        assert not result.complete
        assert result.frames_done == 1


class TestRequestValidation:
    def test_bad_horizon_and_samples(self):
        ctx = plain_tokens([1, 2, 3])
        with pytest.raises(ConfigurationError):
            ForecastRequest(ctx, horizon=0)
        with pytest.raises(ConfigurationError):
            ForecastRequest(ctx, horizon=5, num_samples=0)

    def test_empty_context(self):
        empty = TokenSequence(np.array([], dtype=np.int64), NormalizationRecord(0, 1), QuantizationConfig(Q))
        with pytest.raises(InputDataError):
            ForecastRequest(empty, horizon=5)
