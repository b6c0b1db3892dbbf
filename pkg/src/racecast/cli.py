"""Command-line interface.

Subcommands: quantize, dequantize, forecast, race, bench. Exit codes: 0
success, 2 bad input data, 3 bad configuration, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import io as io_mod
from .codec import (
    QuantizationConfig,
    ROUNDING_MODES,
    decode,
    decode_frames,
    encode,
    read_token_file,
    write_token_file,
)
from .dsp import FilterSpec
from .errors import ConfigurationError, InputDataError, RacecastError
from .forecast import (
    ForecastRequest,
    make_reference_predictor,
    make_subprocess_predictor,
    predict_stream,
    with_simulated_latency,
)
from .race import RaceConfig, race
from .series import TimeSeries

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4


def _add_codec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--value-column", default="value", help="CSV column holding the series")
    p.add_argument("--fs", type=float, default=1.0, help="sampling rate in Hz (default 1.0)")
    p.add_argument(
        "--cutoff",
        type=float,
        default=None,
        help="low-pass cutoff in Hz (default 0.2x Nyquist)",
    )
    p.add_argument("--order", type=int, default=5, help="filter order (default 5)")
    p.add_argument(
        "--quant-factor", type=int, default=10_000, help="grid steps per unit (default 10000)"
    )
    p.add_argument(
        "--rounding",
        choices=ROUNDING_MODES,
        default="floor",
        help="quantization rounding rule",
    )
    p.add_argument(
        "--no-filter",
        action="store_true",
        help="skip the anti-aliasing filter before quantization",
    )


def _filter_spec(args) -> FilterSpec | None:
    if args.no_filter:
        return None
    cutoff = args.cutoff if args.cutoff is not None else 0.1 * args.fs
    return FilterSpec(args.order, cutoff, args.fs)


def _read_series(args) -> TimeSeries:
    return io_mod.read_series_csv(args.input, args.value_column, None, args.fs)


def parse_predictor(spec: str, role: str):
    """Parse a predictor argument.

    Built-in kinds: ``persistence``, ``seasonal_naive:period=24``,
    ``ar:order=3``; all accept ``delay_ms`` and ``jitter_ms``. External
    processes: ``proc:<command line>`` (speaks the stdin/stdout frame
    protocol, see ``forecast --stream``).
    """
    if spec.startswith("proc:"):
        argv = shlex.split(spec[len("proc:") :])
        if not argv:
            raise ConfigurationError("proc: predictor needs a command line")
        return make_subprocess_predictor(argv, role=role, model_id=f"{role}:{argv[0]}")
    kind, _, rest = spec.partition(":")
    params: dict[str, float] = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise ConfigurationError(f"predictor option {item!r} must look like key=value")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise ConfigurationError(f"predictor option {item!r} has a non-numeric value")
    known = {"order", "period", "delay_ms", "jitter_ms"}
    unknown = set(params) - known
    if unknown:
        raise ConfigurationError(f"unknown predictor option(s) {sorted(unknown)}")
    handle = make_reference_predictor(
        kind,
        model_id=f"{role}:{spec}",
        role=role,
        period=int(params["period"]) if "period" in params else None,
        order=int(params["order"]) if "order" in params else None,
    )
    delay = params.get("delay_ms", 0.0) / 1000.0
    jitter = params.get("jitter_ms", 0.0) / 1000.0
    if delay > 0 or jitter > 0:
        handle = with_simulated_latency(handle, delay, jitter)
    return handle


def cmd_quantize(args) -> int:
    series = _read_series(args)
    config = QuantizationConfig(args.quant_factor, args.rounding)
    tokens = encode(series, _filter_spec(args), config)
    write_token_file(args.output, tokens)
    print(
        f"wrote {len(tokens)} tokens to {args.output} "
        f"(Q={config.quant_factor}, rounding={config.rounding_mode})"
    )
    return EXIT_OK


def cmd_dequantize(args) -> int:
    tokens = read_token_file(args.input)
    series = decode(tokens)
    io_mod.write_series_csv(args.output, series, args.value_column)
    print(f"wrote {len(series)} values to {args.output}")
    return EXIT_OK


def _stream_forecast(args) -> int:
    """Child side of the subprocess protocol: JSON request in, frames out."""
    from .codec import NormalizationRecord, TokenSequence

    line = sys.stdin.readline()
    if not line.strip():
        raise InputDataError("expected a JSON request line on stdin")
    req_data = json.loads(line)
    tokens = TokenSequence(
        np.asarray(req_data["tokens"], dtype=np.int64),
        NormalizationRecord(req_data["min_val"], req_data["max_val"]),
        QuantizationConfig(req_data["quant_factor"]),
    )
    req = ForecastRequest(
        context=tokens,
        horizon=int(req_data["horizon"]),
        num_samples=int(req_data["num_samples"]),
        temperature_seed=int(req_data.get("seed", 0)),
    )
    handle = parse_predictor(args.model, "main")
    sink_frames: list[np.ndarray] = []

    for frame in handle.source(req):
        sys.stdout.write(",".join(str(int(v)) for v in frame) + "\n")
        sys.stdout.flush()
        sink_frames.append(frame)
        if len(sink_frames) >= req.horizon:
            break
    return EXIT_OK


def cmd_forecast(args) -> int:
    if args.stream:
        return _stream_forecast(args)
    if args.input is None:
        raise InputDataError("--input is required unless --stream is given")
    series = _read_series(args)
    config = QuantizationConfig(args.quant_factor, args.rounding)
    tokens = encode(series, _filter_spec(args), config)
    req = ForecastRequest(tokens, args.horizon, args.samples, args.seed)
    handle = parse_predictor(args.model, "main")
    result = predict_stream(handle, req)
    if not result.complete:
        raise RacecastError(f"forecast failed: {result.error}")
    decoded = decode_frames(result.frames, tokens)
    med = np.median(decoded, axis=0)
    lo = np.quantile(decoded, 0.1, axis=0)
    hi = np.quantile(decoded, 0.9, axis=0)
    with open(args.output, "w") as fh:
        fh.write("step,median,p10,p90\n")
        for i in range(args.horizon):
            fh.write(f"{i + 1},{med[i]!r},{lo[i]!r},{hi[i]!r}\n")
    print(f"wrote {args.horizon}-step forecast to {args.output} ({result.duration:.3f}s)")
    return EXIT_OK


def cmd_race(args) -> int:
    series = _read_series(args)
    config = QuantizationConfig(args.quant_factor, args.rounding)
    tokens = encode(series, _filter_spec(args), config)
    req = ForecastRequest(tokens, args.horizon, args.samples, args.seed)
    main = parse_predictor(args.main, "main")
    draft = parse_predictor(args.draft, "draft")
    cfg = RaceConfig(gamma=args.gamma, min_overlap=args.min_overlap)
    outcome = race(main, draft, req, cfg)
    report = outcome.to_report()
    io_mod.save_report_json(report, args.report)
    t = report["timings"]
    print(f"branch:    {outcome.branch} (k={outcome.k}, H={args.horizon})")
    delta = "n/a" if outcome.delta_p is None else f"{outcome.delta_p:.6f}"
    print(f"delta_p:   {delta} (gamma={outcome.gamma})")
    print(
        f"timings:   draft={t['t_draft_s']:.3f}s main={t['t_main_s']:.3f}s"
        f"{' (projected)' if t['t_main_is_projected'] else ''} "
        f"check={t['t_tolerance_s'] * 1000:.2f}ms total={t['t_total_s']:.3f}s"
    )
    print(f"speedup:   {t['speedup']:.2f}x")
    print(f"report:    {args.report}")
    if args.plot:
        from .plots import render_forecast

        decoded = decode_frames(outcome.forecast.frames, tokens)
        path = render_forecast(series.values, decoded, args.plot, outcome.provenance)
        print(f"figure:    {path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = io_mod.load_config(args.config)
    dataset_dir = Path(args.datasets)
    if not dataset_dir.is_dir():
        raise InputDataError(f"dataset directory not found: {dataset_dir}")
    paths = sorted(dataset_dir.glob("*.csv"))
    if not paths:
        raise InputDataError(f"no .csv datasets under {dataset_dir}")
    out_dir = io_mod.output_dir(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = io_mod.worker_count(args.workers)

    result = bench_mod.run_bench(cfg, paths, baseline=args.baseline, workers=workers)
    metrics_path = out_dir / "metrics.csv"
    curves_path = out_dir / "curves.csv"
    summary_path = out_dir / "summary.json"
    io_mod.save_report_csv(result.rows, metrics_path)
    io_mod.save_report_csv(result.curve_rows, curves_path)
    io_mod.save_report_json(result.summary, summary_path)
    written = [metrics_path, curves_path, summary_path]
    if not args.no_figures and result.curve_rows:
        from .plots import render_metric_curves

        written.extend(render_metric_curves(result.curve_rows, out_dir))
    print(f"{len(result.rows)} result rows over {len(paths)} dataset(s)")
    for method, entry in result.summary.get("methods", {}).items():
        bits = [f"{k}={v:.4f}" for k, v in sorted(entry.items())]
        print(f"  {method:8s} " + " ".join(bits))
    for path in written:
        print(f"wrote {path}")
    if result.failures:
        for name, err in result.failures:
            print(f"FAILED {name}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="racecast",
        description=(
            "Anti-aliased token codec and draft/main racing forecaster for time series."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="encode a CSV series into a token file")
    p.add_argument("--input", required=True, help="input CSV path")
    p.add_argument("--output", required=True, help="output token file path")
    _add_codec_args(p)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("dequantize", help="decode a token file back to CSV")
    p.add_argument("--input", required=True, help="input token file path")
    p.add_argument("--output", required=True, help="output CSV path")
    p.add_argument("--value-column", default="value", help="CSV column name to write")
    p.set_defaults(func=cmd_dequantize)

    p = sub.add_parser("forecast", help="run a single predictor over a horizon")
    p.add_argument("--input", help="input CSV path (context window)")
    p.add_argument("--output", default="forecast.csv", help="forecast CSV path")
    p.add_argument("--model", default="ar:order=3", help="predictor spec (see race --help)")
    p.add_argument("--horizon", type=int, default=64)
    p.add_argument("--samples", type=int, default=20, help="sample paths")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--stream",
        action="store_true",
        help="speak the subprocess frame protocol: read one JSON request line "
        "from stdin, print one comma-separated token frame per line",
    )
    _add_codec_args(p)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("race", help="race a draft predictor against a main predictor")
    p.add_argument("--input", required=True, help="input CSV path (context window)")
    p.add_argument(
        "--main",
        default="ar:order=3,delay_ms=20",
        help="main predictor spec: kind[:key=val,...] with keys order, period, "
        "delay_ms, jitter_ms; or proc:<command> for an external process",
    )
    p.add_argument("--draft", default="ar:order=2,delay_ms=2", help="draft predictor spec")
    p.add_argument("--horizon", type=int, default=64)
    p.add_argument("--gamma", type=float, default=0.1, help="tolerance (range-normalized)")
    p.add_argument("--min-overlap", type=int, default=None, help="minimum checked prefix")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default="race_report.json", help="JSON report path")
    p.add_argument("--plot", default=None, help="optional forecast figure (PNG path)")
    _add_codec_args(p)
    p.set_defaults(func=cmd_race)

    p = sub.add_parser("bench", help="run the benchmark grid over a dataset directory")
    p.add_argument("--config", default=None, help="JSON or TOML run config")
    p.add_argument("--datasets", required=True, help="directory of CSV datasets")
    p.add_argument("--baseline", default=None, help="baseline method for relative scores")
    p.add_argument("--output-dir", default=None, help=f"default: ${io_mod.OUTPUT_DIR_ENV} or racecast-out")
    p.add_argument("--workers", type=int, default=None, help=f"default: ${io_mod.WORKERS_ENV} or 1")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figure rendering")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RacecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
