"""Benchmark grid: {denoised encoding on/off} x {racing on/off} per dataset.

Each dataset is windowed into context and held-out truth, encoded with and
without the anti-aliasing filter, forecast solo and raced, and scored. Rows
come out per cell at the full horizon plus curve rows at intermediate
horizons for plotting. Racing cells pin the splice point from the nominal
latency ratio so repeated runs are byte-identical apart from timing.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .codec import decode_frames, encode
from .errors import RacecastError, ExecutionError
from .forecast import (
    ForecastRequest,
    PredictorHandle,
    make_reference_predictor,
    predict_stream,
    with_simulated_latency,
)
from .io import DatasetSpec, PredictorSettings, RunConfig, load_csv
from .metrics import EvalInput, aggregate_relative, evaluate
from .race import race
from .series import TimeSeries

log = logging.getLogger("racecast.bench")

GRID = (
    ("aaqm+rd", True, True),
    ("aaqm", True, False),
    ("rd", False, True),
    ("none", False, False),
)

HORIZON_FRACTIONS = (0.25, 0.5, 0.75, 1.0)


@dataclass
class BenchResult:
    rows: list[dict]
    curve_rows: list[dict]
    summary: dict
    failures: list[tuple[str, str]]


def build_predictor(settings: PredictorSettings, role: str, model_id: str) -> PredictorHandle:
    handle = make_reference_predictor(
        settings.kind,
        model_id=model_id,
        role=role,
        period=settings.period,
        order=settings.order,
    )
    if settings.per_frame_delay > 0 or settings.jitter > 0:
        handle = with_simulated_latency(handle, settings.per_frame_delay, settings.jitter)
    return handle


def _pinned_prefix(cfg: RunConfig, horizon: int) -> int:
    """Deterministic splice point from the nominal per-frame latencies."""
    main_delay = cfg.predictors.main.per_frame_delay
    draft_delay = cfg.predictors.draft.per_frame_delay
    min_overlap = cfg.race.effective_min_overlap(horizon)
    if main_delay <= 0:
        return min_overlap
    k = int(horizon * draft_delay / main_delay)
    return max(min_overlap, min(k, horizon))


def run_dataset(cfg: RunConfig, spec: DatasetSpec, name: str) -> tuple[list[dict], list[dict]]:
    """All four grid cells for one dataset."""
    series = load_csv(spec)
    cl, horizon = spec.context_length, spec.horizon
    context = TimeSeries(series.values[:cl], spec.sample_rate_hz)
    truth = series.values[cl : cl + horizon]

    cuts = sorted({max(1, int(round(f * horizon))) for f in HORIZON_FRACTIONS})
    rows: list[dict] = []
    curve_rows: list[dict] = []
    for method, use_filter, use_race in GRID:
        filter_spec = cfg.filter.spec_for(spec.sample_rate_hz) if use_filter else None
        tokens = encode(context, filter_spec, cfg.quant)
        req = ForecastRequest(
            context=tokens,
            horizon=horizon,
            num_samples=cfg.eval.num_samples,
            temperature_seed=cfg.eval.seed,
        )
        main = build_predictor(cfg.predictors.main, "main", "bench-main")
        if use_race:
            draft = build_predictor(cfg.predictors.draft, "draft", "bench-draft")
            race_cfg = replace(cfg.race, pinned_prefix=_pinned_prefix(cfg, horizon))
            outcome = race(main, draft, req, race_cfg)
            result = outcome.forecast
            latency = outcome.t_total
        else:
            result = predict_stream(main, req)
            latency = result.duration
        if not result.complete:
            raise ExecutionError(f"{name}/{method}: forecast incomplete: {result.error}")
        decoded = decode_frames(result.frames, tokens)
        for h in cuts:
            report = evaluate(
                EvalInput(truth[:h], decoded[:, :h], context.values, spec.season_length),
                latency_seconds=latency if h == horizon else float("nan"),
                quantile_levels=cfg.eval.quantile_levels,
            )
            row = {
                "dataset": name,
                "method": method,
                "horizon": h,
                "wql": report.wql,
                "mase": report.mase,
                "mae": report.mae,
                "mse": report.mse,
                "latency_s": report.latency_seconds if h == horizon else "",
            }
            curve_rows.append(row)
            if h == horizon:
                rows.append(row)
    return rows, curve_rows


def summarize(rows: list[dict], baseline: str) -> dict:
    """Aggregate relative scores and mean latency per method vs the baseline."""
    methods = sorted({r["method"] for r in rows})
    datasets = sorted({r["dataset"] for r in rows})
    by_key = {(r["dataset"], r["method"]): r for r in rows}
    summary: dict = {"baseline": baseline, "methods": {}}
    for method in methods:
        entry: dict = {}
        for metric in ("wql", "mase"):
            pairs = []
            for ds in datasets:
                row = by_key.get((ds, method))
                base = by_key.get((ds, baseline))
                if row is None or base is None:
                    continue
                if row[metric] > 0 and base[metric] > 0:
                    pairs.append((row[metric], base[metric]))
            if pairs:
                entry[f"agg_relative_{metric}"] = aggregate_relative(pairs)
        lat = [
            float(r["latency_s"])
            for r in rows
            if r["method"] == method and r["latency_s"] != ""
        ]
        if lat:
            entry["mean_latency_s"] = float(np.mean(lat))
        summary["methods"][method] = entry
    base_lat = summary["methods"].get(baseline, {}).get("mean_latency_s")
    if base_lat:
        for method, entry in summary["methods"].items():
            if "mean_latency_s" in entry and entry["mean_latency_s"] > 0:
                entry["latency_speedup_vs_baseline"] = base_lat / entry["mean_latency_s"]
    return summary


def run_bench(
    cfg: RunConfig,
    dataset_paths: list[Path],
    baseline: str | None = None,
    workers: int = 1,
) -> BenchResult:
    """Run the full grid over every dataset; failures skip the dataset."""
    baseline = baseline or cfg.eval.baseline
    if baseline not in {g[0] for g in GRID}:
        raise RacecastError(f"unknown baseline method {baseline!r}")
    specs = [(p.stem, cfg.datasets.spec_for(p)) for p in sorted(dataset_paths)]
    rows: list[dict] = []
    curve_rows: list[dict] = []
    failures: list[tuple[str, str]] = []

    def job(item: tuple[str, DatasetSpec]):
        name, spec = item
        return name, run_dataset(cfg, spec, name)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = []
            futs = {pool.submit(job, item): item[0] for item in specs}
            for fut, name in futs.items():
                try:
                    outcomes.append(fut.result())
                except RacecastError as exc:
                    log.error("dataset %s failed: %s", name, exc)
                    failures.append((name, str(exc)))
        outcomes.sort(key=lambda t: t[0])
        for _, (r, c) in outcomes:
            rows.extend(r)
            curve_rows.extend(c)
    else:
        for item in specs:
            try:
                _, (r, c) = job(item)
                rows.extend(r)
                curve_rows.extend(c)
            except RacecastError as exc:
                log.error("dataset %s failed: %s", item[0], exc)
                failures.append((item[0], str(exc)))

    rows.sort(key=lambda r: (r["dataset"], r["method"], r["horizon"]))
    curve_rows.sort(key=lambda r: (r["dataset"], r["method"], r["horizon"]))
    summary = summarize(rows, baseline) if rows else {"baseline": baseline, "methods": {}}
    return BenchResult(rows=rows, curve_rows=curve_rows, summary=summary, failures=failures)
