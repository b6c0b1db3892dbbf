"""Figure rendering for bench and race reports (PNG files, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METRIC_LABELS = {
    "wql": "weighted quantile loss",
    "mase": "mean absolute scaled error",
    "mae": "mean absolute error",
    "mse": "mean squared error",
}


def render_metric_curves(
    curve_rows: list[dict],
    out_dir: str | Path,
    metrics: tuple[str, ...] = ("wql", "mase"),
) -> list[Path]:
    """One PNG per metric: metric versus horizon, one line per method.

    When several datasets are present the per-method line is the geometric
    mean of the metric across datasets at each horizon.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    methods = sorted({row["method"] for row in curve_rows})
    horizons = sorted({int(row["horizon"]) for row in curve_rows})
    written: list[Path] = []
    for metric in metrics:
        fig, ax = plt.subplots(figsize=(6.0, 3.8))
        for method in methods:
            ys = []
            for h in horizons:
                vals = [
                    float(row[metric])
                    for row in curve_rows
                    if row["method"] == method and int(row["horizon"]) == h
                ]
                vals = [v for v in vals if v > 0]
                ys.append(float(np.exp(np.mean(np.log(vals)))) if vals else np.nan)
            ax.plot(horizons, ys, marker="o", label=method)
        ax.set_xlabel("horizon")
        ax.set_ylabel(_METRIC_LABELS.get(metric, metric))
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"fig_{metric}_vs_horizon.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def render_forecast(
    context_values: np.ndarray,
    decoded_frames: np.ndarray,
    out_path: str | Path,
    provenance: list[str] | None = None,
) -> Path:
    """Context plus forecast fan chart; the handover point is marked."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    n_ctx = len(context_values)
    horizon = decoded_frames.shape[1]
    t_ctx = np.arange(n_ctx)
    t_fc = np.arange(n_ctx, n_ctx + horizon)
    med = np.median(decoded_frames, axis=0)
    lo = np.quantile(decoded_frames, 0.1, axis=0)
    hi = np.quantile(decoded_frames, 0.9, axis=0)

    fig, ax = plt.subplots(figsize=(7.0, 3.8))
    ax.plot(t_ctx, context_values, color="black", lw=0.9, label="context")
    ax.fill_between(t_fc, lo, hi, color="tab:orange", alpha=0.25, label="10-90% band")
    ax.plot(t_fc, med, color="tab:orange", lw=1.4, label="median forecast")
    ax.axvline(n_ctx - 0.5, color="red", lw=0.8, ls="--")
    if provenance and "draft" in provenance and "main" in provenance:
        handover = n_ctx + provenance.index("draft") - 0.5
        ax.axvline(handover, color="tab:blue", lw=0.8, ls=":", label="main/draft handover")
    ax.set_xlabel("step")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
