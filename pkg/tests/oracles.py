"""Independent brute-force reference implementations used by the tests.

Everything here is deliberately written the slow, obvious way (direct
summations, textbook formulas) so it shares no code path with the package.
"""

from __future__ import annotations

import cmath
import math

import numpy as np


def butterworth_magnitude(f_hz, cutoff_hz: float, order: int, sample_rate_hz: float):
    """Analytic digital Butterworth magnitude |H| via the pre-warped analog
    formula 1/sqrt(1 + (W/Wc)^(2n)) with W = tan(pi f / fs)."""
    f = np.asarray(f_hz, dtype=float)
    w = np.tan(np.pi * f / sample_rate_hz)
    wc = math.tan(math.pi * cutoff_hz / sample_rate_hz)
    return 1.0 / np.sqrt(1.0 + (w / wc) ** (2 * order))


def dft_direct(x):
    """O(N^2) discrete Fourier transform."""
    x = list(x)
    n = len(x)
    out = []
    for k in range(n):
        acc = 0j
        for m in range(n):
            acc += x[m] * cmath.exp(-2j * cmath.pi * k * m / n)
        out.append(acc)
    return np.array(out)


def idft_direct(bins):
    bins = list(bins)
    n = len(bins)
    out = []
    for m in range(n):
        acc = 0j
        for k in range(n):
            acc += bins[k] * cmath.exp(2j * cmath.pi * k * m / n)
        out.append(acc / n)
    return np.array([v.real for v in out])


def cross_correlation_peak_lag(a, b, max_lag: int) -> int:
    """Lag of the cross-correlation maximum between two equal-length arrays.

    Positive lag means ``a`` is delayed relative to ``b``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    best_lag, best_val = 0, -math.inf
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            v = float(np.dot(a[lag:], b[: len(b) - lag]))
        else:
            v = float(np.dot(a[:lag], b[-lag:]))
        if v > best_val:
            best_val, best_lag = v, lag
    return best_lag


def pinball_direct(y, y_hat, level) -> float:
    total = 0.0
    for yt, ft in zip(y, y_hat):
        if yt >= ft:
            total += 2.0 * level * (yt - ft)
        else:
            total += 2.0 * (1.0 - level) * (ft - yt)
    return total


def quantile_direct(samples_at_t, level) -> float:
    """Empirical quantile with linear interpolation between order stats."""
    xs = sorted(samples_at_t)
    n = len(xs)
    if n == 1:
        return xs[0]
    pos = level * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return xs[lo] * (1 - frac) + xs[hi] * frac


def wql_direct(truth, samples, levels) -> float:
    denom = sum(abs(v) for v in truth)
    total = 0.0
    for q in levels:
        q_path = [quantile_direct([row[t] for row in samples], q) for t in range(len(truth))]
        total += pinball_direct(truth, q_path, q) / denom
    return total / len(levels)


def median_path_direct(samples):
    return [quantile_direct([row[t] for row in samples], 0.5) for t in range(len(samples[0]))]


def mase_direct(truth, samples, context, m) -> float:
    med = median_path_direct(samples)
    num = sum(abs(a - b) for a, b in zip(truth, med)) / len(truth)
    diffs = [abs(context[i] - context[i - m]) for i in range(m, len(context))]
    return num / (sum(diffs) / len(diffs))


def mae_direct(truth, samples) -> float:
    med = median_path_direct(samples)
    return sum(abs(a - b) for a, b in zip(truth, med)) / len(truth)


def mse_direct(truth, samples) -> float:
    med = median_path_direct(samples)
    return sum((a - b) ** 2 for a, b in zip(truth, med)) / len(truth)


def geometric_mean_direct(ratios) -> float:
    prod = 1.0
    for r in ratios:
        prod *= r
    return prod ** (1.0 / len(ratios))


def yule_walker(values, order: int):
    """AR coefficients from the autocovariance (Yule-Walker equations)."""
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    n = len(x)
    gamma = [float(np.dot(x[: n - lag], x[lag:]) / n) for lag in range(order + 1)]
    r = np.array([[gamma[abs(i - j)] for j in range(order)] for i in range(order)])
    rhs = np.array(gamma[1 : order + 1])
    return np.linalg.solve(r, rhs)
