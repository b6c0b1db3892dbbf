"""Shared fixtures and synthetic signal generators."""

from __future__ import annotations

import numpy as np
import pytest

from racecast import TimeSeries


def band_limited_mixture(
    rng: np.random.Generator,
    n: int,
    sample_rate_hz: float,
    band: tuple[float, float],
    n_components: int = 4,
    amplitude: float = 1.0,
) -> np.ndarray:
    """Sum of random-amplitude, random-phase sinusoids strictly inside a band.

    All power sits at the drawn frequencies, so band concentration is exact
    up to spectral leakage.
    """
    lo, hi = band
    freqs = rng.uniform(lo, hi, n_components)
    amps = amplitude * rng.uniform(0.5, 1.0, n_components)
    phases = rng.uniform(0, 2 * np.pi, n_components)
    t = np.arange(n) / sample_rate_hz
    out = np.zeros(n)
    for f, a, p in zip(freqs, amps, phases):
        out += a * np.sin(2 * np.pi * f * t + p)
    return out


def noisy_low_signal(
    seed: int,
    n: int = 2048,
    sample_rate_hz: float = 100.0,
    cutoff_hz: float = 10.0,
    noise_amplitude: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """(low-band signal, high-band noise) pair straddling the cutoff."""
    rng = np.random.default_rng(seed)
    s = band_limited_mixture(rng, n, sample_rate_hz, (0.5, 0.7 * cutoff_hz))
    e = band_limited_mixture(
        rng, n, sample_rate_hz, (2.0 * cutoff_hz, 0.9 * sample_rate_hz / 2), amplitude=noise_amplitude
    )
    return s, e


def ar_series(
    seed: int,
    n: int,
    coefs: tuple[float, ...] = (0.6, 0.25),
    sigma: float = 0.2,
    intercept: float = 0.0,
    burn_in: int = 200,
) -> np.ndarray:
    """Simulate a stationary AR(p) process."""
    rng = np.random.default_rng(seed)
    p = len(coefs)
    total = n + burn_in
    x = np.zeros(total)
    eps = rng.normal(0.0, sigma, total)
    for t in range(p, total):
        x[t] = intercept + sum(c * x[t - 1 - j] for j, c in enumerate(coefs)) + eps[t]
    return x[burn_in:]


def forecastable_noisy_dataset(
    seed: int,
    context_length: int = 480,
    horizon: int = 48,
    sample_rate_hz: float = 100.0,
    noise_amplitude: float = 0.6,
    pole_radius: float = 0.995,
    noise_floor: float = 0.05,
) -> np.ndarray:
    """Slow stochastic oscillation plus a high-band interference episode.

    The predictable part is a long-memory AR(2) resonance (pole radius near
    1) at 1-2.5 Hz. The interference is a mixture of 25-45 Hz tones whose
    envelope subsides shortly before the forecast origin, the way a noise
    burst ends in sensor data; that keeps the comparison between encodings
    about fit quality rather than about boundary effects of the padding,
    which hit both encodings' anchors alike.
    """
    rng = np.random.default_rng(seed)
    n = context_length + horizon
    f1 = rng.uniform(1.0, 2.5)
    theta = 2 * np.pi * f1 / sample_rate_hz
    a1, a2 = 2 * pole_radius * np.cos(theta), -(pole_radius**2)
    burn = 1500
    sig = np.zeros(n + burn)
    eps = rng.normal(0.0, 1.0, n + burn)
    for t in range(2, n + burn):
        sig[t] = a1 * sig[t - 1] + a2 * sig[t - 2] + eps[t]
    sig = sig[burn:]
    sig /= np.std(sig)
    noise = band_limited_mixture(
        rng, n, sample_rate_hz, (25.0, 45.0), n_components=8
    )
    noise *= noise_amplitude / np.std(noise)
    env = np.full(n, noise_floor)
    env[: context_length - 60] = 1.0
    env[context_length - 60 : context_length - 10] = np.linspace(1.0, noise_floor, 50)
    return sig + noise * env + 5.0


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240831)


def make_series(values, fs: float = 1.0) -> TimeSeries:
    return TimeSeries(np.asarray(values, dtype=float), fs)
