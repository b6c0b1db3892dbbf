"""Low-pass Butterworth design, zero-phase filtering, and spectral utilities.

The filter is designed from the analog Butterworth prototype: poles on the
unit circle in the left half plane, scaled by the pre-warped cutoff, then
mapped to the z-plane with the bilinear transform. Filtering runs as a
cascade of second-order sections, which stays well conditioned at high
orders and narrow cutoffs where the expanded direct-form polynomials lose
precision. The expanded ``b``/``a`` vectors are still produced for
interoperability and for hand-built coefficient sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputDataError
from .series import TimeSeries

# Direct-form coefficients above this order are badly conditioned at extreme
# cutoffs, and nothing in this pipeline needs them.
MAX_ORDER = 12


@dataclass(frozen=True)
class FilterSpec:
    """Design parameters for a low-pass Butterworth filter."""

    order: int
    cutoff_hz: float
    sample_rate_hz: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.order, (int, np.integer)) or isinstance(self.order, bool):
            raise ConfigurationError(f"filter order must be an integer, got {self.order!r}")
        if self.order < 1:
            raise ConfigurationError(f"filter order must be >= 1, got {self.order}")
        if self.order > MAX_ORDER:
            raise ConfigurationError(
                f"filter order {self.order} exceeds the supported maximum {MAX_ORDER}"
            )
        for name in ("cutoff_hz", "sample_rate_hz"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be finite, got {v!r}")
        if self.sample_rate_hz <= 0:
            raise ConfigurationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not 0 < self.cutoff_hz < self.sample_rate_hz / 2:
            raise ConfigurationError(
                f"cutoff_hz must lie strictly between 0 and the Nyquist frequency "
                f"{self.sample_rate_hz / 2}, got {self.cutoff_hz}"
            )

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0


@dataclass
class FilterCoefficients:
    """Rational transfer-function coefficients, plus design byproducts.

    ``b`` and ``a`` are the normalized (a[0] = 1) direct-form vectors.
    When produced by :func:`design_butterworth`, ``poles``/``zeros``/``gain``
    hold the exact z-plane design and ``sections`` the biquad cascade the
    filtering actually uses; hand-built instances may carry only ``b``/``a``.
    """

    b: np.ndarray
    a: np.ndarray
    poles: np.ndarray | None = field(default=None, repr=False)
    zeros: np.ndarray | None = field(default=None, repr=False)
    gain: float | None = field(default=None, repr=False)
    sections: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.b = np.asarray(self.b, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64)
        if self.b.ndim != 1 or self.a.ndim != 1:
            raise ConfigurationError("coefficient vectors must be one-dimensional")
        if len(self.b) != len(self.a):
            raise ConfigurationError("b and a must have the same length")
        if len(self.a) < 2:
            raise ConfigurationError("need at least a first-order filter")
        if not (np.isfinite(self.b).all() and np.isfinite(self.a).all()):
            raise ConfigurationError("coefficients must be finite")
        if self.a[0] == 0:
            raise ConfigurationError("a[0] must be nonzero")
        if self.a[0] != 1.0:
            self.b = self.b / self.a[0]
            self.a = self.a / self.a[0]

    @property
    def order(self) -> int:
        return len(self.a) - 1

    def pole_magnitudes(self) -> np.ndarray:
        """Moduli of the filter poles (exact design poles when available)."""
        if self.poles is not None:
            return np.abs(self.poles)
        return np.abs(np.roots(self.a))

    def is_stable(self, margin: float = 0.0) -> bool:
        mags = self.pole_magnitudes()
        return bool(mags.size == 0 or mags.max() < 1.0 - margin)


def design_butterworth(spec: FilterSpec) -> FilterCoefficients:
    """Design a digital low-pass Butterworth filter.

    The magnitude response is maximally flat in the passband: it equals 1
    at DC, decreases monotonically, and passes through 1/sqrt(2) at the
    cutoff (the -3 dB point), which the bilinear transform with frequency
    pre-warping places exactly.
    """
    n = spec.order
    k = np.arange(1, n + 1)
    # Analog prototype poles: unit circle, left half plane.
    theta = np.pi / 2.0 + np.pi * (2 * k - 1) / (2 * n)
    warped = math.tan(math.pi * spec.cutoff_hz / spec.sample_rate_hz)
    p_analog = warped * np.exp(1j * theta)
    # Bilinear transform with T = 2; the n prototype zeros at infinity land
    # on z = -1.
    poles = (1.0 + p_analog) / (1.0 - p_analog)
    zeros = -np.ones(n)

    sections = _cascade_sections(poles)
    a = np.atleast_1d(np.poly(poles)).real
    b = np.atleast_1d(np.poly(zeros)).real
    b *= a.sum() / b.sum()  # unit gain at DC
    gain = float(np.prod(sections[:, 0]))
    return FilterCoefficients(b=b, a=a, poles=poles, zeros=zeros, gain=gain, sections=sections)


def _cascade_sections(poles: np.ndarray) -> np.ndarray:
    """Split conjugate pole pairs into biquad rows [b0 b1 b2 a1 a2].

    Each section gets a pair of zeros at z = -1 (one for the odd real-pole
    section) and is normalized to unit DC gain, so intermediate signals stay
    on the scale of the input.
    """
    n = len(poles)
    rows = []
    for i in range(n // 2):
        p = poles[i]  # conjugate partner is poles[n - 1 - i]
        a1 = -2.0 * p.real
        a2 = abs(p) ** 2
        g = (1.0 + a1 + a2) / 4.0
        rows.append([g, 2.0 * g, g, a1, a2])
    if n % 2:
        pr = poles[n // 2].real
        g = (1.0 - pr) / 2.0
        rows.append([g, g, 0.0, -pr, 0.0])
    return np.asarray(rows, dtype=np.float64)


def frequency_response(
    coeffs: FilterCoefficients, freqs_hz: np.ndarray | float, sample_rate_hz: float
) -> np.ndarray:
    """Complex response H(e^{j w}) at the given frequencies (single pass).

    Uses the pole-zero product when the design carries it (robust at any
    supported order), otherwise evaluates the direct-form polynomial ratio.
    """
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    ew = np.exp(1j * 2.0 * np.pi * f / sample_rate_hz)
    if coeffs.poles is not None and coeffs.zeros is not None and coeffs.gain is not None:
        h = np.full(ew.shape, coeffs.gain, dtype=np.complex128)
        for z in coeffs.zeros:
            h *= ew - z
        for p in coeffs.poles:
            h /= ew - p
    else:
        zinv = 1.0 / ew
        num = np.zeros(ew.shape, dtype=np.complex128)
        den = np.zeros(ew.shape, dtype=np.complex128)
        for bk in coeffs.b[::-1]:
            num = num * zinv + bk
        for ak in coeffs.a[::-1]:
            den = den * zinv + ak
        h = num / den
    return h if np.ndim(freqs_hz) else h[0]


def _steady_state(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Initial filter state producing a step-invariant response.

    Solves z = A z + B for the transposed direct-form II state so that a
    constant input yields a constant output from the first sample.
    """
    n = len(a) - 1
    A = np.zeros((n, n))
    A[:, 0] = -a[1:]
    A[:-1, 1:] = np.eye(n - 1)
    B = b[1:] - a[1:] * b[0]
    return np.linalg.solve(np.eye(n) - A, B)


def _lfilter(b: np.ndarray, a: np.ndarray, x: np.ndarray, zi: np.ndarray) -> np.ndarray:
    """Apply the difference equation in transposed direct form II."""
    n = len(a) - 1
    bl = b.tolist()
    al = a.tolist()
    z = zi.tolist()
    b0 = bl[0]
    out = np.empty(len(x))
    for i, xi in enumerate(x.tolist()):
        yi = b0 * xi + z[0]
        for j in range(n - 1):
            z[j] = bl[j + 1] * xi + z[j + 1] - al[j + 1] * yi
        z[n - 1] = bl[n] * xi - al[n] * yi
        out[i] = yi
    return out


def _biquad(row: np.ndarray, x: np.ndarray, zi: np.ndarray) -> np.ndarray:
    b0, b1, b2, a1, a2 = row.tolist()
    z0, z1 = zi.tolist()
    out = np.empty(len(x))
    for i, xi in enumerate(x.tolist()):
        yi = b0 * xi + z0
        z0 = b1 * xi + z1 - a1 * yi
        z1 = b2 * xi - a2 * yi
        out[i] = yi
    return out


def _single_pass(coeffs: FilterCoefficients, x: np.ndarray) -> np.ndarray:
    if coeffs.sections is not None:
        y = x
        for row in coeffs.sections:
            zi = _steady_state(
                np.array([row[0], row[1], row[2]]), np.array([1.0, row[3], row[4]])
            )
            y = _biquad(row, y, zi * y[0])
        return y
    zi = _steady_state(coeffs.b, coeffs.a)
    return _lfilter(coeffs.b, coeffs.a, x, zi * x[0])


def filtfilt(coeffs: FilterCoefficients, x: TimeSeries) -> TimeSeries:
    """Zero-phase filtering: forward pass, backward pass.

    The effective magnitude response is the square of the single-pass
    response and the phase response is identically zero, so features keep
    their positions in time. Edge transients are suppressed by odd
    (point-reflected) extension of length 3 * (order + 1) at both ends and
    by starting each pass from its step steady state.
    """
    values = x.values
    if not np.isfinite(values).all():
        raise InputDataError("cannot filter a series containing non-finite samples")
    if not coeffs.is_stable():
        raise ConfigurationError("filter coefficients are unstable")
    padlen = 3 * (coeffs.order + 1)
    if len(values) <= padlen:
        raise InputDataError(
            f"series of length {len(values)} is too short for edge padding of {padlen}"
        )
    ext = np.concatenate(
        (
            2.0 * values[0] - values[padlen:0:-1],
            values,
            2.0 * values[-1] - values[-2 : -padlen - 2 : -1],
        )
    )
    y = _single_pass(coeffs, ext)
    y = _single_pass(coeffs, y[::-1])[::-1]
    return x.with_values(y[padlen:-padlen])


@dataclass
class Spectrum:
    """DFT of a real sequence with its bin frequencies."""

    bins: np.ndarray
    bin_freq_hz: np.ndarray
    sample_rate_hz: float = 1.0

    def __post_init__(self) -> None:
        self.bins = np.asarray(self.bins, dtype=np.complex128)
        self.bin_freq_hz = np.asarray(self.bin_freq_hz, dtype=np.float64)
        if self.bins.shape != self.bin_freq_hz.shape:
            raise InputDataError("bins and bin_freq_hz must have the same length")

    def __len__(self) -> int:
        return self.bins.size

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0


def dft(x: TimeSeries) -> Spectrum:
    """Discrete Fourier transform of the series."""
    if len(x) == 0:
        raise InputDataError("cannot transform an empty series")
    n = len(x)
    bins = np.fft.fft(x.values)
    freqs = np.arange(n) * x.sample_rate_hz / n
    return Spectrum(bins, freqs, x.sample_rate_hz)


def idft(s: Spectrum) -> TimeSeries:
    """Inverse DFT; the result is the real part of the reconstruction."""
    if len(s) == 0:
        raise InputDataError("cannot invert an empty spectrum")
    values = np.fft.ifft(s.bins).real
    return TimeSeries(values, s.sample_rate_hz)


def _band_mask(s: Spectrum, band: tuple[float, float] | None) -> np.ndarray:
    if band is None:
        return np.ones(len(s), dtype=bool)
    lo, hi = float(band[0]), float(band[1])
    if not (0.0 <= lo <= hi):
        raise InputDataError(f"invalid frequency band ({lo}, {hi})")
    if hi > s.nyquist_hz * (1 + 1e-12):
        raise InputDataError(
            f"band upper edge {hi} Hz exceeds the Nyquist frequency {s.nyquist_hz} Hz"
        )
    # Fold the upper half of the DFT back onto baseband frequencies.
    folded = np.minimum(s.bin_freq_hz, s.sample_rate_hz - s.bin_freq_hz)
    return (folded >= lo) & (folded <= hi)


def band_power(s: Spectrum, band: tuple[float, float] | None = None) -> float:
    """Sum of |X[k]|^2 over the bins whose folded frequency lies in ``band``."""
    mask = _band_mask(s, band)
    return float(np.sum(np.abs(s.bins[mask]) ** 2))


def snr(
    signal_spectrum: Spectrum,
    noise_spectrum: Spectrum,
    band: tuple[float, float] | None = None,
) -> float:
    """Ratio of signal power to noise power over a frequency band.

    With ``band=None`` this is the plain wide-band ratio; restricting the
    band to the filter passband (and passing spectra of filtered signals)
    gives the post-filtering ratio. A zero noise power yields ``inf``.
    """
    if len(signal_spectrum) != len(noise_spectrum):
        raise InputDataError("signal and noise spectra must have the same length")
    p_noise = band_power(noise_spectrum, band)
    p_signal = band_power(signal_spectrum, band)
    if p_noise == 0.0:
        return math.inf
    return p_signal / p_noise
