"""Uniformly sampled series container used throughout the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputDataError


@dataclass
class TimeSeries:
    """A real-valued sequence sampled at a fixed rate.

    ``timestamps`` is optional metadata carried through the pipeline; the
    numeric operations only rely on ``values`` and ``sample_rate_hz``.
    """

    values: np.ndarray
    sample_rate_hz: float = 1.0
    timestamps: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise InputDataError("series values must be one-dimensional")
        if not np.isfinite(self.sample_rate_hz) or self.sample_rate_hz <= 0:
            raise InputDataError(
                f"sample rate must be a positive finite number, got {self.sample_rate_hz}"
            )
        self.sample_rate_hz = float(self.sample_rate_hz)
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps)
            if self.timestamps.shape != self.values.shape:
                raise InputDataError(
                    "timestamps length does not match values length"
                )

    def __len__(self) -> int:
        return self.values.size

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0

    def with_values(self, values: np.ndarray) -> "TimeSeries":
        """Copy of this series with new values, keeping rate and timestamps."""
        return TimeSeries(values, self.sample_rate_hz, self.timestamps)
