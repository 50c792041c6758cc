"""Barometric relative-height estimation and weather drift correction.

Heights come from the international pressure equation applied to a
reference pressure captured at the last building entry and the device's
current pressure. The reference is the minimum pressure in a window
around the detected entry, which absorbs the GPS lag between the physical
and the detected transition.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sensor_data import SensorSession

PRESSURE_SCALE_M = 44330.0
PRESSURE_EXPONENT = 1.0 / 5.255

DEFAULT_REFERENCE_WINDOW_RADIUS = 15
MAX_WEATHER_GAP_S = 120.0

WEATHER_MODE_ABSOLUTE = "absolute"
WEATHER_MODE_SIGNED = "signed"


class CoverageError(ValueError):
    """The weather series does not cover a needed device timestamp."""


def pressure_to_height(p0: float, p1: float) -> float:
    """Relative height in meters from reference pressure p0 to pressure p1.

    Positive when p1 < p0, i.e. the device ascended relative to the
    reference point.
    """
    if not (math.isfinite(p0) and p0 > 0):
        raise ValueError(f"reference pressure must be positive and finite, got {p0!r}")
    if not (math.isfinite(p1) and p1 > 0):
        raise ValueError(f"current pressure must be positive and finite, got {p1!r}")
    return PRESSURE_SCALE_M * (1.0 - (p1 / p0) ** PRESSURE_EXPONENT)


def height_to_pressure(p0: float, height: float) -> float:
    """Inverse of `pressure_to_height`: pressure at `height` meters above p0."""
    if not (math.isfinite(p0) and p0 > 0):
        raise ValueError(f"reference pressure must be positive and finite, got {p0!r}")
    if not math.isfinite(height):
        raise ValueError(f"height must be finite, got {height!r}")
    base = 1.0 - height / PRESSURE_SCALE_M
    if base <= 0:
        raise ValueError(f"height {height} m is outside the model's valid range")
    return p0 * base ** (1.0 / PRESSURE_EXPONENT)


def select_reference_pressure(
    session: SensorSession,
    entry_index: int,
    window_radius: int = DEFAULT_REFERENCE_WINDOW_RADIUS,
) -> float:
    """Minimum pressure in a window around the detected entry index."""
    if not 0 <= entry_index < len(session):
        raise ValueError(
            f"entry_index {entry_index} outside session of length {len(session)}"
        )
    if window_radius < 0:
        raise ValueError(f"window_radius must be non-negative, got {window_radius}")
    lo = max(0, entry_index - window_radius)
    hi = min(len(session), entry_index + window_radius + 1)
    return float(session.pressures[lo:hi].min())


@dataclass(frozen=True)
class HeightEstimate:
    """One relative-height measurement anchored at a building entry."""

    p0: float
    p1: float
    m_delta: float
    entry_index: int


def estimate_height(
    session: SensorSession,
    entry_index: int,
    window_radius: int = DEFAULT_REFERENCE_WINDOW_RADIUS,
) -> HeightEstimate:
    """Reference-vs-current height displacement for one session."""
    p0 = select_reference_pressure(session, entry_index, window_radius)
    p1 = float(session.pressures[-1])
    return HeightEstimate(
        p0=p0,
        p1=p1,
        m_delta=pressure_to_height(p0, p1),
        entry_index=entry_index,
    )


@dataclass(frozen=True)
class WeatherSeries:
    """External station pressures sampled against the device clock."""

    timestamps: np.ndarray
    pressures: np.ndarray

    def __post_init__(self) -> None:
        if self.timestamps.shape != self.pressures.shape or self.timestamps.ndim != 1:
            raise ValueError("timestamps and pressures must be equal-length 1-D arrays")
        if len(self.timestamps) == 0:
            raise CoverageError("weather series is empty")
        if np.any(np.diff(self.timestamps) < 0):
            raise ValueError("weather timestamps must be non-decreasing")
        if np.any(self.pressures <= 0):
            raise ValueError("weather pressures must be positive")
        self.timestamps.setflags(write=False)
        self.pressures.setflags(write=False)

    @classmethod
    def from_csv(cls, path: str | Path) -> "WeatherSeries":
        stamps = []
        values = []
        with open(path, "r", encoding="utf-8", newline="") as source:
            for row in csv.reader(source):
                if not row or row[0].strip().startswith("#"):
                    continue
                if row[0].strip().lower() in ("timestamp", "unix_timestamp"):
                    continue
                stamps.append(float(row[0]))
                values.append(float(row[1]))
        return cls(
            timestamps=np.array(stamps, dtype=np.float64),
            pressures=np.array(values, dtype=np.float64),
        )

    def nearest(self, timestamp: float) -> tuple[float, float]:
        """(gap seconds, pressure) of the sample closest to `timestamp`."""
        gaps = np.abs(self.timestamps - timestamp)
        idx = int(np.argmin(gaps))
        return float(gaps[idx]), float(self.pressures[idx])


def weather_adjust(
    device_timestamps: np.ndarray,
    device_pressures: np.ndarray,
    weather: WeatherSeries,
    mode: str = WEATHER_MODE_ABSOLUTE,
    max_gap_s: float = MAX_WEATHER_GAP_S,
) -> np.ndarray:
    """Correct device pressures for ambient drift using a station series.

    The "absolute" mode adds |w_i - w_0| to each device reading, which can
    only cancel drift that moves the station reading downward; the
    "signed" mode adds (w_0 - w_i) and corrects drift in both directions.
    Station samples are matched by nearest timestamp; a gap above
    `max_gap_s` at any needed timestamp raises CoverageError.
    """
    if mode not in (WEATHER_MODE_ABSOLUTE, WEATHER_MODE_SIGNED):
        raise ValueError(f"mode must be 'absolute' or 'signed', got {mode!r}")
    stamps = np.asarray(device_timestamps, dtype=np.float64)
    pressures = np.asarray(device_pressures, dtype=np.float64)
    if stamps.shape != pressures.shape:
        raise ValueError("device timestamps and pressures must align")

    gap0, w0 = weather.nearest(stamps[0])
    if gap0 > max_gap_s:
        raise CoverageError(
            f"no weather sample within {max_gap_s} s of device timestamp {stamps[0]}"
        )
    adjusted = np.empty_like(pressures)
    for i, (t, p) in enumerate(zip(stamps, pressures)):
        gap, w = weather.nearest(t)
        if gap > max_gap_s:
            raise CoverageError(f"no weather sample within {max_gap_s} s of device timestamp {t}")
        if mode == WEATHER_MODE_ABSOLUTE:
            adjusted[i] = abs(w - w0) + p
        else:
            adjusted[i] = p + (w0 - w)
    return adjusted
