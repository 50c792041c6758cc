"""Sensor log schema, CSV parsing/serialization, and derived signals.

A session is a 1 Hz time-series of the six monitored signals: barometric
pressure, GPS vertical accuracy, GPS horizontal accuracy, GPS speed, radio
RSSI, and total magnetometer reading. GPS fields use -1 as the "no fix"
sentinel; the indoor label, when present, is 0 (outdoors) or 1 (indoors).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

import numpy as np

NO_FIX = -1.0

# Canonical CSV column order. Magnet components may be replaced by a single
# `magnet_total` column.
CSV_COLUMNS = (
    "timestamp",
    "rssi",
    "gps_vertical_acc",
    "gps_horizontal_acc",
    "gps_speed",
    "magnet_x",
    "magnet_y",
    "magnet_z",
    "pressure",
    "indoor",
)
REQUIRED_COLUMNS = (
    "timestamp",
    "rssi",
    "gps_vertical_acc",
    "gps_horizontal_acc",
    "gps_speed",
    "pressure",
)
MAGNET_COMPONENT_COLUMNS = ("magnet_x", "magnet_y", "magnet_z")


class SchemaError(ValueError):
    """A log file is missing required columns or is structurally unusable."""


class OrderingError(ValueError):
    """Timestamps in a log file are not strictly increasing."""


def magnet_total(x: float, y: float, z: float) -> float:
    """Total magnetic field strength from the three-axis components."""
    for name, value in (("x", x), ("y", y), ("z", z)):
        if not math.isfinite(value):
            raise ValueError(f"magnet component {name} is not finite: {value!r}")
    return math.sqrt(x * x + y * y + z * z)


@dataclass(frozen=True)
class SensorReading:
    """One 1 Hz sample of the monitored signals.

    `magnet_total` is the derived total field strength; the raw components
    are kept when the source provided them. `indoor` is the optional ground
    truth label (0 outdoors, 1 indoors).
    """

    timestamp: int
    pressure: float
    gps_vertical_acc: float
    gps_horizontal_acc: float
    gps_speed: float
    rssi: float
    magnet_total: float
    magnet_x: float | None = None
    magnet_y: float | None = None
    magnet_z: float | None = None
    indoor: int | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.pressure) and self.pressure > 0):
            raise ValueError(f"pressure must be positive, got {self.pressure!r}")
        if not (self.gps_speed == NO_FIX or self.gps_speed >= 0):
            raise ValueError(f"gps_speed must be -1 (no fix) or >= 0, got {self.gps_speed!r}")
        if self.indoor not in (None, 0, 1):
            raise ValueError(f"indoor label must be absent, 0 or 1, got {self.indoor!r}")

    @classmethod
    def from_components(
        cls,
        timestamp: int,
        pressure: float,
        gps_vertical_acc: float,
        gps_horizontal_acc: float,
        gps_speed: float,
        rssi: float,
        magnet_x: float,
        magnet_y: float,
        magnet_z: float,
        indoor: int | None = None,
    ) -> "SensorReading":
        """Build a reading with `magnet_total` derived from the components."""
        return cls(
            timestamp=timestamp,
            pressure=pressure,
            gps_vertical_acc=gps_vertical_acc,
            gps_horizontal_acc=gps_horizontal_acc,
            gps_speed=gps_speed,
            rssi=rssi,
            magnet_total=magnet_total(magnet_x, magnet_y, magnet_z),
            magnet_x=magnet_x,
            magnet_y=magnet_y,
            magnet_z=magnet_z,
            indoor=indoor,
        )

    @property
    def has_components(self) -> bool:
        return None not in (self.magnet_x, self.magnet_y, self.magnet_z)


@dataclass(frozen=True)
class ParseReport:
    """Non-fatal findings from parsing one log file.

    Row indices are 0-based over the data rows (header excluded).
    """

    rejected_rows: tuple[int, ...] = ()
    gap_after_rows: tuple[int, ...] = ()
    magnet_mismatch_rows: tuple[int, ...] = ()


@dataclass(frozen=True)
class SensorSession:
    """An immutable, strictly time-ordered sequence of readings."""

    session_id: str
    readings: tuple[SensorReading, ...]
    building: str | None = None
    parse_report: ParseReport | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.readings:
            raise ValueError("a session must contain at least one reading")
        stamps = [r.timestamp for r in self.readings]
        for i in range(1, len(stamps)):
            if stamps[i] <= stamps[i - 1]:
                raise OrderingError(
                    f"timestamps must be strictly increasing; row {i} has "
                    f"{stamps[i]} after {stamps[i - 1]}"
                )

    def __len__(self) -> int:
        return len(self.readings)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp for r in self.readings], dtype=np.int64)

    @property
    def pressures(self) -> np.ndarray:
        return np.array([r.pressure for r in self.readings], dtype=np.float64)

    @property
    def labels(self) -> tuple[int | None, ...]:
        return tuple(r.indoor for r in self.readings)

    def feature_matrix(self) -> np.ndarray:
        """Per-timestep feature rows (pressure, GV, GH, GS, rssi, magnet_total)."""
        return np.array(
            [
                (
                    r.pressure,
                    r.gps_vertical_acc,
                    r.gps_horizontal_acc,
                    r.gps_speed,
                    r.rssi,
                    r.magnet_total,
                )
                for r in self.readings
            ],
            dtype=np.float64,
        )


def _float_repr(value: float) -> str:
    # repr() round-trips exactly, which the write/parse identity relies on.
    return repr(float(value))


def _open_source(source: str | Path | bytes | IO[str]) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    return source


def parse_session(
    source: str | Path | bytes | IO[str],
    *,
    session_id: str | None = None,
    pressure_unit: str = "hPa",
) -> SensorSession:
    """Parse a sensor log CSV into a session.

    The header row drives column lookup, so column order is irrelevant.
    Magnet components are preferred when present (the total is recomputed
    from them); otherwise a `magnet_total` column is required. Rows whose
    required fields fail to parse are dropped and recorded in the session's
    parse report, as are 1 Hz cadence gaps longer than 2 s.

    `pressure_unit` selects the unit of the file's pressure column; "kPa"
    values are converted to the canonical hPa (factor 10).
    """
    if pressure_unit not in ("hPa", "kPa"):
        raise ValueError(f"pressure_unit must be 'hPa' or 'kPa', got {pressure_unit!r}")
    pressure_factor = 10.0 if pressure_unit == "kPa" else 1.0

    stream = _open_source(source)
    close = isinstance(source, (str, Path, bytes))
    try:
        meta: dict[str, str] = {}
        header_line: str | None = None
        for line in stream:
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                key, _, value = stripped.lstrip("#").strip().partition("=")
                if value:
                    meta[key.strip()] = value.strip()
                continue
            header_line = line
            break
        if header_line is None:
            raise SchemaError("empty file: no header row found")

        reader = csv.DictReader(io.StringIO(header_line + stream.read()))
        columns = set(reader.fieldnames or ())
        missing = [c for c in REQUIRED_COLUMNS if c not in columns]
        if missing:
            raise SchemaError(f"missing required column(s): {', '.join(missing)}")
        has_components = all(c in columns for c in MAGNET_COMPONENT_COLUMNS)
        if not has_components and "magnet_total" not in columns:
            raise SchemaError(
                "missing required column(s): magnet_total (or magnet_x, magnet_y, magnet_z)"
            )

        readings: list[SensorReading] = []
        rejected: list[int] = []
        mismatched: list[int] = []
        for row_index, row in enumerate(reader):
            try:
                reading = _parse_row(row, has_components, pressure_factor, mismatched, row_index)
            except (ValueError, TypeError, KeyError):
                rejected.append(row_index)
                continue
            if readings and reading.timestamp <= readings[-1].timestamp:
                raise OrderingError(
                    f"timestamps must be strictly increasing; data row {row_index} has "
                    f"timestamp {reading.timestamp} after {readings[-1].timestamp}"
                )
            readings.append(reading)

        if not readings:
            raise SchemaError("no parseable data rows in file")
        gaps = tuple(
            i
            for i in range(len(readings) - 1)
            if readings[i + 1].timestamp - readings[i].timestamp > 2
        )
        report = ParseReport(
            rejected_rows=tuple(rejected),
            gap_after_rows=gaps,
            magnet_mismatch_rows=tuple(mismatched),
        )
        resolved_id = session_id or meta.get("session_id") or "session"
        return SensorSession(
            session_id=resolved_id,
            readings=tuple(readings),
            building=meta.get("building"),
            parse_report=report,
        )
    finally:
        if close:
            stream.close()


def _parse_row(
    row: dict[str, str],
    has_components: bool,
    pressure_factor: float,
    mismatched: list[int],
    row_index: int,
) -> SensorReading:
    label_text = (row.get("indoor") or "").strip()
    indoor = int(label_text) if label_text else None
    common = dict(
        timestamp=int(row["timestamp"]),
        pressure=float(row["pressure"]) * pressure_factor,
        gps_vertical_acc=float(row["gps_vertical_acc"]),
        gps_horizontal_acc=float(row["gps_horizontal_acc"]),
        gps_speed=float(row["gps_speed"]),
        rssi=float(row["rssi"]),
        indoor=indoor,
    )
    if has_components:
        x = float(row["magnet_x"])
        y = float(row["magnet_y"])
        z = float(row["magnet_z"])
        declared = (row.get("magnet_total") or "").strip()
        reading = SensorReading.from_components(
            magnet_x=x, magnet_y=y, magnet_z=z, **common
        )
        if declared and not math.isclose(float(declared), reading.magnet_total, rel_tol=1e-6):
            mismatched.append(row_index)
        return reading
    return SensorReading(magnet_total=float(row["magnet_total"]), **common)


def write_session(session: SensorSession, sink: str | Path | IO[str]) -> None:
    """Serialize a session to CSV such that `parse_session` inverts it exactly."""
    stream: IO[str]
    if isinstance(sink, (str, Path)):
        stream = open(sink, "w", encoding="utf-8", newline="")
        close = True
    else:
        stream = sink
        close = False
    try:
        stream.write(f"# session_id={session.session_id}\n")
        if session.building is not None:
            stream.write(f"# building={session.building}\n")
        with_components = all(r.has_components for r in session.readings)
        if with_components:
            columns = CSV_COLUMNS
        else:
            columns = tuple(c for c in CSV_COLUMNS if c not in MAGNET_COMPONENT_COLUMNS)
            columns = columns[:5] + ("magnet_total",) + columns[5:]
        stream.write(",".join(columns) + "\n")
        for r in session.readings:
            values = {
                "timestamp": str(r.timestamp),
                "rssi": _float_repr(r.rssi),
                "gps_vertical_acc": _float_repr(r.gps_vertical_acc),
                "gps_horizontal_acc": _float_repr(r.gps_horizontal_acc),
                "gps_speed": _float_repr(r.gps_speed),
                "pressure": _float_repr(r.pressure),
                "indoor": "" if r.indoor is None else str(r.indoor),
            }
            if with_components:
                values["magnet_x"] = _float_repr(r.magnet_x)
                values["magnet_y"] = _float_repr(r.magnet_y)
                values["magnet_z"] = _float_repr(r.magnet_z)
            else:
                values["magnet_total"] = _float_repr(r.magnet_total)
            stream.write(",".join(values[c] for c in columns) + "\n")
    finally:
        if close:
            stream.close()


def session_to_csv_text(session: SensorSession) -> str:
    """Render a session as CSV text (convenience wrapper over write_session)."""
    buffer = io.StringIO()
    write_session(session, buffer)
    return buffer.getvalue()


def sessions_in_dir(directory: str | Path, pattern: str = "*.csv") -> list[SensorSession]:
    """Parse every matching CSV in a directory, sorted by filename.

    Files without an embedded session id fall back to their filename stem.
    """
    root = Path(directory)
    sessions = []
    for path in sorted(root.glob(pattern)):
        session = parse_session(path)
        if session.session_id == "session":
            session = dataclasses.replace(session, session_id=path.stem)
        sessions.append(session)
    return sessions


def concat_feature_stats(sessions: Iterable[SensorSession]) -> dict[str, float]:
    """Label balance and size summary used by dataset sanity checks."""
    total = 0
    labeled = 0
    indoor = 0
    for session in sessions:
        total += len(session)
        for value in session.labels:
            if value is not None:
                labeled += 1
                indoor += value
    return {
        "points": total,
        "labeled": labeled,
        "indoor_fraction": (indoor / labeled) if labeled else math.nan,
    }
