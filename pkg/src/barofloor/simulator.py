"""Synthetic sensor sessions with ground truth for every pipeline stage.

Trials walk a device up to a target floor of a configurable building:
an outdoor approach, the entry, a lobby dwell, a constant-rate ascent,
and a dwell at the destination. Pressure follows the inverse of the
height equation; GPS-derived signals (vertical/horizontal accuracy,
speed) keep their outdoor signature for a sampled lag after each entry,
while radio RSSI and the magnetometer switch at the physical boundary.

Noise model: the dominant pressure error between visits is an ambient or
sensor offset that is constant within one trial (visits happen hours or
days apart), so `pressure_noise_sigma` is the standard deviation of a
per-trial offset; a white per-sample component rides on top at
`pressure_white_fraction` of sigma. Both vanish in the zero-noise preset,
which also zeroes signal spreads and GPS lag so sessions are exactly
separable.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .altimetry import height_to_pressure
from .floor_resolver import OUTDOORS
from .sensor_data import NO_FIX, SensorReading, SensorSession
from .transition_detector import INTO_BUILDING, OUT_OF_BUILDING


@dataclass(frozen=True)
class SignalProfile:
    """State-conditional signal distributions (means and spreads)."""

    gv_mean: float
    gv_sigma: float
    gh_mean: float
    gh_sigma: float
    gs_mean: float
    gs_sigma: float
    gs_nofix_prob: float
    rssi_mean: float
    rssi_sigma: float
    mag_mean: float
    mag_sigma: float


OUTDOOR_SIGNALS = SignalProfile(
    gv_mean=8.0,
    gv_sigma=2.5,
    gh_mean=12.0,
    gh_sigma=4.0,
    gs_mean=1.4,
    gs_sigma=0.3,
    gs_nofix_prob=0.02,
    rssi_mean=-75.0,
    rssi_sigma=4.0,
    mag_mean=50.0,
    mag_sigma=1.5,
)

INDOOR_SIGNALS = SignalProfile(
    gv_mean=60.0,
    gv_sigma=12.0,
    gh_mean=500.0,
    gh_sigma=250.0,
    gs_mean=0.35,
    gs_sigma=0.2,
    gs_nofix_prob=0.7,
    rssi_mean=-85.0,
    rssi_sigma=5.0,
    mag_mean=56.0,
    mag_sigma=8.0,
)


def _zeroed(profile: SignalProfile, nofix_prob: float) -> SignalProfile:
    return dataclasses.replace(
        profile,
        gv_sigma=0.0,
        gh_sigma=0.0,
        gs_sigma=0.0,
        gs_nofix_prob=nofix_prob,
        rssi_sigma=0.0,
        mag_sigma=0.0,
    )


@dataclass(frozen=True)
class BuildingProfile:
    """Floor-gap layout of one synthetic building."""

    name: str
    floor_gaps: tuple[float, ...]
    building_type: str = "office"

    def __post_init__(self) -> None:
        if any(g <= 1.5 for g in self.floor_gaps):
            raise ValueError("every floor gap must exceed the 1.5 m grouping radius")
        if self.building_type not in ("residential", "office"):
            raise ValueError(f"building_type must be residential or office, got {self.building_type!r}")

    @property
    def n_floors(self) -> int:
        return len(self.floor_gaps) + 1

    @property
    def mean_gap(self) -> float:
        return sum(self.floor_gaps) / len(self.floor_gaps)

    def height_of_floor(self, floor: int) -> float:
        """Height above the entry floor, in meters (floor 1 = 0)."""
        if not 1 <= floor <= self.n_floors:
            raise ValueError(f"floor {floor} outside 1..{self.n_floors} for {self.name}")
        return float(sum(self.floor_gaps[: floor - 1]))


URIS_HALL = BuildingProfile(
    name="uris_hall",
    floor_gaps=(5.0, 3.65, 3.65, 3.5, 3.5, 3.5, 3.5, 3.5, 3.5, 3.5, 3.5),
    building_type="office",
)

DEFAULT_PROFILES = (
    BuildingProfile(name="rockefeller_like", floor_gaps=(4.02,) * 16, building_type="office"),
    URIS_HALL,
    BuildingProfile(name="mudd_like", floor_gaps=(4.8,) + (4.0,) * 17, building_type="office"),
    BuildingProfile(name="noco_like", floor_gaps=(3.8,) * 13, building_type="office"),
    BuildingProfile(name="social_work_like", floor_gaps=(3.3,) * 12, building_type="residential"),
)


def profile_by_name(name: str) -> BuildingProfile:
    for profile in DEFAULT_PROFILES:
        if profile.name == name:
            return profile
    raise KeyError(f"unknown building profile {name!r}")


@dataclass(frozen=True)
class SimConfig:
    """Generator knobs; see the module docstring for the noise model."""

    seed: int = 0
    pressure_noise_sigma: float = 0.05
    pressure_white_fraction: float = 0.1
    entry_lag_range: tuple[int, int] = (0, 20)
    exit_lag_range: tuple[int, int] = (0, 3)
    baseline_pressure: float = 1013.25
    outdoor_signals: SignalProfile = OUTDOOR_SIGNALS
    indoor_signals: SignalProfile = INDOOR_SIGNALS
    ascent_rate: float = 0.7
    weather_drift_hpa_per_hour: float = 0.0
    outdoor_seconds: int = 30
    entry_dwell_seconds: int = 40
    top_dwell_seconds: int = 60

    def __post_init__(self) -> None:
        if self.pressure_noise_sigma < 0:
            raise ValueError("pressure_noise_sigma must be non-negative")
        for lo, hi in (self.entry_lag_range, self.exit_lag_range):
            if not (0 <= lo <= hi <= 60):
                raise ValueError("lag ranges must satisfy 0 <= lo <= hi <= 60")
        if self.ascent_rate <= 0:
            raise ValueError("ascent_rate must be positive")

    @classmethod
    def zero_noise(cls, seed: int = 0, **overrides) -> "SimConfig":
        """Fully deterministic signals: no noise, no GPS lag."""
        return cls(
            seed=seed,
            pressure_noise_sigma=0.0,
            pressure_white_fraction=0.0,
            entry_lag_range=(0, 0),
            exit_lag_range=(0, 0),
            outdoor_signals=_zeroed(OUTDOOR_SIGNALS, nofix_prob=0.0),
            indoor_signals=_zeroed(INDOOR_SIGNALS, nofix_prob=1.0),
            **overrides,
        )


@dataclass(frozen=True)
class TruthTransition:
    index: int
    direction: str
    gps_lag: int


@dataclass(frozen=True)
class GroundTruth:
    """Everything the generator knows about one trial."""

    io: tuple[int, ...]
    transitions: tuple[TruthTransition, ...]
    final_floor: int | str
    m_delta: float
    heights: tuple[float, ...]
    building: str | None = None
    building_type: str = "office"
    mean_gap: float | None = None


def write_ground_truth(truth: GroundTruth, path: str | Path) -> None:
    payload = {
        "io": list(truth.io),
        "transitions": [
            {"index": t.index, "direction": t.direction, "gps_lag": t.gps_lag}
            for t in truth.transitions
        ],
        "final_floor": truth.final_floor,
        "m_delta": truth.m_delta,
        "heights": list(truth.heights),
        "building": truth.building,
        "building_type": truth.building_type,
        "mean_gap": truth.mean_gap,
    }
    with open(path, "w", encoding="utf-8") as sink:
        json.dump(payload, sink)


def read_ground_truth(path: str | Path) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as source:
        data = json.load(source)
    return GroundTruth(
        io=tuple(data["io"]),
        transitions=tuple(
            TruthTransition(t["index"], t["direction"], t["gps_lag"])
            for t in data["transitions"]
        ),
        final_floor=data["final_floor"],
        m_delta=data["m_delta"],
        heights=tuple(data["heights"]),
        building=data.get("building"),
        building_type=data.get("building_type", "office"),
        mean_gap=data.get("mean_gap"),
    )


class _Timeline:
    """Second-by-second truth arrays accumulated segment by segment."""

    def __init__(self):
        self.heights: list[float] = []
        self.indoor: list[int] = []
        self.transitions: list[tuple[int, str]] = []

    def __len__(self) -> int:
        return len(self.heights)

    def dwell(self, seconds: int, height: float, indoor: int) -> None:
        self.heights.extend([height] * seconds)
        self.indoor.extend([indoor] * seconds)

    def ramp(self, target_height: float, rate: float, indoor: int) -> None:
        current = self.heights[-1] if self.heights else 0.0
        distance = target_height - current
        steps = max(1, math.ceil(abs(distance) / rate))
        step = distance / steps
        for _ in range(steps):
            current += step
            self.heights.append(current)
            self.indoor.append(indoor)
        self.heights[-1] = target_height

    def cross(self, direction: str) -> None:
        # The transition index is the first sample in the new state.
        self.transitions.append((len(self.heights), direction))


def _render_session(
    timeline: _Timeline,
    cfg: SimConfig,
    rng: np.random.Generator,
    session_id: str,
    building: str | None,
) -> tuple[SensorSession, list[int]]:
    n = len(timeline)
    heights = np.array(timeline.heights)
    indoor = np.array(timeline.indoor, dtype=np.int64)

    # GPS-derived signals follow a delayed copy of the indoor state: for
    # `lag` samples after each crossing they keep the pre-crossing signature.
    lags = []
    for _, direction in timeline.transitions:
        lo, hi = cfg.entry_lag_range if direction == INTO_BUILDING else cfg.exit_lag_range
        lags.append(int(rng.integers(lo, hi + 1)))
    gps_state = indoor.copy()
    for (index, direction), lag in zip(timeline.transitions, lags):
        prev_state = 0 if direction == INTO_BUILDING else 1
        gps_state[index : min(n, index + lag)] = prev_state

    offset = rng.normal(0.0, cfg.pressure_noise_sigma) if cfg.pressure_noise_sigma else 0.0
    white_sigma = cfg.pressure_noise_sigma * cfg.pressure_white_fraction
    drift_per_s = cfg.weather_drift_hpa_per_hour / 3600.0

    readings = []
    for t in range(n):
        gps = cfg.indoor_signals if gps_state[t] else cfg.outdoor_signals
        ambient = cfg.indoor_signals if indoor[t] else cfg.outdoor_signals
        gv = max(1.0, gps.gv_mean + gps.gv_sigma * rng.standard_normal())
        gh = max(1.0, gps.gh_mean + gps.gh_sigma * rng.standard_normal())
        if rng.random() < gps.gs_nofix_prob:
            gs = NO_FIX
        else:
            gs = max(0.0, gps.gs_mean + gps.gs_sigma * rng.standard_normal())
        rssi = ambient.rssi_mean + ambient.rssi_sigma * rng.standard_normal()
        mag = max(1.0, ambient.mag_mean + ambient.mag_sigma * rng.standard_normal())
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        components = mag * direction

        pressure = height_to_pressure(cfg.baseline_pressure, float(heights[t]))
        pressure += offset + drift_per_s * t
        if white_sigma:
            pressure += white_sigma * rng.standard_normal()

        readings.append(
            SensorReading(
                timestamp=t,
                pressure=pressure,
                gps_vertical_acc=gv,
                gps_horizontal_acc=gh,
                gps_speed=gs,
                rssi=rssi,
                magnet_total=float(np.linalg.norm(components)),
                magnet_x=float(components[0]),
                magnet_y=float(components[1]),
                magnet_z=float(components[2]),
                indoor=int(indoor[t]),
            )
        )

    session = SensorSession(session_id=session_id, readings=tuple(readings), building=building)
    return session, lags


def simulate_trial(
    profile: BuildingProfile,
    target_floor: int,
    cfg: SimConfig | None = None,
    *,
    end_outdoors: bool = False,
    seed: int | None = None,
    session_id: str | None = None,
) -> tuple[SensorSession, GroundTruth]:
    """One floor-visit trial: approach, enter, ascend, dwell (optionally exit)."""
    cfg = cfg or SimConfig()
    if not 1 <= target_floor <= profile.n_floors:
        raise ValueError(
            f"target_floor {target_floor} outside 1..{profile.n_floors} for {profile.name}"
        )
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    h_target = profile.height_of_floor(target_floor)

    timeline = _Timeline()
    timeline.dwell(cfg.outdoor_seconds, 0.0, indoor=0)
    timeline.cross(INTO_BUILDING)
    timeline.dwell(cfg.entry_dwell_seconds, 0.0, indoor=1)
    if h_target > 0:
        timeline.ramp(h_target, cfg.ascent_rate, indoor=1)
    timeline.dwell(cfg.top_dwell_seconds, h_target, indoor=1)
    if end_outdoors:
        if h_target > 0:
            timeline.ramp(0.0, cfg.ascent_rate, indoor=1)
        timeline.dwell(5, 0.0, indoor=1)
        timeline.cross(OUT_OF_BUILDING)
        timeline.dwell(max(cfg.outdoor_seconds, 25), 0.0, indoor=0)

    resolved_id = session_id or f"{profile.name}-f{target_floor:02d}"
    session, lags = _render_session(timeline, cfg, rng, resolved_id, profile.name)
    truth = GroundTruth(
        io=tuple(timeline.indoor),
        transitions=tuple(
            TruthTransition(index, direction, lag)
            for (index, direction), lag in zip(timeline.transitions, lags)
        ),
        final_floor=OUTDOORS if end_outdoors else target_floor,
        m_delta=0.0 if end_outdoors else h_target,
        heights=tuple(timeline.heights),
        building=profile.name,
        building_type=profile.building_type,
        mean_gap=profile.mean_gap,
    )
    return session, truth


def simulate_io_dataset(n_sessions: int, cfg: SimConfig | None = None) -> list[SensorSession]:
    """Labeled ground-level walks in and out of buildings for classifier work.

    About half of the indoor visits include a small ascent and descent so
    the pressure feature sees realistic in-building variation. Every
    reading carries its ground-truth indoor label.
    """
    cfg = cfg or SimConfig()
    if n_sessions < 1:
        raise ValueError(f"n_sessions must be at least 1, got {n_sessions}")
    sessions = []
    for i in range(n_sessions):
        rng = np.random.default_rng([cfg.seed, i])
        timeline = _Timeline()
        timeline.dwell(int(rng.integers(25, 41)), 0.0, indoor=0)
        n_visits = 2 if rng.random() < 0.35 else 1
        for _ in range(n_visits):
            timeline.cross(INTO_BUILDING)
            timeline.dwell(int(rng.integers(20, 36)), 0.0, indoor=1)
            if rng.random() < 0.5:
                height = float(rng.uniform(3.5, 10.5))
                timeline.ramp(height, cfg.ascent_rate, indoor=1)
                timeline.dwell(int(rng.integers(10, 21)), height, indoor=1)
                timeline.ramp(0.0, cfg.ascent_rate, indoor=1)
            timeline.dwell(int(rng.integers(5, 11)), 0.0, indoor=1)
            timeline.cross(OUT_OF_BUILDING)
            timeline.dwell(int(rng.integers(20, 41)), 0.0, indoor=0)
        session, _ = _render_session(timeline, cfg, rng, f"io-{i:03d}", None)
        sessions.append(session)
    return sessions
