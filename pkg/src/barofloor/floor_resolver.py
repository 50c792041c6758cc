"""Floor level resolution from relative heights, plus the full pipeline.

Repeated-visit height offsets are grouped by sorting and chaining points
closer than 1.5 m; each group's mean is a learned floor height and its
1-based position is the architectural floor level (entry floor = 1).
Without a learned model, the floor is the rounded ratio of the offset to
a per-building-type typical floor height.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .altimetry import (
    DEFAULT_REFERENCE_WINDOW_RADIUS,
    estimate_height,
)
from .io_classifier import TrainedModel, predict_series
from .sensor_data import SensorSession
from .transition_detector import (
    DEFAULT_MASK_LENGTH,
    DEFAULT_THRESHOLD,
    INTO_BUILDING,
    MaskPair,
    detect_transitions,
    last_transition,
)

OUTDOORS = "outdoors"
CLUSTER_RADIUS_M = 1.5

METHOD_CLUSTER = "cluster"
METHOD_HEURISTIC = "heuristic"

BUILDING_TYPES = ("residential", "office", "unknown")


class NoEntryObservedError(RuntimeError):
    """The session ends indoors but no building entry was ever detected."""


@dataclass(frozen=True)
class BuildingHeuristics:
    """Typical floor-to-floor heights by building type, in meters."""

    residential: float = 3.24
    office: float = 4.02
    default: float = 3.63

    def for_type(self, building_type: str) -> float:
        if building_type == "residential":
            return self.residential
        if building_type == "office":
            return self.office
        if building_type == "unknown":
            return self.default
        raise ValueError(f"building_type must be one of {BUILDING_TYPES}, got {building_type!r}")


@dataclass(frozen=True)
class FloorClusterModel:
    """Learned floor heights for one building.

    Representatives are ascending cluster means; `offsets` is the sorted
    multiset of observations the model was built from, kept so the model
    can be rebuilt incrementally.
    """

    representatives: tuple[float, ...]
    counts: tuple[int, ...]
    offsets: tuple[float, ...]
    building: str | None = None

    def __post_init__(self) -> None:
        if len(self.representatives) != len(self.counts):
            raise ValueError("representatives and counts must align")
        reps = self.representatives
        if any(b <= a for a, b in zip(reps, reps[1:])):
            raise ValueError("cluster representatives must be strictly increasing")

    def __len__(self) -> int:
        return len(self.representatives)

    def inter_floor_distances(self) -> tuple[float, ...]:
        """Gaps between consecutive learned floor heights."""
        reps = self.representatives
        return tuple(b - a for a, b in zip(reps, reps[1:]))

    def to_json_dict(self) -> dict:
        return {
            "building": self.building,
            "representatives": list(self.representatives),
            "counts": list(self.counts),
            "offsets": list(self.offsets),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FloorClusterModel":
        return cls(
            representatives=tuple(data["representatives"]),
            counts=tuple(data["counts"]),
            offsets=tuple(data["offsets"]),
            building=data.get("building"),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as sink:
            json.dump(self.to_json_dict(), sink, indent=2)

    @classmethod
    def load(cls, path: str | Path) -> "FloorClusterModel":
        with open(path, "r", encoding="utf-8") as source:
            return cls.from_json_dict(json.load(source))


@dataclass(frozen=True)
class FloorPrediction:
    """Resolved floor level; `floor` is an int >= 1, "B<n>", or "outdoors"."""

    floor: int | str
    method: str
    m_delta: float
    cluster_index: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "floor": self.floor,
            "method": self.method,
            "m_delta": self.m_delta,
            "cluster_index": self.cluster_index,
        }


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for the classify -> detect -> measure -> resolve pipeline."""

    mask_length: int = DEFAULT_MASK_LENGTH
    jaccard_threshold: float = DEFAULT_THRESHOLD
    merge_gap: int | None = None
    reference_window_radius: int = DEFAULT_REFERENCE_WINDOW_RADIUS
    cluster_radius: float = CLUSTER_RADIUS_M

    def masks(self) -> MaskPair:
        return MaskPair.default(length=self.mask_length, threshold=self.jaccard_threshold)


def cluster_heights(
    offsets,
    radius: float = CLUSTER_RADIUS_M,
    building: str | None = None,
) -> FloorClusterModel:
    """Group observed height offsets into floor clusters.

    Single-linkage chaining on the sorted offsets: a new cluster starts
    whenever the gap to the previous point exceeds `radius`. Consecutive
    cluster means therefore always differ by more than `radius`.
    """
    values = [float(v) for v in offsets]
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"height offsets must be finite, got {v!r}")
    values.sort()
    if not values:
        return FloorClusterModel(representatives=(), counts=(), offsets=(), building=building)

    groups: list[list[float]] = [[values[0]]]
    for value in values[1:]:
        if value - groups[-1][-1] > radius:
            groups.append([value])
        else:
            groups[-1].append(value)
    return FloorClusterModel(
        representatives=tuple(sum(g) / len(g) for g in groups),
        counts=tuple(len(g) for g in groups),
        offsets=tuple(values),
        building=building,
    )


def resolve_floor_heuristic(
    m_delta: float,
    building_type: str = "unknown",
    heuristics: BuildingHeuristics | None = None,
) -> FloorPrediction:
    """Floor level from a typical floor height: round(m_delta / m) + 1.

    Rounding is half-up. Results below 1 are below the entry floor and
    are reported as basement labels "B1", "B2", ...
    """
    if not math.isfinite(m_delta):
        raise ValueError(f"m_delta must be finite, got {m_delta!r}")
    heuristics = heuristics or BuildingHeuristics()
    m_hat = heuristics.for_type(building_type)
    level = math.floor(m_delta / m_hat + 0.5) + 1
    floor: int | str = level if level >= 1 else f"B{1 - level}"
    return FloorPrediction(floor=floor, method=METHOD_HEURISTIC, m_delta=m_delta)


def resolve_floor_cluster(
    m_delta: float,
    model: FloorClusterModel,
    building_type: str = "unknown",
    heuristics: BuildingHeuristics | None = None,
    radius: float = CLUSTER_RADIUS_M,
) -> FloorPrediction:
    """Floor level as the 1-based index of the nearest learned cluster.

    Falls back to the heuristic when no cluster lies within `radius` of
    the offset. When the lowest learned cluster sits above `radius`, a
    virtual entry-floor cluster at 0 m is prepended so indices stay
    anchored to the entrance.
    """
    if not math.isfinite(m_delta):
        raise ValueError(f"m_delta must be finite, got {m_delta!r}")
    if len(model) == 0:
        return resolve_floor_heuristic(m_delta, building_type, heuristics)

    reps = list(model.representatives)
    if reps[0] > radius:
        reps = [0.0] + reps
    best = min(range(len(reps)), key=lambda i: abs(reps[i] - m_delta))
    if abs(reps[best] - m_delta) > radius:
        return resolve_floor_heuristic(m_delta, building_type, heuristics)
    return FloorPrediction(
        floor=best + 1,
        method=METHOD_CLUSTER,
        m_delta=m_delta,
        cluster_index=best + 1,
    )


def predict_floor(
    session: SensorSession,
    model: TrainedModel,
    cluster_model: FloorClusterModel | None = None,
    building_type: str = "unknown",
    heuristics: BuildingHeuristics | None = None,
    config: PipelineConfig | None = None,
) -> FloorPrediction:
    """Run the full pipeline on one session.

    Classify each timestep, detect transitions, and anchor the reference
    pressure at the last entry. Sessions that end outdoors (last
    transition is an exit, or the final timestep is classified outdoors)
    resolve to the "outdoors" sentinel. A session that ends indoors with
    no detected entry cannot be anchored and raises NoEntryObservedError.
    """
    config = config or PipelineConfig()
    series = predict_series(model, session)
    transitions = detect_transitions(series, config.masks(), config.merge_gap)
    last = last_transition(transitions)

    ends_indoors = series.values[-1] == 1
    if last is None:
        if not ends_indoors:
            return FloorPrediction(floor=OUTDOORS, method=METHOD_HEURISTIC, m_delta=0.0)
        raise NoEntryObservedError(
            f"session '{session.session_id}' ends indoors but no entry was detected"
        )
    if last.direction != INTO_BUILDING or not ends_indoors:
        return FloorPrediction(floor=OUTDOORS, method=METHOD_HEURISTIC, m_delta=0.0)

    estimate = estimate_height(session, last.index, config.reference_window_radius)
    if cluster_model is not None and len(cluster_model) > 0:
        return resolve_floor_cluster(
            estimate.m_delta,
            cluster_model,
            building_type,
            heuristics,
            config.cluster_radius,
        )
    return resolve_floor_heuristic(estimate.m_delta, building_type, heuristics)


def collect_height_offsets(
    sessions,
    model: TrainedModel,
    config: PipelineConfig | None = None,
) -> list[float]:
    """Measured height offsets from many visits, for cluster building.

    Sessions without a final entry transition are skipped; a learned
    cluster model should only aggregate anchored measurements.
    """
    config = config or PipelineConfig()
    offsets = []
    for session in sessions:
        series = predict_series(model, session)
        transitions = detect_transitions(series, config.masks(), config.merge_gap)
        last = last_transition(transitions)
        if last is None or last.direction != INTO_BUILDING or series.values[-1] != 1:
            continue
        offsets.append(
            estimate_height(session, last.index, config.reference_window_radius).m_delta
        )
    return offsets
