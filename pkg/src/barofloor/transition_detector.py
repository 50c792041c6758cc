"""Building entry/exit detection over a binary indoor/outdoor series.

Two fixed binary masks, one shaped like an exit (ones then zeros) and one
like an entry (zeros then ones), are slid across the prediction series.
A window is flagged when its Jaccard similarity to exactly one mask clears
the threshold; requiring exclusivity keeps long constant indoor runs,
which score 0.5 against both masks, from producing phantom transitions.
Flagged window starts are merged by gap and each merged group reports one
transition at its middle window's center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INTO_BUILDING = "into_building"
OUT_OF_BUILDING = "out_of_building"

DEFAULT_THRESHOLD = 0.4
DEFAULT_MASK_LENGTH = 10


@dataclass(frozen=True)
class IoSeries:
    """Per-timestep binary indoor/outdoor predictions (1 = indoors)."""

    values: tuple[int, ...]

    def __post_init__(self) -> None:
        bad = [v for v in self.values if v not in (0, 1)]
        if bad:
            raise ValueError(f"io series values must be 0 or 1, got {bad[0]!r}")

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.int64)


def exit_mask(length: int) -> tuple[int, ...]:
    """Ones-then-zeros pattern of the given even length."""
    return (1,) * (length // 2) + (0,) * (length - length // 2)


def entry_mask(length: int) -> tuple[int, ...]:
    """Zeros-then-ones pattern of the given even length."""
    return (0,) * (length // 2) + (1,) * (length - length // 2)


@dataclass(frozen=True)
class MaskPair:
    """The exit/entry mask pair plus the match threshold."""

    v1: tuple[int, ...]
    v2: tuple[int, ...]
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        if len(self.v1) != len(self.v2):
            raise ValueError("masks must have equal length")
        if not self.v1:
            raise ValueError("masks must be non-empty")
        for mask in (self.v1, self.v2):
            if any(v not in (0, 1) for v in mask):
                raise ValueError("masks must be binary")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")

    @classmethod
    def default(cls, length: int = DEFAULT_MASK_LENGTH, threshold: float = DEFAULT_THRESHOLD) -> "MaskPair":
        return cls(v1=exit_mask(length), v2=entry_mask(length), threshold=threshold)

    def __len__(self) -> int:
        return len(self.v1)


@dataclass(frozen=True)
class Transition:
    index: int
    direction: str

    def __post_init__(self) -> None:
        if self.direction not in (INTO_BUILDING, OUT_OF_BUILDING):
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class TransitionSet:
    """Detected transitions in increasing series order."""

    transitions: tuple[Transition, ...]

    def __post_init__(self) -> None:
        indices = [t.index for t in self.transitions]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("transition indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)


def jaccard(s, v) -> float:
    """Jaccard similarity between two equal-length binary vectors.

    Vectors are read as sets of positions holding 1; two all-zero vectors
    score 0 by convention.
    """
    s = list(s)
    v = list(v)
    if len(s) != len(v):
        raise ValueError(f"length mismatch: {len(s)} vs {len(v)}")
    inter = sum(1 for a, b in zip(s, v) if a == 1 and b == 1)
    union = sum(s) + sum(v) - inter
    if union == 0:
        return 0.0
    return inter / union


def jaccard_profile(series: IoSeries, masks: MaskPair | None = None) -> list[tuple[int, float, float, bool]]:
    """Per-window (start, J_exit, J_entry, flagged) rows, for debugging/plots."""
    masks = masks or MaskPair.default()
    length = len(masks)
    t = series.as_array()
    if len(t) < length:
        raise ValueError(f"series of length {len(t)} is shorter than mask length {length}")
    windows = np.lib.stride_tricks.sliding_window_view(t, length)
    v1 = np.array(masks.v1, dtype=np.int64)
    v2 = np.array(masks.v2, dtype=np.int64)
    ones = windows.sum(axis=1)
    inter1 = windows @ v1
    inter2 = windows @ v2
    union1 = ones + int(v1.sum()) - inter1
    union2 = ones + int(v2.sum()) - inter2
    j1 = np.where(union1 > 0, inter1 / np.maximum(union1, 1), 0.0)
    j2 = np.where(union2 > 0, inter2 / np.maximum(union2, 1), 0.0)
    hit1 = j1 >= masks.threshold
    hit2 = j2 >= masks.threshold
    flagged = hit1 ^ hit2
    return [
        (int(i), float(j1[i]), float(j2[i]), bool(flagged[i]))
        for i in range(len(windows))
    ]


def detect_transitions(
    series: IoSeries,
    masks: MaskPair | None = None,
    merge_gap: int | None = None,
) -> TransitionSet:
    """Locate indoor/outdoor transitions in a binary prediction series.

    Flagged window starts closer than `merge_gap` (default: the mask
    length) chain into one group; the group's middle start, offset by half
    a mask so it lands at the window center, becomes the transition index.
    Direction comes from whichever mask dominates at that middle window.
    """
    masks = masks or MaskPair.default()
    if merge_gap is None:
        merge_gap = len(masks)
    if merge_gap < 0:
        raise ValueError(f"merge_gap must be non-negative, got {merge_gap}")
    profile = jaccard_profile(series, masks)
    flagged = [row[0] for row in profile if row[3]]

    groups: list[list[int]] = []
    for start in flagged:
        if groups and start - groups[-1][-1] <= merge_gap:
            groups[-1].append(start)
        else:
            groups.append([start])

    half = len(masks) // 2
    transitions = []
    for group in groups:
        middle = group[len(group) // 2]
        _, j1, j2, _ = profile[middle]
        direction = INTO_BUILDING if j2 >= j1 else OUT_OF_BUILDING
        transitions.append(Transition(index=middle + half, direction=direction))
    return TransitionSet(transitions=tuple(transitions))


def last_transition(transitions: TransitionSet) -> Transition | None:
    """The most recent detected transition, or None when there is none."""
    if not transitions.transitions:
        return None
    return transitions.transitions[-1]


def write_transitions_csv(transitions: TransitionSet, path) -> None:
    with open(path, "w", encoding="utf-8") as sink:
        sink.write("index,direction\n")
        for t in transitions:
            sink.write(f"{t.index},{t.direction}\n")


def write_jaccard_csv(profile: list[tuple[int, float, float, bool]], path) -> None:
    with open(path, "w", encoding="utf-8") as sink:
        sink.write("window_start,j_exit,j_entry,flagged\n")
        for start, j1, j2, flagged in profile:
            sink.write(f"{start},{j1:.12g},{j2:.12g},{int(flagged)}\n")
