"""Fixed-size feature windows labeled by their middle reading.

A window of `d` consecutive readings is the classifier example; its target
is the indoor label of the middle reading, so the first valid prediction
lags the stream by (d - 1) / 2 samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sensor_data import SensorSession

FEATURE_NAMES = (
    "pressure",
    "gps_vertical_acc",
    "gps_horizontal_acc",
    "gps_speed",
    "rssi",
    "magnet_total",
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class Window:
    """d x 6 feature slice with the middle reading's label as target."""

    features: np.ndarray
    label: int | None
    center_index: int
    session_id: str

    def __post_init__(self) -> None:
        self.features.setflags(write=False)

    @property
    def d(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature standardization statistics, fitted on training data only.

    Zero-variance features get sigma clamped to 1 so they map to zero.
    """

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean.setflags(write=False)
        self.std.setflags(write=False)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std


def make_windows(session: SensorSession, d: int) -> list[Window]:
    """Slice a session into its length(session) - d + 1 labeled windows."""
    if d < 1 or d % 2 == 0:
        raise ValueError(f"window size d must be a positive odd integer, got {d}")
    if len(session) < d:
        raise ValueError(
            f"session '{session.session_id}' has {len(session)} readings, fewer than d={d}"
        )
    matrix = session.feature_matrix()
    half = (d - 1) // 2
    windows = []
    for start in range(len(session) - d + 1):
        center = start + half
        windows.append(
            Window(
                features=matrix[start : start + d].copy(),
                label=session.readings[center].indoor,
                center_index=center,
                session_id=session.session_id,
            )
        )
    return windows


def fit_scaler(windows: list[Window]) -> FeatureScaler:
    """Fit per-feature mean/std over every timestep of the training windows."""
    if not windows:
        raise ValueError("cannot fit a scaler on an empty window set")
    stacked = np.concatenate([w.features for w in windows], axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return FeatureScaler(mean=mean, std=std)


def apply_scaler(scaler: FeatureScaler, windows: list[Window]) -> list[Window]:
    """Return new windows with standardized features; inputs are untouched."""
    return [
        Window(
            features=scaler.transform(w.features),
            label=w.label,
            center_index=w.center_index,
            session_id=w.session_id,
        )
        for w in windows
    ]


def split_train_val(
    windows: list[Window], fraction: float, seed: int
) -> tuple[list[Window], list[Window]]:
    """Deterministic train/validation split grouped by source session.

    Splitting whole sessions keeps near-duplicate adjacent windows on one
    side. When all windows come from a single session there is nothing to
    group, so the split falls back to window level.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if len(windows) < 2:
        raise ValueError("need at least 2 windows to split")

    session_ids = sorted({w.session_id for w in windows})
    rng = np.random.default_rng(seed)
    if len(session_ids) >= 2:
        order = rng.permutation(len(session_ids))
        n_train = int(round(fraction * len(session_ids)))
        n_train = min(max(n_train, 1), len(session_ids) - 1)
        train_ids = {session_ids[i] for i in order[:n_train]}
        train = [w for w in windows if w.session_id in train_ids]
        val = [w for w in windows if w.session_id not in train_ids]
    else:
        order = rng.permutation(len(windows))
        n_train = int(round(fraction * len(windows)))
        n_train = min(max(n_train, 1), len(windows) - 1)
        chosen = set(order[:n_train].tolist())
        train = [w for i, w in enumerate(windows) if i in chosen]
        val = [w for i, w in enumerate(windows) if i not in chosen]
    return train, val


def window_tensor(windows: list[Window]) -> np.ndarray:
    """Stack windows into a (batch, d, features) array."""
    return np.stack([w.features for w in windows]).astype(np.float64)


def label_vector(windows: list[Window]) -> np.ndarray:
    """Stack labels into a float vector; raises if any window is unlabeled."""
    labels = []
    for w in windows:
        if w.label is None:
            raise ValueError(
                f"window centered at {w.center_index} of session "
                f"'{w.session_id}' has no label"
            )
        labels.append(float(w.label))
    return np.array(labels, dtype=np.float64)
