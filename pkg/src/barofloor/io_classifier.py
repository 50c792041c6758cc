"""Indoor/outdoor classifiers over sensor windows.

Three model kinds share one training loop: logistic regression (sanity
baseline), a feedforward net (hidden widths 30-18-2 feeding a sigmoid
unit), and a three-layer recurrent net (two 50-unit recurrent layers with
dropout 0.2, a 2-unit recurrent layer, then a sigmoid unit). Training is
mean binary cross-entropy under Adam, fully deterministic for a fixed
seed. The feature scaler is fitted on the training windows and travels
with the model.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .sensor_data import SensorSession
from .transition_detector import IoSeries
from .windowing import (
    FeatureScaler,
    N_FEATURES,
    Window,
    apply_scaler,
    fit_scaler,
    label_vector,
    make_windows,
    window_tensor,
)

MODEL_KINDS = ("logistic", "feedforward", "recurrent")
MODEL_FILE_FORMAT = "barofloor-model"
MODEL_FILE_VERSION = 1

FEEDFORWARD_WIDTHS = (30, 18, 2)
RECURRENT_WIDTHS = (50, 50, 2)


class TrainingDivergedError(RuntimeError):
    """Loss or parameters became non-finite during training."""

    def __init__(self, epoch: int, detail: str):
        super().__init__(f"training diverged at epoch {epoch}: {detail}")
        self.epoch = epoch


class ModelFileError(ValueError):
    """A model file is corrupt or has an unsupported version."""


@dataclass(frozen=True)
class ModelSpec:
    """Architecture selector for one classifier."""

    kind: str
    window_size: int = 3
    hidden_sizes: tuple[int, ...] | None = None
    dropout_rate: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValueError(f"window_size must be odd and positive, got {self.window_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    def resolved_hidden_sizes(self) -> tuple[int, ...]:
        if self.hidden_sizes is not None:
            return self.hidden_sizes
        if self.kind == "feedforward":
            return FEEDFORWARD_WIDTHS
        if self.kind == "recurrent":
            return RECURRENT_WIDTHS
        return ()


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 24
    batch_size: int = 128
    learning_rate: float = 0.006
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")


def build_network(spec: ModelSpec) -> nn.Sequential:
    """Instantiate the architecture for a spec with seeded initialization."""
    rng = np.random.default_rng(spec.seed)
    flat_in = spec.window_size * N_FEATURES
    if spec.kind == "logistic":
        modules = [nn.Flatten(), nn.Dense(flat_in, 1, rng, "out"), nn.Sigmoid()]
    elif spec.kind == "feedforward":
        sizes = spec.resolved_hidden_sizes()
        modules = [nn.Flatten()]
        previous = flat_in
        for idx, width in enumerate(sizes):
            modules.append(nn.Dense(previous, width, rng, f"fc{idx + 1}"))
            modules.append(nn.Tanh())
            previous = width
        modules.append(nn.Dense(previous, 1, rng, "out"))
        modules.append(nn.Sigmoid())
    else:
        sizes = spec.resolved_hidden_sizes()
        modules = []
        previous = N_FEATURES
        for idx, width in enumerate(sizes):
            modules.append(nn.LSTM(previous, width, rng, f"lstm{idx + 1}"))
            if idx < len(sizes) - 1 and spec.dropout_rate > 0:
                modules.append(nn.Dropout(spec.dropout_rate))
            previous = width
        modules.append(nn.TakeLast())
        modules.append(nn.Dense(previous, 1, rng, "out"))
        modules.append(nn.Sigmoid())
    return nn.Sequential(modules)


@dataclass(frozen=True)
class EpochStats:
    loss: float
    accuracy: float


@dataclass
class TrainedModel:
    """A fitted classifier: architecture, weights, scaler, and history."""

    spec: ModelSpec
    scaler: FeatureScaler
    network: nn.Sequential
    history: list[EpochStats] = field(default_factory=list)

    def predict_probs(self, features: np.ndarray) -> np.ndarray:
        """Indoor probabilities for a (batch, d, features) tensor."""
        scaled = self.scaler.transform(features)
        return self.network.forward(scaled, train=False).ravel()

    def predict_windows(self, windows: list[Window]) -> np.ndarray:
        return self.predict_probs(window_tensor(windows))


def _check_finite(net: nn.Sequential, loss: float, epoch: int) -> None:
    if not np.isfinite(loss):
        raise TrainingDivergedError(epoch, f"loss is {loss!r}")
    for p in net.parameters():
        if not np.all(np.isfinite(p.value)):
            raise TrainingDivergedError(epoch, f"parameter {p.name} is non-finite")


def train(windows: list[Window], spec: ModelSpec, cfg: TrainConfig | None = None) -> TrainedModel:
    """Fit one classifier on labeled windows.

    The run is deterministic for a fixed spec seed: initialization, batch
    shuffling, and dropout masks all derive from it. Epoch statistics
    (mean batch loss, then full-set accuracy with dropout off) are
    recorded per epoch.
    """
    cfg = cfg or TrainConfig()
    if not windows:
        raise ValueError("training window set is empty")
    for w in windows:
        if w.d != spec.window_size:
            raise ValueError(
                f"window size {w.d} does not match spec window_size {spec.window_size}"
            )

    scaler = fit_scaler(windows)
    scaled = apply_scaler(scaler, windows)
    x = window_tensor(scaled)
    y = label_vector(scaled)

    net = build_network(spec)
    train_rng = np.random.default_rng(spec.seed)
    net.attach_dropout_rng(train_rng)
    optimizer = nn.Adam(
        net.parameters(),
        learning_rate=cfg.learning_rate,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        epsilon=cfg.epsilon,
    )

    history: list[EpochStats] = []
    n = len(windows)
    for epoch in range(cfg.epochs):
        order = train_rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            net.zero_grad()
            probs = net.forward(x[batch], train=True).ravel()
            loss = nn.bce_loss(y[batch], probs)
            _check_finite(net, loss, epoch)
            net.backward(nn.bce_grad(y[batch], probs).reshape(-1, 1))
            optimizer.step()
            _check_finite(net, loss, epoch)
            epoch_loss += loss
            batches += 1
        eval_probs = net.forward(x, train=False).ravel()
        accuracy = float(np.mean((eval_probs >= 0.5) == (y == 1.0)))
        history.append(EpochStats(loss=epoch_loss / batches, accuracy=accuracy))

    return TrainedModel(spec=spec, scaler=scaler, network=net, history=history)


def accuracy(model: TrainedModel, windows: list[Window]) -> float:
    """Fraction of windows whose thresholded prediction matches the label."""
    probs = model.predict_windows(windows)
    y = label_vector(windows)
    return float(np.mean((probs >= 0.5) == (y == 1.0)))


def predict_series(model: TrainedModel, session: SensorSession) -> IoSeries:
    """Per-timestep binary indoor predictions covering the whole session.

    Each window predicts its center; the (d - 1) / 2 timesteps at either
    edge take the nearest valid prediction so the series matches the
    session length.
    """
    d = model.spec.window_size
    if len(session) < d:
        raise ValueError(
            f"session '{session.session_id}' has {len(session)} readings, fewer than d={d}"
        )
    windows = make_windows(session, d)
    probs = model.predict_windows(windows)
    core = (probs >= 0.5).astype(int)
    half = (d - 1) // 2
    values = [int(core[0])] * half + core.tolist() + [int(core[-1])] * half
    return IoSeries(values=tuple(values))


def gradient_check(
    kind: str,
    *,
    window_size: int = 3,
    batch_size: int = 4,
    seed: int = 0,
    step: float = 1e-5,
) -> float:
    """Compare backprop against central finite differences for one kind.

    Uses a scaled-down model of the same architecture family (full widths
    for logistic/feedforward, narrow recurrent layers) on a random batch,
    with dropout disabled. Returns the max relative error.
    """
    if kind == "recurrent":
        spec = ModelSpec(
            kind=kind,
            window_size=window_size,
            hidden_sizes=(8, 6, 2),
            dropout_rate=0.0,
            seed=seed,
        )
    else:
        spec = ModelSpec(kind=kind, window_size=window_size, dropout_rate=0.0, seed=seed)
    net = build_network(spec)
    rng = np.random.default_rng(seed + 1)
    x = rng.normal(size=(batch_size, window_size, N_FEATURES))
    y = rng.integers(0, 2, size=batch_size).astype(np.float64)
    return nn.numeric_gradient_error(net, x, y, step=step)


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Write a model as a versioned JSON container."""
    payload = {
        "format": MODEL_FILE_FORMAT,
        "version": MODEL_FILE_VERSION,
        "spec": {
            "kind": model.spec.kind,
            "window_size": model.spec.window_size,
            "hidden_sizes": list(model.spec.resolved_hidden_sizes()),
            "dropout_rate": model.spec.dropout_rate,
            "seed": model.spec.seed,
        },
        "scaler": {
            "mean": model.scaler.mean.tolist(),
            "std": model.scaler.std.tolist(),
        },
        "params": [
            {"name": p.name, "shape": list(p.value.shape), "data": p.value.ravel().tolist()}
            for p in model.network.parameters()
        ],
        "history": [{"loss": h.loss, "accuracy": h.accuracy} for h in model.history],
    }
    with open(path, "w", encoding="utf-8") as sink:
        json.dump(payload, sink)


def load_model(path: str | Path) -> TrainedModel:
    """Load a model saved by `save_model`; predictions round-trip exactly."""
    try:
        with open(path, "r", encoding="utf-8") as source:
            payload = json.load(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"corrupt model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FILE_FORMAT:
        raise ModelFileError(f"{path} is not a {MODEL_FILE_FORMAT} file")
    if payload.get("version") != MODEL_FILE_VERSION:
        raise ModelFileError(
            f"unsupported model file version {payload.get('version')!r}; "
            f"expected {MODEL_FILE_VERSION}"
        )
    try:
        spec_data = payload["spec"]
        spec = ModelSpec(
            kind=spec_data["kind"],
            window_size=spec_data["window_size"],
            hidden_sizes=tuple(spec_data["hidden_sizes"]),
            dropout_rate=spec_data["dropout_rate"],
            seed=spec_data["seed"],
        )
        scaler = FeatureScaler(
            mean=np.array(payload["scaler"]["mean"], dtype=np.float64),
            std=np.array(payload["scaler"]["std"], dtype=np.float64),
        )
        net = build_network(spec)
        params = net.parameters()
        stored = payload["params"]
        if len(stored) != len(params):
            raise ModelFileError(
                f"parameter count mismatch: file has {len(stored)}, "
                f"architecture needs {len(params)}"
            )
        for p, entry in zip(params, stored):
            values = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            if values.shape != p.value.shape:
                raise ModelFileError(
                    f"parameter {p.name} has shape {values.shape}, expected {p.value.shape}"
                )
            p.value[...] = values
        history = [EpochStats(loss=h["loss"], accuracy=h["accuracy"]) for h in payload["history"]]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"corrupt model file {path}: {exc}") from exc
    return TrainedModel(spec=spec, scaler=scaler, network=net, history=history)


def train_timed(
    windows: list[Window], spec: ModelSpec, cfg: TrainConfig | None = None
) -> tuple[TrainedModel, float]:
    """`train` plus wall-clock seconds, for runtime-budgeted harnesses."""
    started = time.perf_counter()
    model = train(windows, spec, cfg)
    return model, time.perf_counter() - started
