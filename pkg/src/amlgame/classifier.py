"""Small convolutional two-class classifier on (2, 16) I/Q blocks.

Layer stack: Conv(32 filters, 1x3 kernel, ReLU, valid) sliding along the sample
axis of each I/Q row -> flatten -> Dense(32, ReLU) -> Dropout(0.1) ->
Dense(2, softmax). Forward and backward passes are plain numpy; training uses
Adam on categorical cross-entropy.

Class index 1 is the "positive" label: 'signal' for the defender's sensing model,
'successful transmission' (i.e. jam) for the adversary's surrogate.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .waveform import IqFrame, RngSeed, stack_frames

logger = logging.getLogger(__name__)

N_FILTERS = 32
KERNEL = 3
HIDDEN = 32
N_CLASSES = 2
DROPOUT = 0.1
PARAM_ORDER = ("conv_w", "conv_b", "w1", "b1", "w2", "b2")
MAGIC = "amlgame-cnn/1"


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: RngSeed = RngSeed(0, 2)
    beta1: float = 0.9
    beta2: float = 0.999
    momentum: float = 0.9
    weight_decay: float = 0.0
    augment: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("adam", "momentum"):
            raise ValueError("optimizer must be 'adam' or 'momentum'")


@dataclass(frozen=True)
class Prediction:
    label: int
    confidence: float


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _windows(x: np.ndarray) -> np.ndarray:
    # (B, 2, m) -> (B, 2, m - KERNEL + 1, KERNEL)
    return np.lib.stride_tricks.sliding_window_view(x, KERNEL, axis=2)


@dataclass
class ClassifierModel:
    params: dict[str, np.ndarray]
    samples_per_frame: int = 16
    seed: RngSeed | None = None
    accuracy: float | None = None
    loss_history: list[float] = field(default_factory=list)

    @classmethod
    def init(cls, samples_per_frame: int, rng: np.random.Generator) -> ClassifierModel:
        if samples_per_frame < KERNEL:
            raise ValueError(f"frames need at least {KERNEL} samples")
        flat = 2 * (samples_per_frame - KERNEL + 1) * N_FILTERS
        params = {
            "conv_w": rng.standard_normal((N_FILTERS, KERNEL)) * np.sqrt(2.0 / KERNEL),
            "conv_b": np.zeros(N_FILTERS),
            "w1": rng.standard_normal((flat, HIDDEN)) * np.sqrt(2.0 / flat),
            "b1": np.zeros(HIDDEN),
            "w2": rng.standard_normal((HIDDEN, N_CLASSES)) * np.sqrt(2.0 / (HIDDEN + N_CLASSES)),
            "b2": np.zeros(N_CLASSES),
        }
        return cls(params, samples_per_frame)

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[None]
        if x.shape[1:] != (2, self.samples_per_frame):
            raise ValueError(f"expected frames of shape (2, {self.samples_per_frame}), got {x.shape[1:]}")
        return x

    def forward(self, x: np.ndarray, dropout_mask: np.ndarray | None = None):
        """Return ``(probs, cache)``. ``dropout_mask`` is pre-scaled (inverted dropout)."""
        p = self.params
        cols = _windows(x)
        conv = cols @ p["conv_w"].T + p["conv_b"]
        a1 = np.maximum(conv, 0.0)
        flat = a1.reshape(len(x), -1)
        h = flat @ p["w1"] + p["b1"]
        a2 = np.maximum(h, 0.0)
        if dropout_mask is not None:
            a2 = a2 * dropout_mask
        logits = a2 @ p["w2"] + p["b2"]
        return softmax(logits), (cols, conv, flat, h, a2, dropout_mask)

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray, dropout_mask: np.ndarray | None = None):
        """Mean cross-entropy and its gradient for every parameter tensor."""
        p = self.params
        probs, (cols, conv, flat, h, a2, mask) = self.forward(x, dropout_mask)
        n = len(x)
        loss = -np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None)))
        d_logits = probs.copy()
        d_logits[np.arange(n), y] -= 1.0
        d_logits /= n
        g = {"w2": a2.T @ d_logits, "b2": d_logits.sum(0)}
        d_a2 = d_logits @ p["w2"].T
        if mask is not None:
            d_a2 = d_a2 * mask
        d_h = d_a2 * (h > 0)
        g["w1"] = flat.T @ d_h
        g["b1"] = d_h.sum(0)
        d_conv = (d_h @ p["w1"].T).reshape(conv.shape) * (conv > 0)
        g["conv_w"] = np.einsum("brjf,brjk->fk", d_conv, cols)
        g["conv_b"] = d_conv.sum(axis=(0, 1, 2))
        return loss, g

    def predict_proba(self, x: np.ndarray, chunk: int = 4096) -> np.ndarray:
        x = self._check(x)
        out = [self.forward(x[i : i + chunk])[0] for i in range(0, len(x), chunk)]
        return np.concatenate(out) if out else np.empty((0, N_CLASSES))

    def predict_arrays(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised ``(labels, confidences)``."""
        probs = self.predict_proba(x)
        return probs.argmax(axis=1), probs.max(axis=1)


def _optimizer_step(model, grads, state, cfg: TrainConfig):
    state["t"] += 1
    t = state["t"]
    for k in PARAM_ORDER:
        g = grads[k]
        if cfg.optimizer == "adam":
            m = state["m"][k] = cfg.beta1 * state["m"][k] + (1 - cfg.beta1) * g
            v = state["v"][k] = cfg.beta2 * state["v"][k] + (1 - cfg.beta2) * g * g
            m_hat = m / (1 - cfg.beta1**t)
            v_hat = v / (1 - cfg.beta2**t)
            model.params[k] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + 1e-8)
        else:
            v = state["m"][k] = cfg.momentum * state["m"][k] - cfg.learning_rate * g
            model.params[k] += v


def augment_batch(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Label-preserving perturbation: random carrier phase and sample order.

    Background frames are circularly symmetric and i.i.d. across samples, so a
    common phase rotation or a permutation of the sample axis leaves the class
    distribution unchanged.
    """
    z = x[:, 0] + 1j * x[:, 1]
    z = z * np.exp(1j * rng.uniform(0, 2 * np.pi, size=(len(z), 1)))
    z = np.take_along_axis(z, rng.permuted(np.tile(np.arange(z.shape[1]), (len(z), 1)), axis=1), axis=1)
    return np.stack([z.real, z.imag], axis=1)


def train_arrays(x: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> ClassifierModel:
    """Train on arrays ``x`` of shape ``(n, 2, m)`` and integer labels ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise ValueError("training set must contain both classes")
    rng = cfg.seed.rng()
    model = ClassifierModel.init(x.shape[2], rng)
    model.seed = cfg.seed
    state = {
        "t": 0,
        "m": {k: np.zeros_like(v) for k, v in model.params.items()},
        "v": {k: np.zeros_like(v) for k, v in model.params.items()},
    }
    n = len(x)
    model.loss_history.append(model.loss_and_grads(x, y)[0])
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            keep = rng.random((len(idx), HIDDEN)) >= DROPOUT
            mask = keep / (1.0 - DROPOUT)
            xb = augment_batch(x[idx], rng) if cfg.augment else x[idx]
            loss, grads = model.loss_and_grads(xb, y[idx], mask)
            if cfg.weight_decay:
                for k in ("conv_w", "w1", "w2"):
                    grads[k] = grads[k] + cfg.weight_decay * model.params[k]
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {state['t']}")
            _optimizer_step(model, grads, state, cfg)
    final = model.loss_and_grads(x, y)[0]
    if not np.isfinite(final):
        raise TrainingError("non-finite loss after training")
    model.loss_history.append(final)
    return model


def train(train_set: Sequence[IqFrame], cfg: TrainConfig) -> ClassifierModel:
    x, y = stack_frames(train_set)
    return train_arrays(x, y, cfg)


def predict(model: ClassifierModel, frame: IqFrame) -> Prediction:
    probs = model.predict_proba(frame.iq)[0]
    label = int(np.argmax(probs))
    return Prediction(label, float(probs[label]))


def evaluate(model: ClassifierModel, test_set: Sequence[IqFrame]) -> float:
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    x, y = stack_frames(test_set)
    labels, _ = model.predict_arrays(x)
    return float(np.mean(labels == y))


def save_model(model: ClassifierModel, path: str | Path, meta: dict | None = None) -> None:
    """Write a JSON header line followed by raw little-endian float64 weights.

    The file is written to a temporary sibling and renamed, so a failed write
    leaves nothing behind.
    """
    header = {
        "format": MAGIC,
        "samples_per_frame": model.samples_per_frame,
        "layers": [[k, list(model.params[k].shape)] for k in PARAM_ORDER],
        "seed": None if model.seed is None else [model.seed.master_seed, model.seed.stream_index, list(model.seed.path)],
        "accuracy": model.accuracy,
        "loss_history": model.loss_history,
    }
    if meta:
        header["meta"] = meta
    body = b"".join(np.ascontiguousarray(model.params[k], dtype="<f8").tobytes() for k in PARAM_ORDER)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if tmp.exists():
            tmp.unlink()
        raise


def load_model(path: str | Path) -> ClassifierModel:
    with open(path, "rb") as fh:
        head = fh.readline()
        body = fh.read()
    try:
        header = json.loads(head)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a model file") from exc
    if header.get("format") != MAGIC:
        raise ValueError(f"{path}: unknown model format {header.get('format')!r}")
    params, offset = {}, 0
    for name, shape in header["layers"]:
        size = int(np.prod(shape)) * 8
        if offset + size > len(body):
            raise ValueError(f"{path}: truncated weights for {name}")
        params[name] = np.frombuffer(body[offset : offset + size], dtype="<f8").reshape(shape).astype(float)
        offset += size
    if offset != len(body):
        raise ValueError(f"{path}: trailing bytes after weights")
    seed = header.get("seed")
    return ClassifierModel(
        params,
        header["samples_per_frame"],
        None if seed is None else RngSeed(seed[0], seed[1], tuple(seed[2])),
        header.get("accuracy"),
        list(header.get("loss_history", [])),
    )
