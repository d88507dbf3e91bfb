"""Dense feed-forward networks: sigmoid hidden layers, softmax output,
minibatch SGD with cross-entropy loss and a newbob-style learning-rate
schedule (hold while CV accuracy ramps, then halve until the gain drops
below the stopping threshold)."""

from __future__ import annotations

import copy
import csv
import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionMismatch, LabelOutOfRange, NonFiniteGradient)
from .features import FeatureSequence

POSTERIOR_CLAMP = 1e-12


class Activation(enum.Enum):
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"


@dataclass
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: Activation


@dataclass
class Layer:
    weights: np.ndarray  # out_dim x in_dim
    bias: np.ndarray     # out_dim
    activation: Activation

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class MlpModel:
    layers: list[Layer]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise DimensionMismatch(
                    f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
            if a.activation is Activation.SOFTMAX:
                raise DimensionMismatch("softmax allowed only on the final layer")
        if self.layers and self.layers[-1].activation is not Activation.SOFTMAX:
            raise DimensionMismatch("final layer must be softmax")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim


@dataclass
class TrainSchedule:
    """SGD recipe: fixed rate while CV accuracy ramps, then halving."""

    initial_lr: float = 0.002
    ramp_improvement_threshold: float = 0.5   # percentage points
    stop_improvement_threshold: float = 0.1   # percentage points
    minibatch_frames: int = 1024
    cv_fraction: float = 0.10
    max_epochs: int = 50
    min_epochs: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.stop_improvement_threshold
                < self.ramp_improvement_threshold):
            raise ValueError("need 0 < stop threshold < ramp threshold")
        if not (0.0 < self.cv_fraction < 1.0):
            raise ValueError("cv_fraction must be in (0, 1)")
        if self.min_epochs < 0:
            raise ValueError("min_epochs must be non-negative")


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    cv_accuracy: float


class NewbobSchedule:
    """Learning-rate state machine driven by successive CV accuracies.

    The rate stays at ``initial_lr`` while the epoch-over-epoch accuracy
    gain exceeds the ramp threshold; afterwards it halves every epoch.
    Training stops once the gain falls below the stopping threshold.
    """

    def __init__(self, schedule: TrainSchedule, baseline_accuracy: float):
        self.schedule = schedule
        self.lr = schedule.initial_lr
        self.ramping = True
        self.prev_accuracy = baseline_accuracy

    def update(self, cv_accuracy: float) -> bool:
        """Record one epoch's CV accuracy; returns True when training should stop.

        Also advances ``self.lr`` to the rate for the next epoch.
        """
        gain = cv_accuracy - self.prev_accuracy
        self.prev_accuracy = cv_accuracy
        stop = gain < self.schedule.stop_improvement_threshold
        if self.ramping and gain <= self.schedule.ramp_improvement_threshold:
            self.ramping = False
        if not self.ramping:
            self.lr /= 2.0
        return stop


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


def init_random(layer_dims: list[int], rng: np.random.Generator) -> MlpModel:
    """Random init: weights uniform(-r, r) with r = sqrt(6/(in+out)), zero biases.

    ``layer_dims`` lists every dimension input->...->output; the last
    layer is softmax, all earlier ones sigmoid.
    """
    layers = []
    for i, (d_in, d_out) in enumerate(zip(layer_dims, layer_dims[1:])):
        r = np.sqrt(6.0 / (d_in + d_out))
        w = rng.uniform(-r, r, size=(d_out, d_in))
        act = Activation.SOFTMAX if i == len(layer_dims) - 2 else Activation.SIGMOID
        layers.append(Layer(weights=w, bias=np.zeros(d_out), activation=act))
    return MlpModel(layers=layers)


def forward(model: MlpModel, batch: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Run a B x D_in batch through the net.

    Returns (per-layer activations including the input, final posteriors).
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"batch dim {batch.shape[1]} != model input {model.input_dim}")
    activations = [batch]
    a = batch
    for layer in model.layers:
        z = a @ layer.weights.T + layer.bias
        a = _softmax(z) if layer.activation is Activation.SOFTMAX else _sigmoid(z)
        activations.append(a)
    return activations, a


def cross_entropy(posteriors: np.ndarray, labels: np.ndarray) -> float:
    """Mean -ln p[label], with posteriors clamped below at 1e-12."""
    posteriors = np.atleast_2d(posteriors)
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= posteriors.shape[1]:
        raise LabelOutOfRange(
            f"labels must lie in [0, {posteriors.shape[1]}) for this posterior matrix")
    picked = posteriors[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, POSTERIOR_CLAMP)).mean())


def backprop_step(model: MlpModel, batch: np.ndarray, labels: np.ndarray,
                  lr: float) -> float:
    """One SGD step (mean gradient over the batch, no momentum/decay).

    Updates the model in place; returns the pre-update batch loss.
    """
    activations, posteriors = forward(model, batch)
    labels = np.asarray(labels)
    loss = cross_entropy(posteriors, labels)
    b = batch.shape[0]
    onehot = np.zeros_like(posteriors)
    onehot[np.arange(b), labels] = 1.0
    delta = (posteriors - onehot) / b  # softmax + cross-entropy
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        a_in = activations[i]
        grad_w = delta.T @ a_in
        grad_b = delta.sum(axis=0)
        if not (np.isfinite(grad_w).all() and np.isfinite(grad_b).all()):
            raise NonFiniteGradient(f"non-finite gradient at layer {i}")
        if i > 0:
            # sigmoid derivative expressed through the activation itself
            delta = (delta @ layer.weights) * (activations[i] * (1.0 - activations[i]))
        layer.weights -= lr * grad_w
        layer.bias -= lr * grad_b
    return loss


def gradients(model: MlpModel, batch: np.ndarray,
              labels: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Mean-over-batch gradients per layer, without updating the model."""
    activations, posteriors = forward(model, batch)
    labels = np.asarray(labels)
    b = batch.shape[0]
    onehot = np.zeros_like(posteriors)
    onehot[np.arange(b), labels] = 1.0
    delta = (posteriors - onehot) / b
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.layers)
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        grads[i] = (delta.T @ activations[i], delta.sum(axis=0))
        if i > 0:
            delta = (delta @ layer.weights) * (activations[i] * (1.0 - activations[i]))
    return grads


def train(init_model: MlpModel, train_set: tuple[np.ndarray, np.ndarray],
          schedule: TrainSchedule) -> tuple[MlpModel, list[EpochRecord]]:
    """Minibatch SGD with a seeded CV split and the newbob-style schedule.

    ``train_set`` is (X, y) with one labeled feature vector per frame.
    Returns the final-epoch model and the per-epoch history.
    """
    x, y = train_set
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    model = copy.deepcopy(init_model)
    if schedule.max_epochs == 0:
        return model, []
    rng = np.random.default_rng(schedule.rng_seed)
    n = x.shape[0]
    perm = rng.permutation(n)
    n_cv = max(1, int(round(schedule.cv_fraction * n)))
    cv_idx, tr_idx = perm[:n_cv], perm[n_cv:]
    x_cv, y_cv = x[cv_idx], y[cv_idx]
    x_tr, y_tr = x[tr_idx], y[tr_idx]

    baseline = _frame_accuracy_pct(model, x_cv, y_cv)
    newbob = NewbobSchedule(schedule, baseline)
    history: list[EpochRecord] = []
    for epoch in range(1, schedule.max_epochs + 1):
        lr = newbob.lr
        order = rng.permutation(len(x_tr))
        losses = []
        for start in range(0, len(order), schedule.minibatch_frames):
            sel = order[start:start + schedule.minibatch_frames]
            losses.append(backprop_step(model, x_tr[sel], y_tr[sel], lr))
        cv_acc = _frame_accuracy_pct(model, x_cv, y_cv)
        history.append(EpochRecord(epoch=epoch, lr=lr,
                                   train_loss=float(np.mean(losses)),
                                   cv_accuracy=cv_acc))
        if epoch <= schedule.min_epochs:
            # warmup: hold the rate and defer schedule decisions; the
            # last warmup epoch's accuracy becomes the newbob baseline
            newbob.prev_accuracy = cv_acc
            continue
        if newbob.update(cv_acc):
            break
    return model, history


def _frame_accuracy_pct(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    _, post = forward(model, x)
    return float(100.0 * np.mean(post.argmax(axis=1) == y))


def predict_frames(model: MlpModel, seq) -> np.ndarray:
    """Per-frame argmax label; ties break to the lowest class index."""
    frames = seq.frames if isinstance(seq, FeatureSequence) else np.atleast_2d(seq)
    _, post = forward(model, frames)
    return post.argmax(axis=1)


# --- model file format ("ACNN") ---

_MODEL_MAGIC = b"ACNN"
_MODEL_VERSION = 1
_ACT_CODES = {Activation.SIGMOID: 0, Activation.SOFTMAX: 1}
_CODE_ACTS = {v: k for k, v in _ACT_CODES.items()}


def model_to_bytes(model: MlpModel) -> bytes:
    parts = [_MODEL_MAGIC, struct.pack("<II", _MODEL_VERSION, len(model.layers))]
    for layer in model.layers:
        parts.append(struct.pack("<IIB", layer.in_dim, layer.out_dim,
                                 _ACT_CODES[layer.activation]))
        parts.append(layer.weights.astype("<f8").tobytes())
        parts.append(layer.bias.astype("<f8").tobytes())
    return b"".join(parts)


def model_from_bytes(blob: bytes, offset: int = 0) -> tuple[MlpModel, int]:
    """Parse a model from a byte buffer; returns (model, next offset)."""
    if blob[offset:offset + 4] != _MODEL_MAGIC:
        raise DimensionMismatch("not a model blob")
    version, num_layers = struct.unpack_from("<II", blob, offset + 4)
    if version != _MODEL_VERSION:
        raise DimensionMismatch(f"unsupported model version {version}")
    pos = offset + 12
    layers = []
    for _ in range(num_layers):
        d_in, d_out, act = struct.unpack_from("<IIB", blob, pos)
        pos += 9
        w = np.frombuffer(blob, dtype="<f8", count=d_in * d_out,
                          offset=pos).reshape(d_out, d_in).copy()
        pos += 8 * d_in * d_out
        bias = np.frombuffer(blob, dtype="<f8", count=d_out, offset=pos).copy()
        pos += 8 * d_out
        layers.append(Layer(weights=w, bias=bias, activation=_CODE_ACTS[act]))
    return MlpModel(layers=layers), pos


def save_model(model: MlpModel, path) -> None:
    with open(path, "wb") as f:
        f.write(model_to_bytes(model))


def load_model(path) -> MlpModel:
    with open(path, "rb") as f:
        model, _ = model_from_bytes(f.read())
    return model


def write_history_csv(history: list[EpochRecord], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "lr", "train_loss", "cv_accuracy"])
        for rec in history:
            writer.writerow([rec.epoch, rec.lr, rec.train_loss, rec.cv_accuracy])
