"""Synthetic federated classification task: data, models, local training.

The dataset is a Gaussian mixture (one fixed random unit direction per
class, scaled by the separation knob, unit isotropic noise), split across
clients by a per-class Dirichlet draw.  Models are a multiclass linear
classifier or a one-hidden-layer tanh MLP trained with softmax
cross-entropy; local training runs the momentum recursion
m <- (1-beta)*m + beta*g, x <- x - eta*m.

Note the convention: beta multiplies the fresh gradient, so beta=1 is plain
SGD and smaller beta means heavier momentum.  The classical momentum
coefficients 0 and 0.9 correspond to beta=1.0 and beta=0.1 here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .validation import ValidationError

logger = logging.getLogger("byzsim")


@dataclass
class Dataset:
    features: np.ndarray  # (n, feature_dim) float64
    labels: np.ndarray  # (n,) int64 in [0, num_classes)
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValidationError("features/labels shape mismatch", code="bad_dataset")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("features contain NaN/Inf", code="bad_dataset")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValidationError("labels out of range", code="bad_dataset")

    def __len__(self) -> int:
        return self.features.shape[0]


class Architecture(str, Enum):
    LINEAR = "linear"
    MLP = "mlp"


@dataclass(frozen=True)
class ModelSpec:
    arch: Architecture
    feature_dim: int
    num_classes: int
    hidden_width: int = 32

    @property
    def dimension(self) -> int:
        f, c, hw = self.feature_dim, self.num_classes, self.hidden_width
        if self.arch is Architecture.LINEAR:
            return c * f + c
        return hw * f + hw + c * hw + c


@dataclass
class Model:
    """Flat-parameter classifier; all layer views index into ``params``."""

    spec: ModelSpec
    params: np.ndarray

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64).reshape(-1)
        if self.params.shape[0] != self.spec.dimension:
            raise ValidationError(
                f"parameter vector has {self.params.shape[0]} entries, "
                f"architecture needs {self.spec.dimension}",
                code="bad_model",
            )

    @classmethod
    def init(cls, spec: ModelSpec, rng: np.random.Generator, scale: float = 0.01) -> "Model":
        return cls(spec, scale * rng.standard_normal(spec.dimension))

    def copy(self) -> "Model":
        return Model(self.spec, self.params.copy())

    def _layers(self, params: np.ndarray):
        s = self.spec
        if s.arch is Architecture.LINEAR:
            w = params[: s.num_classes * s.feature_dim].reshape(s.num_classes, s.feature_dim)
            b = params[s.num_classes * s.feature_dim :]
            return w, b
        hw = s.hidden_width
        i = 0
        w1 = params[i : i + hw * s.feature_dim].reshape(hw, s.feature_dim)
        i += hw * s.feature_dim
        b1 = params[i : i + hw]
        i += hw
        w2 = params[i : i + s.num_classes * hw].reshape(s.num_classes, hw)
        i += s.num_classes * hw
        b2 = params[i:]
        return w1, b1, w2, b2

    def logits(self, features: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        params = self.params if params is None else params
        if self.spec.arch is Architecture.LINEAR:
            w, b = self._layers(params)
            return features @ w.T + b
        w1, b1, w2, b2 = self._layers(params)
        hidden = np.tanh(features @ w1.T + b1)
        return hidden @ w2.T + b2

    def loss(self, dataset: Dataset, params: np.ndarray | None = None) -> float:
        z = self.logits(dataset.features, params)
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        return float(-logp[np.arange(len(dataset)), dataset.labels].mean())


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def gradient(model: Model, batch: Dataset, params: np.ndarray | None = None) -> np.ndarray:
    """Exact gradient of the mean softmax cross-entropy over the batch."""
    if len(batch) == 0:
        raise ValidationError("empty batch", code="empty_batch")
    params = model.params if params is None else params
    x, y = batch.features, batch.labels
    n = len(batch)
    spec = model.spec
    if spec.arch is Architecture.LINEAR:
        probs = _softmax(model.logits(x, params))
        probs[np.arange(n), y] -= 1.0
        probs /= n
        gw = probs.T @ x
        gb = probs.sum(axis=0)
        return np.concatenate([gw.reshape(-1), gb])
    w1, b1, w2, b2 = model._layers(params)
    pre = x @ w1.T + b1
    hidden = np.tanh(pre)
    probs = _softmax(hidden @ w2.T + b2)
    probs[np.arange(n), y] -= 1.0
    probs /= n
    gw2 = probs.T @ hidden
    gb2 = probs.sum(axis=0)
    dhidden = (probs @ w2) * (1.0 - hidden**2)
    gw1 = dhidden.T @ x
    gb1 = dhidden.sum(axis=0)
    return np.concatenate([gw1.reshape(-1), gb1, gw2.reshape(-1), gb2])


def evaluate(model: Model, dataset: Dataset) -> float:
    """Fraction of argmax-correct predictions."""
    if len(dataset) == 0:
        raise ValidationError("empty dataset", code="empty_dataset")
    pred = model.logits(dataset.features).argmax(axis=1)
    return float((pred == dataset.labels).mean())


def synth_dataset(
    num_classes: int,
    samples: int,
    feature_dim: int,
    class_separation: float,
    rng: np.random.Generator,
) -> Dataset:
    """Gaussian-mixture data: class c sits at separation * (random unit dir)."""
    if num_classes < 1 or samples < 1 or feature_dim < 1:
        raise ValidationError("counts must be positive", code="bad_dataset_params")
    directions = rng.standard_normal((num_classes, feature_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    centers = class_separation * directions
    labels = rng.integers(0, num_classes, size=samples)
    features = centers[labels] + rng.standard_normal((samples, feature_dim))
    return Dataset(features, labels, num_classes)


def dirichlet_partition(
    dataset: Dataset,
    n_clients: int,
    concentration: float,
    rng: np.random.Generator,
) -> list[Dataset]:
    """Split per class by Dirichlet(concentration) proportions over clients.

    Every sample lands in exactly one shard; empty shards are allowed but
    logged as a warning.
    """
    if n_clients < 1:
        raise ValidationError("n_clients must be >= 1", code="bad_partition_params")
    if concentration <= 0:
        raise ValidationError("concentration must be > 0", code="bad_partition_params")
    per_client: list[list[int]] = [[] for _ in range(n_clients)]
    for c in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == c)
        rng.shuffle(idx)
        props = rng.dirichlet(np.full(n_clients, concentration))
        cuts = (np.cumsum(props)[:-1] * len(idx)).astype(int)
        for client, chunk in enumerate(np.split(idx, cuts)):
            per_client[client].extend(chunk.tolist())
    shards = []
    empty = 0
    for rows in per_client:
        rows = np.asarray(sorted(rows), dtype=np.int64)
        empty += len(rows) == 0
        shards.append(Dataset(dataset.features[rows], dataset.labels[rows], dataset.num_classes))
    if empty:
        logger.warning("dirichlet partition produced %d empty client shard(s)", empty)
    return shards


@dataclass
class MomentumState:
    """Per-client momentum buffer; the first observed gradient seeds m."""

    m: np.ndarray
    beta: float

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.float64).reshape(-1)
        if not 0.0 < self.beta <= 1.0:
            raise ValidationError("beta must be in (0, 1]", code="bad_momentum")


def local_train(
    model: Model,
    shard: Dataset,
    eta: float,
    beta: float,
    local_steps: int,
    momentum_state: MomentumState | None,
    rng: np.random.Generator,
    batch_size: int = 32,
) -> tuple[np.ndarray, MomentumState]:
    """Run local_steps of momentum SGD on minibatches from the shard.

    Returns (delta, new_momentum) where delta = x_final - x_initial; the
    input model is not mutated.
    """
    if len(shard) == 0:
        raise ValidationError("empty shard", code="empty_shard")
    if eta <= 0 or local_steps < 1:
        raise ValidationError("eta must be > 0 and local_steps >= 1", code="bad_train_params")
    if not 0.0 < beta <= 1.0:
        raise ValidationError("beta must be in (0, 1]", code="bad_train_params")
    # The update is accumulated separately from the parameters so that the
    # returned delta applies back bit-exactly: params + delta == final state.
    delta = np.zeros_like(model.params)
    m = None if momentum_state is None else momentum_state.m.copy()
    take = min(batch_size, len(shard))
    for _ in range(local_steps):
        if take == len(shard):
            batch = shard  # full pass, keep sample order for exact replay
        else:
            rows = rng.choice(len(shard), size=take, replace=False)
            batch = Dataset(shard.features[rows], shard.labels[rows], shard.num_classes)
        g = gradient(model, batch, params=model.params + delta)
        m = g.copy() if m is None else (1.0 - beta) * m + beta * g
        delta -= eta * m
    return delta, MomentumState(m, beta)


def compute_trusted_update(
    model: Model,
    root_dataset: Dataset,
    eta: float,
    local_steps: int,
    rng: np.random.Generator,
    batch_size: int = 32,
) -> np.ndarray:
    """Server-side fine-tuning update on the trusted root shard (beta=1)."""
    if len(root_dataset) == 0:
        raise ValidationError("empty root dataset", code="empty_shard")
    delta, _ = local_train(
        model, root_dataset, eta, 1.0, local_steps, None, rng, batch_size=batch_size
    )
    return delta


def measure_local_variance(
    model: Model,
    shard: Dataset,
    rng: np.random.Generator,
    batch_size: int = 32,
    n_batches: int = 100,
) -> float:
    """Empirical minibatch-gradient variance at fixed parameters (G_l^2 proxy)."""
    grads = []
    take = min(batch_size, len(shard))
    for _ in range(n_batches):
        rows = rng.choice(len(shard), size=take, replace=False)
        grads.append(gradient(model, Dataset(shard.features[rows], shard.labels[rows], shard.num_classes)))
    grads = np.stack(grads)
    center = grads.mean(axis=0)
    return float(((grads - center) ** 2).sum(axis=1).mean())


def measure_heterogeneity(model: Model, shards: list[Dataset]) -> float:
    """Max over clients of ||grad_i - grad_global||^2 (G_g^2 proxy)."""
    nonempty = [s for s in shards if len(s)]
    grads = np.stack([gradient(model, s) for s in nonempty])
    sizes = np.array([len(s) for s in nonempty], dtype=np.float64)
    global_grad = (sizes / sizes.sum()) @ grads
    return float(((grads - global_grad) ** 2).sum(axis=1).max())


def save_columnar(dataset: Dataset, path) -> None:
    """Write the columnar text format: a `feature_dim,num_classes` header,
    then one `f1,...,fd,label` row per sample."""
    lines = [f"{dataset.features.shape[1]},{dataset.num_classes}"]
    for row, label in zip(dataset.features, dataset.labels):
        lines.append(",".join(repr(v) for v in row.tolist()) + f",{int(label)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_columnar(path) -> Dataset:
    """Read the columnar text format written by save_columnar."""
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty dataset file", code="bad_dataset_file")
    try:
        feature_dim, num_classes = (int(v) for v in lines[0].split(","))
    except ValueError:
        raise ValidationError(
            f"{path}: header must be 'feature_dim,num_classes'", code="bad_dataset_file"
        ) from None
    features, labels = [], []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != feature_dim + 1:
            raise ValidationError(
                f"{path}: line {i} has {len(parts)} fields, expected {feature_dim + 1}",
                code="bad_dataset_file",
            )
        features.append([float(v) for v in parts[:-1]])
        labels.append(int(parts[-1]))
    return Dataset(np.asarray(features), np.asarray(labels), num_classes)
