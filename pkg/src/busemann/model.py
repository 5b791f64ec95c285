"""Euclidean network F, manual backpropagation, Adam, training and inference.

The network maps inputs to ``R^d``; ``exp0`` then carries the output into
the ball, where the penalized Busemann loss compares it with the fixed
prototype of its class.  Parameters stay Euclidean.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .data_io import Dataset
from .errors import InvalidInputError
from .geometry import exp0, geodesic_distance
from .loss import batch_loss, penalized_busemann_loss, phi_linear
from .prototypes import PrototypeSet

log = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "identity")


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        self.biases = np.array(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise InvalidInputError(
                f"layer shapes do not fit: weights {self.weights.shape}, biases {self.biases.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}")


@dataclass
class Model:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise InvalidInputError("a model needs at least one layer")
        for prev, nxt in zip(self.layers[:-1], self.layers[1:]):
            if prev.weights.shape[0] != nxt.weights.shape[1]:
                raise InvalidInputError(
                    f"layer output {prev.weights.shape[0]} does not feed input {nxt.weights.shape[1]}"
                )
        if self.layers[-1].activation != "identity":
            raise InvalidInputError("the last layer feeds exp0 and must be linear (identity)")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[0]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.biases]
        return out

    def copy(self) -> "Model":
        return Model([Layer(l.weights.copy(), l.biases.copy(), l.activation) for l in self.layers])

    def to_dict(self) -> list[dict]:
        return [{"weights": l.weights.tolist(), "biases": l.biases.tolist(),
                 "activation": l.activation} for l in self.layers]

    @classmethod
    def from_dict(cls, layers: list[dict]) -> "Model":
        return cls([Layer(np.asarray(l["weights"], dtype=np.float64), l["biases"], l["activation"])
                    for l in layers])


def init_model(input_dim: int, output_dim: int, hidden: tuple[int, ...] = (), seed: int = 0) -> Model:
    """Linear model (``hidden=()``) or ReLU MLP, weights and biases drawn
    uniformly from ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    if input_dim < 1 or output_dim < 1 or any(h < 1 for h in hidden):
        raise InvalidInputError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    sizes = [input_dim, *hidden, output_dim]
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        act = "identity" if i == len(sizes) - 2 else "relu"
        layers.append(Layer(rng.uniform(-bound, bound, (fan_out, fan_in)),
                            rng.uniform(-bound, bound, fan_out), act))
    return Model(layers)


def _as_batch(m: Model, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != m.input_dim:
        raise InvalidInputError(f"expected inputs of width {m.input_dim}, got shape {np.shape(x)}")
    return X, single


def _forward_trace(m: Model, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    for layer in m.layers:
        h = acts[-1] @ layer.weights.T + layer.biases
        if layer.activation == "relu":
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def forward(m: Model, x) -> np.ndarray:
    """F(x; theta) for one input ``(I,)`` or a batch ``(n, I)``."""
    X, single = _as_batch(m, x)
    out = _forward_trace(m, X)[-1]
    return out[0] if single else out


def backward(m: Model, x, upstream) -> list[np.ndarray]:
    """Parameter gradients given ``upstream = d(loss)/dF(x)``.

    Returned in the order of :meth:`Model.params`; batch contributions are
    summed, so pass upstream gradients already scaled for a mean loss.
    """
    X, single = _as_batch(m, x)
    G = np.asarray(upstream, dtype=np.float64)
    if single:
        G = G[None, :]
    if G.shape != (X.shape[0], m.output_dim):
        raise InvalidInputError(f"upstream shape {G.shape} does not match outputs {(X.shape[0], m.output_dim)}")
    acts = _forward_trace(m, X)
    grads: list[np.ndarray] = []
    for i in range(len(m.layers) - 1, -1, -1):
        layer = m.layers[i]
        if layer.activation == "relu":
            G = G * (acts[i + 1] > 0.0)
        grads = [G.T @ acts[i], G.sum(axis=0)] + grads
        G = G @ layer.weights
    return grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray],
              lr: float, weight_decay: float = 0.0) -> None:
    """One Adam update, in place.  Weight decay is an L2 term added to the
    gradient before the moment updates."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if weight_decay:
            g = g + weight_decay * p
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    weight_decay: float = 5e-5
    batch_size: int = 128
    epochs: int = 100
    lr_decay_epochs: list[int] = field(default_factory=list)
    lr_decay_factor: float = 10.0
    penalty_slope: float = 0.1
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise InvalidInputError("learning rate and batch size must be positive, epochs >= 0")
        if self.weight_decay < 0 or self.penalty_slope < 0 or self.lr_decay_factor <= 0:
            raise InvalidInputError("weight decay, penalty slope and decay factor must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainHistory:
    mean_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)


def train(m: Model, data: Dataset, protos: PrototypeSet, cfg: TrainConfig,
          val: Dataset | None = None,
          on_epoch: Callable[[int, float, float, float], None] | None = None,
          ) -> tuple[Model, TrainHistory]:
    """Minimize the mean penalized Busemann loss with mini-batch Adam.

    The input model is left untouched; a trained copy is returned.  Accuracy
    is tracked on ``val`` (or on ``data`` when no validation set is given).
    """
    if len(data) == 0:
        raise InvalidInputError("cannot train on an empty dataset")
    if data.input_dim != m.input_dim:
        raise InvalidInputError(f"data has {data.input_dim} features, model expects {m.input_dim}")
    if protos.dimension != m.output_dim:
        raise InvalidInputError(
            f"prototype dimension {protos.dimension} does not match model output {m.output_dim}"
        )
    if data.class_count > protos.num_classes:
        raise InvalidInputError(f"{data.class_count} classes but only {protos.num_classes} prototypes")

    model = m.copy()
    params = model.params()
    state = AdamState.zeros_like(params)
    phi = phi_linear(model.output_dim, cfg.penalty_slope)
    P = protos.points
    rng = np.random.default_rng(cfg.seed)
    history = TrainHistory()
    monitor = val if val is not None else data
    lr = cfg.learning_rate
    n = len(data)

    for epoch in range(cfg.epochs):
        if epoch in cfg.lr_decay_epochs:
            lr /= cfg.lr_decay_factor
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            Xb = data.features[idx]
            acts = forward(model, Xb)
            mean_b, g = batch_loss(acts, data.labels[idx], P, phi)
            total += mean_b * len(idx)
            grads = backward(model, Xb, g / len(idx))
            adam_step(state, params, grads, lr, cfg.weight_decay)
        mean_loss = total / n
        acc = accuracy(model, monitor, protos)
        history.mean_loss.append(mean_loss)
        history.val_accuracy.append(acc)
        history.learning_rate.append(lr)
        log.debug("epoch %d loss %.6f acc %.4f lr %g", epoch + 1, mean_loss, acc, lr)
        if on_epoch is not None:
            on_epoch(epoch + 1, mean_loss, acc, lr)
    return model, history


@dataclass(frozen=True)
class Prediction:
    label: int
    confidence: float
    degenerate: bool = False


def predict_embeddings(Z, protos) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Classify ball points by largest cosine with the prototypes.

    Returns ``(labels, origin_distance, degenerate)``.  Ties go to the lowest
    label; a point exactly at the origin gets label 0 and is flagged.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    P = np.asarray(getattr(protos, "points", protos), dtype=np.float64)
    norms = np.linalg.norm(Z, axis=1)
    degenerate = norms == 0.0
    cos = (Z @ P.T) / np.where(degenerate, 1.0, norms)[:, None]
    labels = np.argmax(cos, axis=1)
    labels[degenerate] = 0
    conf = geodesic_distance(np.zeros_like(Z), Z)
    return labels, np.atleast_1d(conf), degenerate


def predict_by_loss(Z, protos, phi: float) -> np.ndarray:
    """Classify by smallest penalized Busemann loss (ties to the lowest label)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    P = np.asarray(getattr(protos, "points", protos), dtype=np.float64)
    losses = np.stack([penalized_busemann_loss(Z, p, phi) for p in P], axis=1)
    return np.argmin(losses, axis=1)


def embed(m: Model, x) -> np.ndarray:
    return exp0(forward(m, x))


def predict(m: Model, x, protos: PrototypeSet, phi: float = 0.0) -> Prediction:
    """Predicted class and confidence (geodesic distance of the embedding from
    the origin) for a single input.  ``phi`` does not change the class; it is
    accepted for symmetry with the loss-based rule."""
    if protos.num_classes < 2:
        raise InvalidInputError("need at least two prototypes")
    z = embed(m, np.asarray(x, dtype=np.float64))
    labels, conf, degen = predict_embeddings(z, protos)
    return Prediction(int(labels[0]), float(conf[0]), bool(degen[0]))


def accuracy(m: Model, data: Dataset, protos: PrototypeSet) -> float:
    labels, _, _ = predict_embeddings(embed(m, data.features), protos)
    return float(np.mean(labels == data.labels))


def _log_sigmoid(y):
    return -np.logaddexp(0.0, -y)


def logreg_equivalence_check(samples: int = 1000, seed: int = 0, scale: float = 10.0) -> dict:
    """Compare half the 1-D penalized loss (``phi = 1``) plus ``log 2`` with
    binary cross-entropy of the logistic output, pointwise.

    Pre-activations ``y`` are uniform on ``[-scale, scale]``; labels ``p'`` are
    fair coin flips, mapped to the ideal points ``2p' - 1``.
    """
    if samples < 1:
        raise InvalidInputError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    y = rng.uniform(-scale, scale, samples)
    target = rng.integers(0, 2, samples)
    z = exp0(y[:, None])
    ell = np.array([penalized_busemann_loss(z[i], [2.0 * target[i] - 1.0], 1.0)
                    for i in range(samples)])
    lhs = ell / 2.0 + np.log(2.0)
    ce = -(target * _log_sigmoid(y) + (1 - target) * _log_sigmoid(-y))
    dev = np.abs(lhs - ce)
    worst = int(np.argmax(dev))
    return {"samples": samples, "seed": seed, "max_abs_deviation": float(dev[worst]),
            "worst_case": {"y": float(y[worst]), "label": int(target[worst])}}
