"""Linear softmax surrogate classifier and sign-gradient l-infinity attacks.

Every attack uses ``sign(0) = 0`` and works on images with pixels in [0, 1].
Functions accept either a single ``W x H x 3`` image or an ``N x W x H x 3``
batch; a batch takes an array of labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError


@dataclass
class LabeledDataset:
    """Images (``N x W x H x 3``) with integer labels and optional split tags."""

    images: np.ndarray
    labels: np.ndarray
    splits: Sequence[str] | None = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or self.images.shape[3] != 3:
            raise DomainError(f"images must be N x W x H x 3, got {self.images.shape}")
        if self.images.shape[0] == 0:
            raise DomainError("a dataset must not be empty")
        if self.labels.shape != (self.images.shape[0],):
            raise DomainError("one label per image is required")
        if self.labels.min() < 0:
            raise DomainError("labels must be nonnegative")
        if self.splits is not None:
            self.splits = list(self.splits)
            if len(self.splits) != len(self.labels):
                raise DomainError("one split tag per image is required")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, split: str) -> "LabeledDataset":
        if self.splits is None:
            raise DomainError("dataset has no split tags")
        idx = [i for i, s in enumerate(self.splits) if s == split]
        if not idx:
            raise DomainError(f"no records tagged {split!r}")
        return LabeledDataset(self.images[idx], self.labels[idx], [split] * len(idx))


@dataclass
class LinearSoftmaxClassifier:
    """``softmax(W x + b)`` over flattened images."""

    weights: np.ndarray
    bias: np.ndarray
    image_shape: tuple[int, int, int]
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        self.image_shape = tuple(int(v) for v in self.image_shape)
        c, d = self.weights.shape
        if c < 2:
            raise DomainError("a classifier needs at least two classes")
        if d != int(np.prod(self.image_shape)):
            raise DomainError(f"weights have {d} features but images hold {np.prod(self.image_shape)}")
        if self.bias.shape != (c,):
            raise DomainError("bias must have one entry per class")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise DomainError("classifier parameters must be finite")

    @property
    def classes(self) -> int:
        return int(self.weights.shape[0])

    def logits(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        flat = x.reshape(-1, self.weights.shape[1])
        z = flat @ self.weights.T + self.bias
        return z[0] if x.shape == self.image_shape else z

    def predict(self, x: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum, i.e. the lowest class index on ties
        return np.argmax(np.atleast_2d(self.logits(x)), axis=1)

    def save(self, path) -> None:
        np.savez(
            path,
            weights=self.weights,
            bias=self.bias,
            image_shape=np.array(self.image_shape),
            loss_history=np.array(self.loss_history),
        )

    @classmethod
    def load(cls, path) -> "LinearSoftmaxClassifier":
        try:
            with np.load(Path(path)) as z:
                return cls(z["weights"], z["bias"], tuple(z["image_shape"]), list(z["loss_history"]))
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read model: {exc}", path=str(path)) from None


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def loss_gradient(model: LinearSoftmaxClassifier, x, y):
    """Cross-entropy ``J`` and its gradient with respect to the input.

    For a single image returns ``(J, grad)``; for a batch returns per-image
    losses and gradients. The gradient is ``W^T (softmax - onehot(y))``.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == model.image_shape
    flat = x.reshape(-1, model.weights.shape[1])
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    z = flat @ model.weights.T + model.bias
    rows = np.arange(flat.shape[0])
    loss = -_log_softmax(z)[rows, y]
    p = _softmax(z)
    p[rows, y] -= 1.0
    grad = (p @ model.weights).reshape(x.shape)
    return (float(loss[0]), grad) if single else (loss, grad)


def train_classifier(
    data: LabeledDataset,
    epochs: int = 50,
    lr: float = 0.05,
    seed: int = 0,
    batch_size: int = 32,
    init_scale: float = 0.15,
    classes: int | None = None,
) -> LinearSoftmaxClassifier:
    """Mini-batch gradient descent on mean cross-entropy.

    Weights start at ``init_scale * N(0, 1)`` and the bias at zero. A nonzero
    start leaves a high-rank component in the weights that training does not
    remove; it models the off-manifold sensitivity a deep network has and
    that a linear model fit from zero would lack. ``loss_history`` holds the
    mean training loss before training and after every epoch.
    """
    present = np.unique(data.labels)
    if present.size < 2:
        raise DomainError("training needs at least two classes present")
    if epochs < 1 or batch_size < 1:
        raise DomainError("epochs and batch_size must be >= 1")
    c = int(classes if classes is not None else data.labels.max() + 1)
    n = len(data)
    d = int(np.prod(data.image_shape))
    rng = np.random.default_rng(seed)
    w = init_scale * rng.standard_normal((c, d))
    b = np.zeros(c)
    flat = data.images.reshape(n, d)
    y = data.labels

    def mean_loss():
        return float(np.mean(-_log_softmax(flat @ w.T + b)[np.arange(n), y]))

    history = [mean_loss()]
    for _ in range(epochs):
        perm = rng.permutation(n)
        for s in range(0, n, batch_size):
            idx = perm[s:s + batch_size]
            p = _softmax(flat[idx] @ w.T + b)
            p[np.arange(idx.size), y[idx]] -= 1.0
            w -= lr * (p.T @ flat[idx]) / idx.size
            b -= lr * p.mean(axis=0)
        history.append(mean_loss())
    if not np.all(np.isfinite(w)):
        raise DomainError("training diverged; lower the learning rate")
    return LinearSoftmaxClassifier(w, b, data.image_shape, history)


def accuracy(model: LinearSoftmaxClassifier, data: LabeledDataset | tuple) -> float:
    if isinstance(data, LabeledDataset):
        images, labels = data.images, data.labels
    else:
        images, labels = data
    labels = np.atleast_1d(np.asarray(labels))
    if labels.size == 0:
        raise DomainError("accuracy of an empty dataset is undefined")
    return float(np.mean(model.predict(images) == labels))


@dataclass(frozen=True)
class AttackConfig:
    """Attack budget and step sizes; ``epsilon`` is in [0, 1] pixel units."""

    epsilon: float
    alpha: float | None = None
    tau: float | None = None
    iters: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        for name in ("alpha", "tau"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be > 0, got {v}")
        if self.iters < 1:
            raise DomainError(f"iters must be >= 1, got {self.iters}")

    @property
    def step_alpha(self) -> float:
        return self.alpha if self.alpha is not None else self.epsilon / 4

    @property
    def step_tau(self) -> float:
        return self.tau if self.tau is not None else self.epsilon / 4


def project(x, z, epsilon: float) -> np.ndarray:
    """Clamp ``z`` to the l-infinity ball of radius ``epsilon`` around ``x``, then to [0, 1]."""
    return np.clip(np.clip(z, x - epsilon, x + epsilon), 0.0, 1.0)


def fgsm(model, x, y, epsilon: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _, g = loss_gradient(model, x, y)
    return np.clip(x + epsilon * np.sign(g), 0.0, 1.0)


def ifgsm(model, x, y, epsilon: float, alpha: float, iters: int, trace: list | None = None) -> np.ndarray:
    """Iterated FGSM with a projection back onto the epsilon ball after each step.

    When ``trace`` is a list, the loss at every iterate (starting with the
    clean input) is appended to it.
    """
    x = np.asarray(x, dtype=np.float64)
    cur = x
    for _ in range(iters):
        j, g = loss_gradient(model, cur, y)
        if trace is not None:
            trace.append(j)
        cur = project(x, np.clip(cur + alpha * np.sign(g), 0.0, 1.0), epsilon)
    if trace is not None:
        trace.append(loss_gradient(model, cur, y)[0])
    return cur


def pgd(model, x, y, epsilon: float, tau: float, iters: int, seed: int = 0) -> np.ndarray:
    """Projected gradient descent from a uniform random start in the epsilon ball."""
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    cur = project(x, x + rng.uniform(-epsilon, epsilon, size=x.shape), epsilon)
    for _ in range(iters):
        _, g = loss_gradient(model, cur, y)
        cur = project(x, cur + tau * np.sign(g), epsilon)
    return cur


ATTACKS = ("fgsm", "ifgsm", "pgd")


def run_attack(name: str, model, x, y, cfg: AttackConfig) -> np.ndarray:
    if name == "fgsm":
        return fgsm(model, x, y, cfg.epsilon)
    if name == "ifgsm":
        return ifgsm(model, x, y, cfg.epsilon, cfg.step_alpha, cfg.iters)
    if name == "pgd":
        return pgd(model, x, y, cfg.epsilon, cfg.step_tau, cfg.iters, cfg.seed)
    raise DomainError(f"unknown attack {name!r}; valid: {', '.join(ATTACKS)}")
