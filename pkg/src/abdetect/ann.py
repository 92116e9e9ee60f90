"""Single-hidden-layer feed-forward baseline: sigmoid hidden units, softmax
output, mean cross-entropy loss, trained by plain mini-batch gradient
descent. Deliberately free of momentum or adaptive steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, xlogy

from .dataset import LabeledSet, Normalizer, apply_normalizer, fit_normalizer
from .errors import TrainingError
from .framing import Label
from .pln import labels_from_scores
from .seeding import rng_from

DEFAULT_HIDDEN = 400


@dataclass(frozen=True)
class AnnTrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 128
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs < 0:
            raise ValueError("learning_rate and batch_size must be positive, epochs >= 0")


@dataclass
class AnnModel:
    normalizer: Normalizer
    W1: np.ndarray  # H x D
    b1: np.ndarray  # H
    W2: np.ndarray  # Q x H
    b2: np.ndarray  # Q
    config: AnnTrainConfig = field(default_factory=AnnTrainConfig)
    loss_trace: list[float] = field(default_factory=list)  # mean loss per epoch

    @property
    def hidden_width(self) -> int:
        return self.W1.shape[0]


@dataclass(frozen=True)
class AnnGradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray


def _softmax_columns(S: np.ndarray) -> np.ndarray:
    shifted = S - S.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def ann_init(dim: int, hidden: int, out: int, seed: int) -> AnnModel:
    """Fan-scaled symmetric uniform weights (bound sqrt(6/(fan_in+fan_out))),
    zero biases, identity normalizer until training fits one."""
    if min(dim, hidden, out) < 1:
        raise ValueError("all dimensions must be positive")
    rng = rng_from(seed, "ann-init")
    lim1 = np.sqrt(6.0 / (dim + hidden))
    lim2 = np.sqrt(6.0 / (hidden + out))
    return AnnModel(
        normalizer=Normalizer(np.zeros(dim), np.ones(dim)),
        W1=rng.uniform(-lim1, lim1, size=(hidden, dim)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-lim2, lim2, size=(out, hidden)),
        b2=np.zeros(out),
    )


def _forward_normalized(model: AnnModel, Xn: np.ndarray):
    hidden = expit(model.W1 @ Xn + model.b1[:, None])
    probs = _softmax_columns(model.W2 @ hidden + model.b2[:, None])
    return hidden, probs


def ann_forward(model: AnnModel, X: np.ndarray) -> tuple[np.ndarray, list[Label]]:
    """Class probabilities per column and labels (ties to the event class)."""
    Xn = apply_normalizer(model.normalizer, X)
    _, probs = _forward_normalized(model, Xn)
    return probs, labels_from_scores(probs)


def _loss_from_probs(probs: np.ndarray, T: np.ndarray) -> float:
    # xlogy keeps 0 * log(0) = 0; a zero probability on a class with
    # positive target weight still yields an infinite loss, which the
    # training loop reports as divergence.
    return float(-xlogy(T, probs).sum() / T.shape[1])


def ann_loss(model: AnnModel, X: np.ndarray, T: np.ndarray) -> float:
    """Mean column-wise cross-entropy of the model on (X, T)."""
    probs, _ = ann_forward(model, X)
    return _loss_from_probs(probs, T)


def _gradients_normalized(model: AnnModel, Xn: np.ndarray, T: np.ndarray) -> AnnGradients:
    m = Xn.shape[1]
    hidden, probs = _forward_normalized(model, Xn)
    d_out = (probs - T) / m  # exact gradient of mean CE through softmax
    g_W2 = d_out @ hidden.T
    g_b2 = d_out.sum(axis=1)
    d_hidden = (model.W2.T @ d_out) * hidden * (1.0 - hidden)
    g_W1 = d_hidden @ Xn.T
    g_b1 = d_hidden.sum(axis=1)
    return AnnGradients(g_W1, g_b1, g_W2, g_b2)


def ann_gradient(model: AnnModel, X: np.ndarray, T: np.ndarray) -> AnnGradients:
    """Analytic gradients of the mean cross-entropy loss at the model's
    current weights."""
    if X.shape[1] != T.shape[1]:
        raise ValueError("X and T must have the same number of columns")
    Xn = apply_normalizer(model.normalizer, X)
    return _gradients_normalized(model, Xn, T)


def ann_train(
    train: LabeledSet, cfg: AnnTrainConfig | None = None, hidden: int = DEFAULT_HIDDEN
) -> AnnModel:
    """Mini-batch gradient descent over seed-shuffled columns.

    The caller supplies training data already balanced by duplication (the
    evaluation harness does this); this function only shuffles, batches and
    descends for the configured number of epochs. ``epochs=0`` returns the
    initialized model with a fitted normalizer and untouched weights.
    """
    cfg = cfg or AnnTrainConfig()
    n_event, n_non = train.class_counts()
    if n_event == 0 or n_non == 0:
        raise TrainingError("training set must contain both classes")

    model = ann_init(train.dim, hidden, train.T.shape[0], cfg.seed)
    model.config = cfg
    model.normalizer = fit_normalizer(train)
    Xn = apply_normalizer(model.normalizer, train.X)
    T = train.T
    n = train.n

    shuffle_rng = rng_from(cfg.seed, "ann-epochs")
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            Xb, Tb = Xn[:, batch], T[:, batch]
            hidden_act, probs = _forward_normalized(model, Xb)
            batch_loss = _loss_from_probs(probs, Tb)
            if not np.isfinite(batch_loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}; lower the learning rate"
                )
            epoch_loss += batch_loss * len(batch)
            d_out = (probs - Tb) / len(batch)
            g_W2 = d_out @ hidden_act.T
            g_b2 = d_out.sum(axis=1)
            d_hidden = (model.W2.T @ d_out) * hidden_act * (1.0 - hidden_act)
            model.W1 -= cfg.learning_rate * (d_hidden @ Xb.T)
            model.b1 -= cfg.learning_rate * d_hidden.sum(axis=1)
            model.W2 -= cfg.learning_rate * g_W2
            model.b2 -= cfg.learning_rate * g_b2
        model.loss_trace.append(epoch_loss / n)
    return model
