"""Progressively grown classification network.

The model starts as a ridge-regression map from normalized features to the
two-dimensional one-hot target. Layers are then added one at a time: each
new layer passes the previous prediction t through ReLU twice, as
``[relu(t); relu(-t)]``, alongside ReLU features of a random projection of
the previous hidden signal, and refits only the new output matrix under a
Frobenius-norm ball constraint.

Because ``[I -I] @ [relu(t); relu(-t)] = t`` exactly, the candidate output
matrix ``[I, -I, 0 ... 0]`` always reproduces the previous layer's
predictions and is always feasible. Whichever of the solver result and this
reproduction candidate has lower training cost is kept, so the recorded
training-cost sequence can never increase. Width and depth stop growing
when validation score improvements fall below configured thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import (
    LabeledSet,
    Normalizer,
    apply_normalizer,
    balance_by_duplication,
    fit_normalizer,
    split_stratified,
)
from .errors import TrainingError
from .framing import Label
from .metrics import confusion_from_masks, fm_index
from .numerics import (
    AdmmConfig,
    admm_constrained_ls_from_gram,
    regularized_least_squares,
    relu,
    seeded_random_matrix,
)
from .seeding import derive_seed

Q = 2  # output dimension (one-hot binary targets)


@dataclass(frozen=True)
class PlnConfig:
    """Training knobs; the two solver weights default to (0.1, 1e4).

    ``mu`` is the constrained-solver penalty. When ``admm`` is None, an
    AdmmConfig is built from ``mu`` with default iteration/tolerance
    settings; an explicit ``admm`` is used verbatim (its own mu wins).
    """

    lam: float = 0.1
    mu: float = 1e4
    alpha: float = 2.0
    delta_nodes: int = 50
    n_max: int = 1000
    l_max: int = 10
    eta_node: float = 1e-3
    eta_layer: float = 1e-3
    val_fraction: float = 0.2
    admm: AdmmConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.alpha < 1.0:
            raise ValueError("alpha must be >= 1 so the reproduction candidate stays feasible")
        if self.delta_nodes < 1:
            raise ValueError("delta_nodes must be >= 1")
        if self.n_max < 2 * Q + self.delta_nodes:
            raise ValueError(f"n_max must be >= {2 * Q} + delta_nodes")
        if self.l_max < 0:
            raise ValueError("l_max must be >= 0")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")

    @property
    def effective_admm(self) -> AdmmConfig:
        return self.admm if self.admm is not None else AdmmConfig(mu=self.mu)

    @property
    def ball_radius(self) -> float:
        return self.alpha * math.sqrt(2 * Q)


@dataclass(frozen=True)
class PlnLayer:
    R: np.ndarray  # random block, (n_i - 2Q) x m_{i-1}
    O: np.ndarray  # learned output matrix, Q x n_i

    @property
    def width(self) -> int:
        return self.O.shape[1]


@dataclass
class PlnModel:
    normalizer: Normalizer
    base_map: np.ndarray  # Q x D ridge map
    layers: list[PlnLayer]
    config: PlnConfig
    costs: list[float] = field(default_factory=list)  # training cost per depth
    val_scores: list[float] = field(default_factory=list)  # validation score per depth

    @property
    def depth(self) -> int:
        return len(self.layers)


def labels_from_scores(scores: np.ndarray) -> list[Label]:
    """Column-wise decision with ties going to the event class."""
    positive = scores[0] >= scores[1]
    return [Label.EVENT if p else Label.NON_EVENT for p in positive]


def _training_cost(T: np.ndarray, predictions: np.ndarray) -> float:
    return float(np.linalg.norm(T - predictions) ** 2)


def _hidden_chain(model: PlnModel, X_normalized: np.ndarray):
    """Run the layer chain on pre-normalized columns.

    Returns (U, T_hat): the hidden signal feeding the next layer (the input
    itself when no layers exist) and the current predictions.
    """
    U = X_normalized
    t_hat = model.base_map @ U
    for layer in model.layers:
        U = np.vstack([relu(t_hat), relu(-t_hat), relu(layer.R @ U)])
        t_hat = layer.O @ U
    return U, t_hat


def pln_predict(model: PlnModel, X: np.ndarray) -> tuple[np.ndarray, list[Label]]:
    """Normalize raw feature columns, run the chain, and decode labels."""
    Xn = apply_normalizer(model.normalizer, X)
    _, t_hat = _hidden_chain(model, Xn)
    return t_hat, labels_from_scores(t_hat)


def _validation_fm(t_hat: np.ndarray, T_truth: np.ndarray) -> float:
    counts = confusion_from_masks(T_truth[0] == 1.0, t_hat[0] >= t_hat[1])
    return fm_index(counts)


def init_base_layer(train: LabeledSet, cfg: PlnConfig) -> tuple[PlnModel, float]:
    """Fit the zero-layer ridge model on ``train`` and report its cost.

    The normalizer is fitted here, on exactly the columns being trained on,
    and stays with the model for its lifetime.
    """
    norm = fit_normalizer(train)
    Xn = apply_normalizer(norm, train.X)
    base = regularized_least_squares(train.T, Xn, cfg.lam)
    cost0 = _training_cost(train.T, base @ Xn)
    model = PlnModel(norm, base, [], cfg, costs=[cost0])
    return model, cost0


def _reproduction_candidate(width: int) -> np.ndarray:
    O = np.zeros((Q, width))
    O[:, :Q] = np.eye(Q)
    O[:, Q : 2 * Q] = -np.eye(Q)
    return O


def _apply_output(O: np.ndarray, parts: list[np.ndarray]) -> np.ndarray:
    """O @ vstack(parts) without materializing the stacked matrix."""
    out = None
    offset = 0
    for p in parts:
        contrib = O[:, offset : offset + p.shape[0]] @ p
        out = contrib if out is None else out + contrib
        offset += p.shape[0]
    return out


def grow_layer(
    model: PlnModel, train: LabeledSet, val: LabeledSet, cfg: PlnConfig
) -> tuple[PlnModel, bool, float]:
    """Add one candidate layer, widening its random block while validation
    improves, and report whether the layer earned its keep.

    ``train`` and ``val`` must already be normalized with
    ``model.normalizer``. The returned model always carries the new layer;
    ``accepted`` tells the caller whether validation improved by more than
    ``eta_layer`` over the pre-growth model.

    The hidden-signal Gram matrix is grown blockwise across width steps, so
    widening costs one border update rather than a full recompute.
    """
    U_train, that_train = _hidden_chain(model, train.X)
    U_val, that_val = _hidden_chain(model, val.X)
    prev_val_fm = _validation_fm(that_val, val.T)
    prev_cost = model.costs[-1]
    eps = cfg.ball_radius
    targets = train.T
    t_sq = float((targets * targets).sum())

    carried_train = np.vstack([relu(that_train), relu(-that_train)])
    carried_val = np.vstack([relu(that_val), relu(-that_val)])

    layer_seed = derive_seed(cfg.seed, "layer", model.depth + 1)
    R_full = seeded_random_matrix(cfg.n_max - 2 * Q, U_train.shape[0], layer_seed)

    G = np.empty((cfg.n_max, cfg.n_max))
    B = np.empty((Q, cfg.n_max))
    G[: 2 * Q, : 2 * Q] = carried_train @ carried_train.T
    B[:, : 2 * Q] = targets @ carried_train.T
    train_parts = [carried_train]
    val_parts = [carried_val]

    best: tuple[float, int, np.ndarray, float] | None = None  # (fm, n_rand, O, cost)
    filled = 2 * Q

    for n_rand in range(cfg.delta_nodes, cfg.n_max - 2 * Q + 1, cfg.delta_nodes):
        lo = n_rand - cfg.delta_nodes
        new_train = relu(R_full[lo:n_rand] @ U_train)
        new_val = relu(R_full[lo:n_rand] @ U_val)
        n_tot = 2 * Q + n_rand
        cross = np.vstack([p @ new_train.T for p in train_parts])
        G[:filled, filled:n_tot] = cross
        G[filled:n_tot, :filled] = cross.T
        G[filled:n_tot, filled:n_tot] = new_train @ new_train.T
        B[:, filled:n_tot] = targets @ new_train.T
        train_parts.append(new_train)
        val_parts.append(new_val)
        filled = n_tot

        O_fit = admm_constrained_ls_from_gram(
            G[:n_tot, :n_tot], B[:, :n_tot], t_sq, eps, cfg.effective_admm
        )
        cost_fit = _training_cost(targets, _apply_output(O_fit, train_parts))
        if cost_fit <= prev_cost:
            O, cost = O_fit, cost_fit
        else:
            # reproduction safeguard: carry the previous prediction losslessly
            O, cost = _reproduction_candidate(n_tot), prev_cost

        val_fm = _validation_fm(_apply_output(O, val_parts), val.T)
        if best is None:
            best = (val_fm, n_rand, O, cost)
        elif val_fm > best[0] + cfg.eta_node:
            best = (val_fm, n_rand, O, cost)
        else:
            break

    assert best is not None
    val_fm, n_rand, O, cost = best
    layer = PlnLayer(R=R_full[:n_rand], O=O)
    grown = PlnModel(
        model.normalizer,
        model.base_map,
        model.layers + [layer],
        model.config,
        costs=model.costs + [cost],
        val_scores=model.val_scores + [val_fm],
    )
    accepted = val_fm > prev_val_fm + cfg.eta_layer
    return grown, accepted, val_fm


def train_pln(train: LabeledSet, cfg: PlnConfig | None = None) -> PlnModel:
    """Full training loop: stratified fit/validation split, duplication
    balancing of the fit part, base ridge fit, then layer growth until a
    layer is rejected or ``l_max`` is reached.

    Accepted layers strictly improve validation score, so the returned
    model is the best-validation model seen.
    """
    cfg = cfg or PlnConfig()
    n_event, n_non = train.class_counts()
    if n_event == 0 or n_non == 0:
        raise TrainingError("training set must contain both classes")

    fit_part, val_part = split_stratified(train, cfg.val_fraction, cfg.seed)
    balanced = balance_by_duplication(fit_part, derive_seed(cfg.seed, "fit-balance"))

    model, _ = init_base_layer(balanced, cfg)
    fit_n = replace(balanced, X=apply_normalizer(model.normalizer, balanced.X))
    val_n = replace(val_part, X=apply_normalizer(model.normalizer, val_part.X))

    _, that_val = _hidden_chain(model, val_n.X)
    model.val_scores = [_validation_fm(that_val, val_n.T)]

    for _ in range(cfg.l_max):
        grown, accepted, _ = grow_layer(model, fit_n, val_n, cfg)
        if not accepted:
            break
        model = grown
    return model
