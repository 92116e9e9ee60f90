"""Soft-margin binary SVM with a Gaussian kernel, trained by sequential
minimal optimization on the dual.

Event frames carry label +1, non-event frames -1. Because duplicated
balanced training sets can reach millions of columns, training first takes
a seeded stratified subsample (``max_train_points``); duplicate minority
columns collapse under subsampling without information loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledSet, Normalizer, apply_normalizer, fit_normalizer
from .errors import TrainingError
from .framing import Label
from .seeding import rng_from


@dataclass(frozen=True)
class SvmTrainConfig:
    C: float = 1.0
    gamma: float | None = None  # None resolves to 1/D at training time
    kkt_tol: float = 1e-3
    max_passes: int = 10
    max_train_points: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.kkt_tol <= 0 or self.max_passes < 1 or self.max_train_points < 2:
            raise ValueError("invalid stopping settings")


@dataclass
class SvmTrainingTrace:
    """Optimizer audit trail kept on the model but never serialized."""

    dual_objectives: list[float]
    alphas: np.ndarray  # all multipliers, including zeros
    labels_pm: np.ndarray  # +/-1 per training point
    scores: np.ndarray  # decision values on the training points
    kkt_violations: np.ndarray  # per-point violation magnitudes
    subsample: np.ndarray | None  # indices into the caller's set, None if unsampled


@dataclass
class SvmModel:
    normalizer: Normalizer
    support_vectors: np.ndarray  # D x S
    coeffs: np.ndarray  # alpha_i * y_i, length S
    bias: float
    gamma: float
    config: SvmTrainConfig = field(default_factory=SvmTrainConfig)
    trace: SvmTrainingTrace | None = None


def kernel_gaussian(a: np.ndarray, b: np.ndarray, gamma: float) -> float:
    """exp(-gamma ||a - b||^2) for two vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("kernel arguments must have equal dimension")
    diff = a - b
    return float(np.exp(-gamma * (diff @ diff)))


def kernel_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Gaussian kernel between the columns of A (D x n) and B (D x m)."""
    sq_a = (A * A).sum(axis=0)[:, None]
    sq_b = (B * B).sum(axis=0)[None, :]
    d2 = np.maximum(sq_a + sq_b - 2.0 * (A.T @ B), 0.0)
    return np.exp(-gamma * d2)


def kkt_violation_amounts(
    scores: np.ndarray, y: np.ndarray, alpha: np.ndarray, C: float
) -> np.ndarray:
    """Per-point magnitude of the dual optimality violation.

    alpha = 0 requires margin >= 1, 0 < alpha < C requires margin = 1,
    alpha = C requires margin <= 1; the returned amount is how far each
    point's margin y*f(x) strays from its requirement.
    """
    margin = y * scores
    at_zero = alpha == 0.0
    at_box = alpha == C
    interior = ~(at_zero | at_box)
    v = np.zeros_like(margin)
    v[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
    v[interior] = np.abs(margin[interior] - 1.0)
    v[at_box] = np.maximum(0.0, margin[at_box] - 1.0)
    return v


class _SmoState:
    """Platt-style SMO working state over a precomputed kernel matrix.

    Keeps the error cache E_i = f(x_i) - y_i up to date across pair updates
    and records the dual objective after every successful step. Partner
    selection uses the max-|E_i - E_j| heuristic over non-bound points, then
    seeded-random rotations, so runs are deterministic per seed.
    """

    _STEP_EPS = 1e-3  # Platt's relative minimum step
    _SNAP = 1e-8  # multipliers this close to the box edge snap onto it

    def __init__(self, K, y, C, tol, rng):
        self.K = K
        self.y = y
        self.C = C
        self.tol = tol
        self.rng = rng
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.errors = -y.astype(float)  # f = 0 initially
        self.dual_objectives = [0.0]

    def decision_values(self) -> np.ndarray:
        return self.errors + self.y

    def _take_step(self, i: int, j: int) -> bool:
        if i == j:
            return False
        K, y, C = self.K, self.y, self.C
        a_i, a_j = self.alpha[i], self.alpha[j]
        E_i, E_j = self.errors[i], self.errors[j]
        if y[i] != y[j]:
            L, H = max(0.0, a_j - a_i), min(C, C + a_j - a_i)
        else:
            L, H = max(0.0, a_i + a_j - C), min(C, a_i + a_j)
        if L == H:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0.0:  # only exact duplicates under a Gaussian kernel
            return False
        a_j_new = min(max(a_j - y[j] * (E_i - E_j) / eta, L), H)
        if abs(a_j_new - a_j) < self._STEP_EPS * (a_j_new + a_j + self._STEP_EPS):
            return False
        a_i_new = a_i + y[i] * y[j] * (a_j - a_j_new)
        snap = self._SNAP * max(1.0, C)
        a_i_new = 0.0 if a_i_new < snap else (C if a_i_new > C - snap else a_i_new)
        a_j_new = 0.0 if a_j_new < snap else (C if a_j_new > C - snap else a_j_new)

        d_i, d_j = a_i_new - a_i, a_j_new - a_j
        # dual objective change, from cached pre-update decision values
        q_i = y[i] * (E_i + y[i] - self.b)
        q_j = y[j] * (E_j + y[j] - self.b)
        d_dual = (
            d_i
            + d_j
            - d_i * q_i
            - d_j * q_j
            - 0.5 * (d_i * d_i * K[i, i] + d_j * d_j * K[j, j])
            - d_i * d_j * y[i] * y[j] * K[i, j]
        )

        b1 = self.b - E_i - y[i] * d_i * K[i, i] - y[j] * d_j * K[i, j]
        b2 = self.b - E_j - y[i] * d_i * K[i, j] - y[j] * d_j * K[j, j]
        if 0.0 < a_i_new < C:
            b_new = b1
        elif 0.0 < a_j_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        self.alpha[i], self.alpha[j] = a_i_new, a_j_new
        self.errors += y[i] * d_i * K[i] + y[j] * d_j * K[j] + (b_new - self.b)
        self.b = b_new
        self.dual_objectives.append(self.dual_objectives[-1] + d_dual)
        return True

    def _examine(self, i: int) -> bool:
        r = self.y[i] * self.errors[i]
        actionable = (r < -self.tol and self.alpha[i] < self.C) or (
            r > self.tol and self.alpha[i] > 0.0
        )
        if not actionable:
            return False
        non_bound = np.flatnonzero((self.alpha > 0.0) & (self.alpha < self.C))
        if len(non_bound) > 1:
            j = int(non_bound[np.argmax(np.abs(self.errors[i] - self.errors[non_bound]))])
            if self._take_step(i, j):
                return True
        if len(non_bound):
            start = int(self.rng.integers(len(non_bound)))
            for k in range(len(non_bound)):
                if self._take_step(i, int(non_bound[(start + k) % len(non_bound)])):
                    return True
        start = int(self.rng.integers(self.n))
        for k in range(self.n):
            if self._take_step(i, (start + k) % self.n):
                return True
        return False

    def run(self, max_passes: int) -> None:
        """Alternate full sweeps and non-bound sweeps until a full sweep
        finds nothing actionable or ``max_passes`` sweeps pass untouched."""
        examine_all = True
        quiet = 0
        for _ in range(100_000):
            if examine_all:
                candidates = range(self.n)
            else:
                candidates = np.flatnonzero((self.alpha > 0.0) & (self.alpha < self.C))
            changed = sum(self._examine(int(i)) for i in candidates)
            if examine_all and changed == 0:
                break
            quiet = quiet + 1 if changed == 0 else 0
            if quiet >= max_passes:
                break
            examine_all = changed == 0 if not examine_all else False
        # tidy the error cache against accumulated drift
        self.errors = (self.alpha * self.y) @ self.K + self.b - self.y

    def recentered_bias(self) -> float:
        """Move b to the center of its KKT-feasible band (alphas untouched).

        With interior support vectors this is their implied-bias average;
        otherwise the midpoint between the tightest bound constraints.
        """
        kernel_part = self.decision_values() - self.b
        bound_value = self.y - kernel_part
        interior = (self.alpha > 0.0) & (self.alpha < self.C)
        if interior.any():
            b_new = float(bound_value[interior].mean())
        else:
            pos, zero = self.y > 0, self.alpha == 0.0
            lower = (pos & zero) | (~pos & ~zero)
            upper = ~lower
            b_lo = bound_value[lower].max() if lower.any() else -np.inf
            b_hi = bound_value[upper].min() if upper.any() else np.inf
            if not np.isfinite(b_lo):
                b_new = float(b_hi)
            elif not np.isfinite(b_hi):
                b_new = float(b_lo)
            else:
                b_new = float(0.5 * (b_lo + b_hi))
        self.errors += b_new - self.b
        self.b = b_new
        return b_new


def _stratified_subsample(train: LabeledSet, limit: int, seed: int) -> np.ndarray:
    rng = rng_from(seed, "svm-subsample")
    pos = np.flatnonzero(train.T[0] == 1.0)
    neg = np.flatnonzero(train.T[0] == 0.0)
    n_pos = max(1, int(round(limit * len(pos) / train.n)))
    n_pos = min(n_pos, len(pos), limit - 1)
    n_neg = min(limit - n_pos, len(neg))
    keep = np.concatenate(
        [pos[rng.permutation(len(pos))[:n_pos]], neg[rng.permutation(len(neg))[:n_neg]]]
    )
    return np.sort(keep)


def svm_train(train: LabeledSet, cfg: SvmTrainConfig | None = None) -> SvmModel:
    """SMO on the dual until no examined pair violates the KKT conditions
    beyond ``kkt_tol`` for ``max_passes`` consecutive sweeps.

    The dual objective is recorded after every successful pair update and is
    non-decreasing by construction (each update solves its two-variable
    subproblem exactly). Raises TrainingError if optimization stalls with
    violations remaining.
    """
    cfg = cfg or SvmTrainConfig()
    n_event, n_non = train.class_counts()
    if n_event == 0 or n_non == 0:
        raise TrainingError("training set must contain both classes")

    subsample = None
    working = train
    if train.n > cfg.max_train_points:
        subsample = _stratified_subsample(train, cfg.max_train_points, cfg.seed)
        working = train.subset(subsample)

    normalizer = fit_normalizer(working)
    Xn = apply_normalizer(normalizer, working.X)
    y = np.where(working.T[0] == 1.0, 1.0, -1.0)
    n = working.n
    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / working.dim
    C = cfg.C

    K = kernel_matrix(Xn, Xn, gamma)
    opt = _SmoState(K, y, C, cfg.kkt_tol, rng_from(cfg.seed, "svm-pairs"))
    opt.run(cfg.max_passes)
    alpha, b, f = opt.alpha, opt.recentered_bias(), opt.decision_values()
    dual_objectives = opt.dual_objectives

    violations = kkt_violation_amounts(f, y, alpha, C)
    trace = SvmTrainingTrace(
        dual_objectives=dual_objectives,
        alphas=alpha.copy(),
        labels_pm=y,
        scores=f.copy(),
        kkt_violations=violations,
        subsample=subsample,
    )
    # Platt's minimum-step rule can strand points a hair over the examine
    # tolerance; a real stall shows violations an order of magnitude out.
    stall_bound = 10.0 * cfg.kkt_tol
    n_viol = int(np.count_nonzero(violations > stall_bound))
    if n_viol > 0:
        raise TrainingError(
            f"SMO stalled after {cfg.max_passes} sweeps without progress; "
            f"{n_viol} KKT violations above {stall_bound:g} remain"
        )

    sv = alpha > 0.0
    model = SvmModel(
        normalizer=normalizer,
        support_vectors=Xn[:, sv].copy(),
        coeffs=(alpha * y)[sv],
        bias=b,
        gamma=gamma,
        config=cfg,
        trace=trace,
    )
    return model


def svm_predict(model: SvmModel, X: np.ndarray) -> tuple[np.ndarray, list[Label]]:
    """Decision values and labels; score >= 0 decides the event class."""
    Xn = apply_normalizer(model.normalizer, X)
    if model.support_vectors.size:
        scores = model.coeffs @ kernel_matrix(model.support_vectors, Xn, model.gamma)
        scores = scores + model.bias
    else:
        scores = np.full(Xn.shape[1], model.bias)
    labels = [Label.EVENT if s >= 0.0 else Label.NON_EVENT for s in scores]
    return scores, labels
