"""Labeled train/test matrices: target encoding, duplication balancing,
z-score normalization, stratified splits, and leave-one-out partitions.

Feature vectors are stored column-wise: ``X`` is D x N, targets ``T`` are
2 x N with column [1, 0] for an event frame and [0, 1] otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TrainingError
from .framing import Label, LabeledFrame
from .records import PatientRecord
from .seeding import rng_from

TARGET_DIM = 2  # two classes, one-hot columns


@dataclass(frozen=True)
class LabeledSet:
    """Column-aligned features, targets, and (patient_id, start_index) provenance."""

    X: np.ndarray
    T: np.ndarray
    ids: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if self.X.ndim != 2 or self.T.ndim != 2:
            raise ValueError("X and T must be matrices")
        if self.T.shape[0] != TARGET_DIM:
            raise ValueError(f"T must have {TARGET_DIM} rows")
        if not (self.X.shape[1] == self.T.shape[1] == len(self.ids)):
            raise ValueError("X, T and ids must have identical column counts")
        if self.T.size and not (
            np.isin(self.T, (0.0, 1.0)).all() and (self.T.sum(axis=0) == 1.0).all()
        ):
            raise ValueError("every target column must be one-hot")

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def dim(self) -> int:
        return self.X.shape[0]

    @property
    def labels(self) -> list[Label]:
        return decode_targets(self.T)

    def class_counts(self) -> tuple[int, int]:
        """(event count, non-event count)."""
        n_event = int(self.T[0].sum())
        return n_event, self.n - n_event

    def subset(self, indices: np.ndarray | Sequence[int]) -> "LabeledSet":
        idx = np.asarray(indices, dtype=int)
        return LabeledSet(self.X[:, idx], self.T[:, idx], tuple(self.ids[i] for i in idx))


def encode_targets(labels: Sequence[Label]) -> np.ndarray:
    """One-hot 2 x N target matrix: EVENT -> [1,0], NON_EVENT -> [0,1]."""
    n = len(labels)
    T = np.zeros((TARGET_DIM, n))
    for i, lab in enumerate(labels):
        T[0 if lab is Label.EVENT else 1, i] = 1.0
    return T


def decode_targets(T: np.ndarray) -> list[Label]:
    return [Label.EVENT if T[0, i] == 1.0 else Label.NON_EVENT for i in range(T.shape[1])]


def assemble(frames: Sequence[LabeledFrame]) -> LabeledSet:
    """Stack frames into a LabeledSet (column order = frame order)."""
    if not frames:
        dim = 0
        return LabeledSet(np.zeros((dim, 0)), np.zeros((TARGET_DIM, 0)), ())
    X = np.stack([f.features for f in frames], axis=1).astype(np.float64)
    T = encode_targets([f.label for f in frames])
    ids = tuple((f.patient_id, f.start_index) for f in frames)
    return LabeledSet(X, T, ids)


def concat(sets: Sequence[LabeledSet]) -> LabeledSet:
    sets = [s for s in sets if s.n > 0]
    if not sets:
        raise ValueError("nothing to concatenate")
    X = np.hstack([s.X for s in sets])
    T = np.hstack([s.T for s in sets])
    ids = tuple(i for s in sets for i in s.ids)
    return LabeledSet(X, T, ids)


def balance_by_duplication(dataset: LabeledSet, seed: int, ratio: float = 1.0) -> LabeledSet:
    """Duplicate minority-class columns until the classes reach ``ratio`` parity.

    Duplicates cycle deterministically through a seed-shuffled order of the
    original minority columns, so each is repeated an equal number of times
    up to remainder. Majority columns are untouched; the output column order
    is a seed-determined permutation. ``ratio`` scales the target minority
    count relative to the majority (1.0 = exact parity).
    """
    n_event, n_non = dataset.class_counts()
    if n_event == 0 or n_non == 0:
        raise ValueError("balance_by_duplication requires both classes present")
    rng = rng_from(seed, "balance")

    event_idx = np.flatnonzero(dataset.T[0] == 1.0)
    non_idx = np.flatnonzero(dataset.T[0] == 0.0)
    minority, majority = (event_idx, non_idx) if n_event <= n_non else (non_idx, event_idx)

    target = int(round(ratio * len(majority)))
    deficit = max(0, target - len(minority))
    order = rng.permutation(minority)
    extras = order[np.arange(deficit) % len(order)] if deficit else np.array([], dtype=int)

    all_idx = np.concatenate([event_idx, non_idx, extras]).astype(int)
    all_idx = all_idx[rng.permutation(len(all_idx))]
    return dataset.subset(all_idx)


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension z-score parameters fitted on training columns."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if (self.scale <= 0).any():
            raise ValueError("scale must be strictly positive")


STD_FLOOR = 1e-12


def fit_normalizer(dataset: LabeledSet) -> Normalizer:
    """Column-wise mean and sample (n-1) standard deviation; tiny stds become 1."""
    if dataset.n < 2:
        raise ValueError("fitting a normalizer needs at least 2 columns")
    mean = dataset.X.mean(axis=1)
    scale = dataset.X.std(axis=1, ddof=1)
    scale = np.where(scale < STD_FLOOR, 1.0, scale)
    return Normalizer(mean=mean, scale=scale)


def apply_normalizer(norm: Normalizer, X: np.ndarray) -> np.ndarray:
    if X.shape[0] != norm.mean.shape[0]:
        raise ValueError(
            f"normalizer dimension {norm.mean.shape[0]} does not match X rows {X.shape[0]}"
        )
    return (X - norm.mean[:, None]) / norm.scale[:, None]


def split_stratified(
    dataset: LabeledSet, val_fraction: float, seed: int
) -> tuple[LabeledSet, LabeledSet]:
    """Seeded class-stratified split into (fit, validation) parts.

    Each class contributes at least one column to each side; a class with a
    single column cannot be split and raises TrainingError.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must lie in (0, 1)")
    rng = rng_from(seed, "split")
    fit_idx, val_idx = [], []
    for class_row in (0, 1):
        idx = np.flatnonzero(dataset.T[class_row] == 1.0)
        if len(idx) < 2:
            raise TrainingError(
                "degenerate split: a class has fewer than 2 columns, cannot stratify"
            )
        idx = idx[rng.permutation(len(idx))]
        n_val = min(len(idx) - 1, max(1, int(round(val_fraction * len(idx)))))
        val_idx.append(idx[:n_val])
        fit_idx.append(idx[n_val:])
    fit = np.sort(np.concatenate(fit_idx))
    val = np.sort(np.concatenate(val_idx))
    return dataset.subset(fit), dataset.subset(val)


def loo_partitions(
    cohort: Sequence[PatientRecord],
) -> list[tuple[tuple[str, ...], str]]:
    """One (train ids, test id) pair per patient, in cohort order."""
    if len(cohort) < 2:
        raise ValueError("leave-one-out needs at least 2 patients")
    ids = [r.patient_id for r in cohort]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate patient ids in cohort")
    return [
        (tuple(pid for pid in ids if pid != test_id), test_id)
        for test_id in ids
    ]
