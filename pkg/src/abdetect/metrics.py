"""Confusion counting, precision/recall, the Fowlkes-Mallows index, and
mean +/- std aggregation across evaluation trials.

The event class is the positive class throughout. The Fowlkes-Mallows index
is the geometric mean of precision and recall; it is defined to be 0 when
there are no true positives, which also covers the 0/0 precision corner.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoPositivesError
from .framing import Label


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_counts(truth: Sequence[Label], pred: Sequence[Label]) -> ConfusionCounts:
    """Tally (truth, prediction) pairs with EVENT as the positive class."""
    if len(truth) != len(pred):
        raise ValueError(f"length mismatch: {len(truth)} truth vs {len(pred)} predictions")
    tp = fp = fn = tn = 0
    for t, p in zip(truth, pred):
        if t is Label.EVENT:
            if p is Label.EVENT:
                tp += 1
            else:
                fn += 1
        else:
            if p is Label.EVENT:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def confusion_from_masks(truth_positive, pred_positive) -> ConfusionCounts:
    """Vectorized twin of confusion_counts for boolean positive masks."""
    t = np.asarray(truth_positive, dtype=bool)
    p = np.asarray(pred_positive, dtype=bool)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} truth vs {p.shape} predictions")
    tp = int(np.count_nonzero(t & p))
    fp = int(np.count_nonzero(~t & p))
    fn = int(np.count_nonzero(t & ~p))
    tn = int(np.count_nonzero(~t & ~p))
    return ConfusionCounts(tp, fp, fn, tn)


def precision_recall(c: ConfusionCounts) -> tuple[float, float]:
    """(precision, recall); precision is 0 when nothing was predicted positive."""
    if c.tp + c.fn == 0:
        raise NoPositivesError("no positive instances in truth; recall undefined")
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else 0.0
    recall = c.tp / (c.tp + c.fn)
    return precision, recall


def fm_index(c: ConfusionCounts) -> float:
    """Geometric mean of precision and recall, in [0, 1]; 0 whenever tp = 0."""
    if c.tp + c.fn == 0:
        raise NoPositivesError("no positive instances in truth; index undefined")
    if c.tp == 0:
        return 0.0
    precision, recall = precision_recall(c)
    return math.sqrt(precision * recall)


def summarize_trials(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and sample (n-1) standard deviation of trial scores."""
    if len(values) == 0:
        raise ValueError("cannot summarize zero trials")
    mean = sum(values) / len(values)
    if len(values) == 1:
        warnings.warn("standard deviation of a single trial is reported as 0", stacklevel=2)
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)
