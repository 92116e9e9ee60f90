"""Sliding-window framing of a patient record into labeled feature vectors.

An ``l``-sample window slides across both channels with stride 1. Each
window becomes one ``2l``-dimensional feature vector laid out channel-major
(all heart-rate samples, then all SpO2 samples). A frame is positive exactly
when the sample at the window's center offset carries an event mark.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .records import PatientRecord


class Label(enum.Enum):
    """Binary frame class: the window is centered on an annotated event, or not."""

    EVENT = "event"
    NON_EVENT = "non_event"


@dataclass(frozen=True)
class FrameConfig:
    l: int = 15
    center_offset: int = field(default=-1)  # -1 resolves to floor(l/2)

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("window length l must be >= 1")
        if self.center_offset == -1:
            object.__setattr__(self, "center_offset", self.l // 2)
        if not 0 <= self.center_offset < self.l:
            raise ValueError("center_offset must lie inside the window")

    @property
    def dim(self) -> int:
        return 2 * self.l


@dataclass(frozen=True)
class LabeledFrame:
    features: np.ndarray  # shape (2l,), channel-major
    label: Label
    patient_id: str
    start_index: int


def frame_count(n_samples: int, cfg: FrameConfig) -> int:
    return n_samples - cfg.l + 1


def label_for_frame(record: PatientRecord, start_index: int, cfg: FrameConfig) -> Label:
    """Label of the window starting at ``start_index``: EVENT iff its center sample is marked."""
    if not 0 <= start_index <= len(record) - cfg.l:
        raise ValueError(
            f"start_index {start_index} out of range for record of length {len(record)}"
        )
    marked = bool(record.event_mark[start_index + cfg.center_offset])
    return Label.EVENT if marked else Label.NON_EVENT


def extract_frames(record: PatientRecord, cfg: FrameConfig | None = None) -> list[LabeledFrame]:
    """All ``N - l + 1`` stride-1 frames of a record, in start-index order.

    Events closer than ``center_offset`` to the record edges are never at a
    window center and therefore yield no positive frame.
    """
    cfg = cfg or FrameConfig()
    n = len(record)
    if n < cfg.l:
        raise ValueError(f"record of length {n} is shorter than the window length {cfg.l}")
    count = frame_count(n, cfg)
    hr_win = np.lib.stride_tricks.sliding_window_view(record.hr, cfg.l)
    spo2_win = np.lib.stride_tricks.sliding_window_view(record.spo2, cfg.l)
    features = np.hstack([hr_win, spo2_win])  # (count, 2l), copies the views
    centers = record.event_mark[cfg.center_offset : cfg.center_offset + count]
    return [
        LabeledFrame(
            features=features[k],
            label=Label.EVENT if centers[k] else Label.NON_EVENT,
            patient_id=record.patient_id,
            start_index=k,
        )
        for k in range(count)
    ]
