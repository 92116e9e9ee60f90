"""Seeded synthetic cohorts of two-channel vital-sign records.

Real neonatal recordings are private, so end-to-end runs use generated
patients: a slowly drifting noisy baseline per channel, plus injected
events where heart rate dips and SpO2 is pulled toward a low floor
simultaneously. The annotated center minute is the nadir of the dip.

Waveform family (a generator choice, nothing downstream depends on it):
each dip follows a squared-triangle arch ``w(k) = (1 - |k|/(h+1))^2`` over
offsets ``|k| <= h``, so onset and offset are rounded while the center
minute is distinctly the deepest sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .records import PatientRecord
from .seeding import derive_seed, rng_from

# Slow-drift amplitudes (two sinusoids per channel), in channel units.
HR_DRIFT_AMPLITUDES = (2.5, 1.5)
SPO2_DRIFT_AMPLITUDES = (0.4, 0.25)


@dataclass(frozen=True)
class SynthConfig:
    patients: int = 13
    minutes_per_patient: int = 5760
    target_minority_fraction: float = 0.0013
    hr_baseline: float = 150.0
    hr_noise_sd: float = 5.0
    spo2_baseline: float = 97.0
    spo2_noise_sd: float = 1.0
    event_hr_drop: tuple[float, float] = (40.0, 70.0)
    event_spo2_floor: tuple[float, float] = (75.0, 88.0)
    event_duration: tuple[int, int] = (3, 10)
    min_events_per_patient: int = 1
    frame_length: int = 15  # edge margin so every event is reachable by a frame center
    seed: int = 0

    def __post_init__(self):
        if self.patients < 1:
            raise ValueError("patients must be >= 1")
        if not 0.0 <= self.target_minority_fraction < 1.0:
            raise ValueError("target_minority_fraction must lie in [0, 1)")
        for name in ("event_hr_drop", "event_spo2_floor", "event_duration"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is empty")
        if not 0.0 < self.hr_baseline - self.event_hr_drop[1] < 300.0:
            raise ValueError("event_hr_drop can push hr out of the validator range")
        if not 0.0 < self.event_spo2_floor[0] <= 100.0:
            raise ValueError("event_spo2_floor outside the validator range")
        if self.event_duration[0] < 1:
            raise ValueError("event_duration must be >= 1 minute")
        if self.min_events_per_patient < 0:
            raise ValueError("min_events_per_patient must be >= 0")

    @property
    def frames_per_patient(self) -> int:
        return self.minutes_per_patient - self.frame_length + 1


def easy_cohort_config(seed: int = 42, **overrides) -> SynthConfig:
    """Large-amplitude profile: every dip is separated from baseline noise by
    several noise standard deviations. Used as the regression floor cohort."""
    cfg = SynthConfig(
        event_hr_drop=(60.0, 70.0), event_spo2_floor=(75.0, 80.0), seed=seed
    )
    return replace(cfg, **overrides) if overrides else cfg


def _dip_profile(half: int) -> np.ndarray:
    k = np.arange(-half, half + 1)
    return (1.0 - np.abs(k) / (half + 1.0)) ** 2


def inject_event(
    record: PatientRecord, center: int, cfg: SynthConfig, seed: int
) -> PatientRecord:
    """Return a copy of ``record`` with one event dip injected at ``center``.

    Heart rate drops by a draw from ``event_hr_drop`` and SpO2 is pulled
    toward a draw from ``event_spo2_floor``; only samples within the drawn
    dip extent change, and exactly one new event mark appears (at center).
    """
    n = len(record)
    if not cfg.frame_length <= center <= n - 1 - cfg.frame_length:
        raise ValueError(
            f"event center {center} must stay >= {cfg.frame_length} samples from both edges"
        )
    existing = record.event_minutes
    if existing.size and np.abs(existing - center).min() <= cfg.event_duration[1]:
        raise ValueError(f"event center {center} overlaps an existing event")

    rng = rng_from(seed)
    depth = rng.uniform(*cfg.event_hr_drop)
    floor = rng.uniform(*cfg.event_spo2_floor)
    duration = int(rng.integers(cfg.event_duration[0], cfg.event_duration[1] + 1))
    half = max(1, duration // 2)

    w = _dip_profile(half)
    lo, hi = center - half, center + half + 1
    hr = record.hr.copy()
    spo2 = record.spo2.copy()
    marks = record.event_mark.copy()
    hr[lo:hi] -= depth * w
    spo2[lo:hi] -= (spo2[lo:hi] - floor) * w
    marks[center] = True
    return PatientRecord(record.patient_id, hr, spo2, marks)


def _baseline_channels(cfg: SynthConfig, rng: np.random.Generator, n: int):
    t = np.arange(n, dtype=np.float64)
    hr = cfg.hr_baseline + cfg.hr_noise_sd * rng.standard_normal(n)
    spo2 = cfg.spo2_baseline + cfg.spo2_noise_sd * rng.standard_normal(n)
    for amp_hr, amp_spo2 in zip(HR_DRIFT_AMPLITUDES, SPO2_DRIFT_AMPLITUDES):
        period = rng.uniform(0.2 * n, 0.6 * n)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = np.sin(2.0 * np.pi * t / period + phase)
        hr += amp_hr * wave
        spo2 += amp_spo2 * wave
    np.clip(spo2, None, 100.0, out=spo2)
    return hr, spo2


def _choose_event_centers(
    cfg: SynthConfig, rng: np.random.Generator, n: int, n_events: int
) -> list[int]:
    lo = cfg.frame_length
    hi = n - 1 - cfg.frame_length
    min_gap = cfg.event_duration[1]  # centers further apart than this cannot overlap
    if n_events == 0:
        return []
    if n_events * (min_gap + 1) > hi - lo + 1:
        raise ValueError(
            f"cannot pack {n_events} events into {n} minutes without overlap"
        )
    centers: list[int] = []
    for _ in range(200 * n_events):
        c = int(rng.integers(lo, hi + 1))
        if all(abs(c - other) > min_gap for other in centers):
            centers.append(c)
            if len(centers) == n_events:
                return sorted(centers)
    raise ValueError(f"event packing did not converge for {n_events} events in {n} minutes")


def generate_patient(cfg: SynthConfig, index: int) -> PatientRecord:
    """Deterministically generate patient ``p<index:02d>`` of the cohort."""
    n = cfg.minutes_per_patient
    if n < 3 * cfg.frame_length:
        raise ValueError("minutes_per_patient must be at least 3x the frame length")
    patient_seed = derive_seed(cfg.seed, "patient", index)
    rng = rng_from(patient_seed, "waveform")
    pid = f"p{index:02d}"
    hr, spo2 = _baseline_channels(cfg, rng, n)
    record = PatientRecord(pid, hr, spo2, np.zeros(n, dtype=bool))

    event_rng = rng_from(patient_seed, "events")
    n_events = int(event_rng.binomial(cfg.frames_per_patient, cfg.target_minority_fraction))
    n_events = max(n_events, cfg.min_events_per_patient)
    for center in _choose_event_centers(cfg, event_rng, n, n_events):
        record = inject_event(record, center, cfg, derive_seed(patient_seed, "dip", center))
    return record


def generate_cohort(cfg: SynthConfig) -> list[PatientRecord]:
    """All patients of the configured cohort, deterministic per (config, seed).

    The per-patient event count is a binomial draw whose expectation makes
    the cohort-wide positive-frame fraction equal ``target_minority_fraction``
    (subject to the ``min_events_per_patient`` floor).
    """
    return [generate_patient(cfg, i) for i in range(cfg.patients)]
