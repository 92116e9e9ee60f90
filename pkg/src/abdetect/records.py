"""Per-patient two-channel vital-sign records and their CSV exchange format.

A record is a uniform one-sample-per-minute grid of heart rate (bpm) and
SpO2 (percent), with a boolean mark on the minutes annotated as event
centers. Cohorts are directories with one ``<patient_id>.csv`` per patient:

    minute,hr_bpm,spo2_pct,event
    0,150.0,97.0,0
    1,148.2,96.5,0
    ...

UTF-8, LF line endings, ``.`` decimal point, ``event`` in {0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import RecordFormatError

CSV_HEADER = "minute,hr_bpm,spo2_pct,event"

#: Shortest record the framer can consume (default window length).
MIN_RECORD_LENGTH = 15

HR_MAX = 300.0
SPO2_MAX = 100.0


class Sample(NamedTuple):
    minute_index: int
    hr: float
    spo2: float
    event_mark: bool


@dataclass(frozen=True)
class PatientRecord:
    """One patient's synchronized heart-rate / SpO2 series with event marks.

    The minute grid is implicit: sample ``i`` is minute ``i``. The CSV loader
    guarantees the grid was consecutive from 0 before dropping the column.
    """

    patient_id: str
    hr: np.ndarray
    spo2: np.ndarray
    event_mark: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hr", np.asarray(self.hr, dtype=np.float64))
        object.__setattr__(self, "spo2", np.asarray(self.spo2, dtype=np.float64))
        object.__setattr__(self, "event_mark", np.asarray(self.event_mark, dtype=bool))
        if not (self.hr.ndim == self.spo2.ndim == self.event_mark.ndim == 1):
            raise ValueError("hr, spo2 and event_mark must be 1-D")
        if not (len(self.hr) == len(self.spo2) == len(self.event_mark)):
            raise ValueError("hr, spo2 and event_mark must have equal length")

    def __len__(self) -> int:
        return len(self.hr)

    def sample(self, i: int) -> Sample:
        return Sample(i, float(self.hr[i]), float(self.spo2[i]), bool(self.event_mark[i]))

    @property
    def samples(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self.sample(i)

    @property
    def event_minutes(self) -> np.ndarray:
        """Indices of annotated event centers, ascending."""
        return np.flatnonzero(self.event_mark)


def validate_record(record: PatientRecord, min_length: int = MIN_RECORD_LENGTH) -> list[str]:
    """Collect invariant violations; an empty list means the record is valid.

    Violations are data, not failures: callers decide whether to raise.
    """
    violations = []
    if len(record) < min_length:
        violations.append(
            f"record length {len(record)} is shorter than the minimum {min_length}"
        )
    for i in np.flatnonzero(~((record.hr > 0.0) & (record.hr < HR_MAX))):
        violations.append(f"hr {record.hr[i]!r} out of range (0, {HR_MAX:g}) at index {i}")
    for i in np.flatnonzero(~((record.spo2 > 0.0) & (record.spo2 <= SPO2_MAX))):
        violations.append(f"spo2 {record.spo2[i]!r} out of range (0, {SPO2_MAX:g}] at index {i}")
    for arr, name in ((record.hr, "hr"), (record.spo2, "spo2")):
        for i in np.flatnonzero(~np.isfinite(arr)):
            violations.append(f"non-finite {name} at index {i}")
    return violations


def load_patient_csv(path: str | Path, min_length: int = MIN_RECORD_LENGTH) -> PatientRecord:
    """Load and validate one patient CSV; the patient id is the file stem.

    Raises RecordFormatError on a missing file, malformed row, gap in the
    minute grid, or out-of-range value; diagnostics carry the 1-based data
    row number.
    """
    path = Path(path)
    if not path.is_file():
        raise RecordFormatError(f"no such cohort file: {path}")
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise RecordFormatError(f"{path}: expected header '{CSV_HEADER}'")

    hr, spo2, marks = [], [], []
    for row_no, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise RecordFormatError(f"{path}: malformed row {row_no}: {line!r}")
        try:
            minute = int(fields[0])
            h = float(fields[1])
            s = float(fields[2])
            ev = int(fields[3])
        except ValueError as exc:
            raise RecordFormatError(f"{path}: malformed row {row_no}: {exc}") from exc
        if minute != row_no - 1:
            raise RecordFormatError(f"{path}: non-consecutive time grid at row {row_no}")
        if not (0.0 < h < HR_MAX):
            raise RecordFormatError(
                f"{path}: hr {h!r} out of range (0, {HR_MAX:g}) at row {row_no}"
            )
        if not (0.0 < s <= SPO2_MAX):
            raise RecordFormatError(
                f"{path}: spo2 {s!r} out of range (0, {SPO2_MAX:g}] at row {row_no}"
            )
        if ev not in (0, 1):
            raise RecordFormatError(f"{path}: event flag must be 0 or 1 at row {row_no}")
        hr.append(h)
        spo2.append(s)
        marks.append(bool(ev))

    record = PatientRecord(path.stem, np.array(hr), np.array(spo2), np.array(marks, dtype=bool))
    if len(record) < min_length:
        raise RecordFormatError(
            f"{path}: record has {len(record)} samples, fewer than the minimum {min_length}"
        )
    return record


def save_patient_csv(record: PatientRecord, path: str | Path) -> None:
    """Write the cohort CSV format; ``load_patient_csv`` inverts it exactly.

    Floats are written with shortest round-trip precision, so save-load-save
    reproduces the file byte for byte.
    """
    path = Path(path)
    rows = [CSV_HEADER]
    for i in range(len(record)):
        rows.append(
            f"{i},{float(record.hr[i])!r},{float(record.spo2[i])!r},{int(record.event_mark[i])}"
        )
    try:
        path.write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write cohort file {path}: {exc}") from exc


def load_cohort(directory: str | Path, min_length: int = MIN_RECORD_LENGTH) -> list[PatientRecord]:
    """Load every ``*.csv`` in a cohort directory, sorted by patient id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise RecordFormatError(f"no such cohort directory: {directory}")
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise RecordFormatError(f"cohort directory {directory} contains no .csv files")
    return [load_patient_csv(p, min_length=min_length) for p in paths]


def save_cohort(records: list[PatientRecord], directory: str | Path) -> list[Path]:
    """Write one ``<patient_id>.csv`` per record; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for record in records:
        p = directory / f"{record.patient_id}.csv"
        save_patient_csv(record, p)
        paths.append(p)
    return paths
