"""Patient-wise leave-one-out evaluation across the cohort.

Each trial holds one patient out, trains the selected algorithm on frames
from all the others, and scores the held-out patient's frames. Balancing
and normalization happen strictly inside each trial's training fold. Trials
whose metrics are undefined (for example a test patient with no reachable
event) are flagged and disclosed, never silently dropped.

Per-trial seeds derive from (run seed, patient id), so trials can run
concurrently without changing any result.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .ann import DEFAULT_HIDDEN, AnnModel, AnnTrainConfig, ann_forward, ann_train
from .dataset import LabeledSet, assemble, balance_by_duplication, concat, loo_partitions
from .errors import ToolkitError
from .framing import FrameConfig, extract_frames
from .metrics import ConfusionCounts, confusion_counts, fm_index, precision_recall, summarize_trials
from .pln import PlnConfig, PlnModel, pln_predict, train_pln
from .records import PatientRecord
from .seeding import derive_seed
from .svm import SvmModel, SvmTrainConfig, svm_predict, svm_train

ALGORITHMS = ("pln", "svm", "ann")


@dataclass(frozen=True)
class HarnessConfig:
    """Bundle of all per-algorithm settings used by a leave-one-out run."""

    frame: FrameConfig = field(default_factory=FrameConfig)
    pln: PlnConfig = field(default_factory=PlnConfig)
    svm: SvmTrainConfig = field(default_factory=SvmTrainConfig)
    ann: AnnTrainConfig = field(default_factory=AnnTrainConfig)
    ann_hidden: int = DEFAULT_HIDDEN
    balance_ratio: float = 1.0


@dataclass
class TrialResult:
    test_patient: str
    counts: ConfusionCounts | None
    precision: float | None
    recall: float | None
    fm: float | None
    train_seconds: float
    model_descriptor: str
    error: str | None = None
    model: PlnModel | SvmModel | AnnModel | None = None

    @property
    def succeeded(self) -> bool:
        return self.error is None


@dataclass
class CohortReport:
    algorithm: str
    trials: list[TrialResult]
    fm_mean: float
    fm_std: float

    @property
    def successful(self) -> list[TrialResult]:
        return [t for t in self.trials if t.succeeded]

    @property
    def n_failed(self) -> int:
        return len(self.trials) - len(self.successful)

    @property
    def recall_mean(self) -> float:
        ok = self.successful
        return sum(t.recall for t in ok) / len(ok) if ok else float("nan")

    @property
    def precision_mean(self) -> float:
        ok = self.successful
        return sum(t.precision for t in ok) / len(ok) if ok else float("nan")


def _train_and_descriptor(algorithm: str, train_set: LabeledSet, cfg: HarnessConfig, trial_seed: int):
    if algorithm == "pln":
        # train_pln splits before balancing, so duplicated minority columns
        # never straddle its internal fit/validation boundary
        pln_cfg = replace(cfg.pln, seed=trial_seed)
        return train_pln(train_set, pln_cfg), f"pln({pln_cfg})"
    balanced = balance_by_duplication(
        train_set, derive_seed(trial_seed, "balance"), ratio=cfg.balance_ratio
    )
    if algorithm == "svm":
        svm_cfg = replace(cfg.svm, seed=trial_seed)
        return svm_train(balanced, svm_cfg), f"svm({svm_cfg})"
    if algorithm == "ann":
        ann_cfg = replace(cfg.ann, seed=trial_seed)
        return ann_train(balanced, ann_cfg, hidden=cfg.ann_hidden), f"ann({ann_cfg}, hidden={cfg.ann_hidden})"
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def _predict(algorithm: str, model, X):
    if algorithm == "pln":
        return pln_predict(model, X)[1]
    if algorithm == "svm":
        return svm_predict(model, X)[1]
    return ann_forward(model, X)[1]


def run_trial(
    algorithm: str,
    train_set: LabeledSet,
    test_set: LabeledSet,
    test_patient: str,
    cfg: HarnessConfig,
    trial_seed: int,
    keep_model: bool = False,
) -> TrialResult:
    """One fold: train on ``train_set``, score ``test_set``; failures are
    captured in the result rather than raised."""
    if any(pid == test_patient for pid, _ in train_set.ids):
        raise ValueError(f"training frames leak test patient {test_patient!r}")
    descriptor = algorithm
    started = time.perf_counter()
    try:
        model, descriptor = _train_and_descriptor(algorithm, train_set, cfg, trial_seed)
        train_seconds = time.perf_counter() - started
        pred = _predict(algorithm, model, test_set.X)
        counts = confusion_counts(test_set.labels, pred)
        precision, recall = precision_recall(counts)
        fm = fm_index(counts)
    except ToolkitError as exc:
        return TrialResult(
            test_patient=test_patient,
            counts=None,
            precision=None,
            recall=None,
            fm=None,
            train_seconds=time.perf_counter() - started,
            model_descriptor=descriptor,
            error=str(exc),
        )
    return TrialResult(
        test_patient=test_patient,
        counts=counts,
        precision=precision,
        recall=recall,
        fm=fm,
        train_seconds=train_seconds,
        model_descriptor=descriptor,
        model=model if keep_model else None,
    )


def run_loo(
    cohort: Sequence[PatientRecord],
    algorithm: str,
    cfg: HarnessConfig | None = None,
    seed: int = 0,
    jobs: int = 1,
    keep_models: bool = False,
) -> CohortReport:
    """Leave-one-out over the cohort for one algorithm.

    Results are deterministic for a given (cohort, config, seed) and
    independent of ``jobs``: every trial derives its own seed from the run
    seed and its test patient id.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    cfg = cfg or HarnessConfig()
    partitions = loo_partitions(cohort)
    frames = {rec.patient_id: assemble(extract_frames(rec, cfg.frame)) for rec in cohort}

    def one(partition):
        train_ids, test_id = partition
        train_set = concat([frames[pid] for pid in train_ids])
        return run_trial(
            algorithm,
            train_set,
            frames[test_id],
            test_id,
            cfg,
            derive_seed(seed, test_id),
            keep_model=keep_models,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(one, partitions))
    else:
        trials = [one(p) for p in partitions]

    scores = [t.fm for t in trials if t.succeeded]
    if scores:
        fm_mean, fm_std = summarize_trials(scores)
    else:
        fm_mean = fm_std = float("nan")
    return CohortReport(algorithm=algorithm, trials=trials, fm_mean=fm_mean, fm_std=fm_std)


TRIALS_HEADER = "algorithm,patient_id,tp,fp,fn,tn,precision,recall,fm,train_seconds"
AGGREGATE_HEADER = "algorithm,fm_mean,fm_std,recall_mean,precision_mean,n_trials,n_failed"
PR_PLANE_HEADER = "algorithm,patient_id,recall,precision"
FAILURES_HEADER = "algorithm,patient_id,reason"


def write_trials_csv(report: CohortReport, path: str | Path) -> None:
    """Successful trials, one row each; wall-clock is the only
    run-dependent column."""
    rows = [TRIALS_HEADER]
    for t in report.successful:
        c = t.counts
        rows.append(
            f"{report.algorithm},{t.test_patient},{c.tp},{c.fp},{c.fn},{c.tn},"
            f"{t.precision!r},{t.recall!r},{t.fm!r},{t.train_seconds:.3f}"
        )
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def write_failures_csv(report: CohortReport, path: str | Path) -> None:
    rows = [FAILURES_HEADER]
    for t in report.trials:
        if not t.succeeded:
            reason = t.error.replace(",", ";")
            rows.append(f"{report.algorithm},{t.test_patient},{reason}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def write_aggregate_csv(reports: Sequence[CohortReport], path: str | Path) -> None:
    rows = [AGGREGATE_HEADER]
    for rep in reports:
        rows.append(
            f"{rep.algorithm},{rep.fm_mean!r},{rep.fm_std!r},"
            f"{rep.recall_mean!r},{rep.precision_mean!r},"
            f"{len(rep.successful)},{rep.n_failed}"
        )
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def emit_pr_plane(reports: Sequence[CohortReport], path: str | Path) -> None:
    """Recall-precision CSV: one row per (algorithm, patient) plus one
    aggregate row per algorithm holding arithmetic means."""
    if not reports:
        raise ValueError("no reports to emit")
    rows = [PR_PLANE_HEADER]
    for rep in reports:
        for t in rep.successful:
            rows.append(f"{rep.algorithm},{t.test_patient},{t.recall!r},{t.precision!r}")
        rows.append(f"{rep.algorithm},aggregate,{rep.recall_mean!r},{rep.precision_mean!r}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def format_summary_table(reports: Sequence[CohortReport]) -> str:
    """Mean +/- std per algorithm, laid out for side-by-side comparison."""
    lines = [f"{'algorithm':<10} {'fm (mean +/- std)':<22} {'recall':<8} {'precision':<10} {'trials':<7} {'failed'}"]
    for rep in reports:
        lines.append(
            f"{rep.algorithm:<10} "
            f"{rep.fm_mean:.3f} +/- {rep.fm_std:.3f}{'':<8} "
            f"{rep.recall_mean:<8.3f} {rep.precision_mean:<10.3f} "
            f"{len(rep.successful):<7} {rep.n_failed}"
        )
    return "\n".join(lines)
