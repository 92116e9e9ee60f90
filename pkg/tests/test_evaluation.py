import numpy as np
import pytest

from abdetect.ann import AnnTrainConfig
from abdetect.evaluation import (
    AGGREGATE_HEADER,
    PR_PLANE_HEADER,
    TRIALS_HEADER,
    HarnessConfig,
    emit_pr_plane,
    format_summary_table,
    run_loo,
    write_aggregate_csv,
    write_failures_csv,
    write_trials_csv,
)
from abdetect.pln import PlnConfig
from abdetect.svm import SvmTrainConfig
from abdetect.synth import SynthConfig, generate_cohort


def small_cohort(patients=4, minutes=300, seed=11, fraction=0.03, min_events=2):
    cfg = SynthConfig(
        patients=patients,
        minutes_per_patient=minutes,
        target_minority_fraction=fraction,
        min_events_per_patient=min_events,
        seed=seed,
    )
    return generate_cohort(cfg)


def fast_config(**kw):
    base = dict(
        pln=PlnConfig(seed=0, delta_nodes=16, n_max=52, l_max=2),
        svm=SvmTrainConfig(seed=0, max_train_points=400),
        ann=AnnTrainConfig(epochs=4, seed=0),
        ann_hidden=16,
    )
    base.update(kw)
    return HarnessConfig(**base)


@pytest.fixture(scope="module")
def cohort():
    return small_cohort()


@pytest.fixture(scope="module")
def pln_report(cohort):
    return run_loo(cohort, "pln", fast_config(), seed=5, keep_models=True)


class TestRunLoo:
    def test_one_trial_per_patient(self, cohort, pln_report):
        assert len(pln_report.trials) == len(cohort)
        tested = [t.test_patient for t in pln_report.trials]
        assert sorted(tested) == sorted(r.patient_id for r in cohort)

    def test_aggregate_consistency(self, pln_report):
        ok = pln_report.successful
        fms = [t.fm for t in ok]
        assert pln_report.fm_mean == pytest.approx(np.mean(fms), abs=1e-12)
        assert pln_report.fm_std == pytest.approx(np.std(fms, ddof=1), abs=1e-12)
        for t in ok:
            assert t.fm == pytest.approx(np.sqrt(t.precision * t.recall), abs=1e-12)

    def test_jobs_do_not_change_results(self, cohort):
        a = run_loo(cohort, "pln", fast_config(), seed=7, jobs=1)
        b = run_loo(cohort, "pln", fast_config(), seed=7, jobs=3)
        for ta, tb in zip(a.trials, b.trials):
            assert ta.test_patient == tb.test_patient
            assert ta.fm == tb.fm and ta.counts == tb.counts

    def test_seed_changes_results_deterministically(self, cohort):
        a = run_loo(cohort, "pln", fast_config(), seed=7)
        b = run_loo(cohort, "pln", fast_config(), seed=7)
        assert [t.fm for t in a.trials] == [t.fm for t in b.trials]

    def test_no_leakage_and_per_fold_normalizers(self, pln_report):
        models = [t.model for t in pln_report.trials if t.model is not None]
        assert len(models) >= 2
        # folds differ, so fitted normalizers must differ
        assert not np.allclose(models[0].normalizer.mean, models[1].normalizer.mean)

    def test_eventless_test_patient_is_flagged(self):
        cohort = small_cohort(patients=3, min_events=2)
        # strip the events from one patient: its trial must flag, not abort
        from abdetect.records import PatientRecord

        stripped = PatientRecord(
            cohort[0].patient_id,
            cohort[0].hr,
            cohort[0].spo2,
            np.zeros(len(cohort[0]), dtype=bool),
        )
        cohort = [stripped, cohort[1], cohort[2]]
        report = run_loo(cohort, "pln", fast_config(), seed=1)
        flagged = {t.test_patient: t for t in report.trials}[stripped.patient_id]
        assert not flagged.succeeded
        assert "no positive instances" in flagged.error
        assert report.n_failed == 1
        assert len(report.successful) == 2

    def test_all_three_algorithms_run(self, cohort):
        for algo in ("pln", "svm", "ann"):
            report = run_loo(cohort, algo, fast_config(), seed=2)
            assert report.algorithm == algo
            assert len(report.trials) == len(cohort)

    def test_unknown_algorithm(self, cohort):
        with pytest.raises(ValueError, match="unknown algorithm"):
            run_loo(cohort, "forest", fast_config(), seed=0)


class TestReportFiles:
    def test_trials_csv_shape(self, pln_report, tmp_path):
        path = tmp_path / "trials.csv"
        write_trials_csv(pln_report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == TRIALS_HEADER
        assert len(lines) == 1 + len(pln_report.successful)
        first = lines[1].split(",")
        assert first[0] == "pln"
        assert int(first[2]) >= 0  # tp column parses

    def test_aggregate_csv_recomputes_from_trials(self, pln_report, tmp_path):
        path = tmp_path / "aggregate.csv"
        write_aggregate_csv([pln_report], path)
        lines = path.read_text().splitlines()
        assert lines[0] == AGGREGATE_HEADER
        fields = lines[1].split(",")
        assert float(fields[1]) == pytest.approx(pln_report.fm_mean, abs=1e-15)
        assert int(fields[5]) == len(pln_report.successful)

    def test_pr_plane_rows(self, pln_report, tmp_path):
        path = tmp_path / "pr.csv"
        emit_pr_plane([pln_report], path)
        lines = path.read_text().splitlines()
        assert lines[0] == PR_PLANE_HEADER
        assert len(lines) == 1 + len(pln_report.successful) + 1
        agg = lines[-1].split(",")
        assert agg[1] == "aggregate"
        recalls = [float(l.split(",")[2]) for l in lines[1:-1]]
        assert float(agg[2]) == pytest.approx(np.mean(recalls), abs=1e-12)

    def test_pr_plane_requires_reports(self, tmp_path):
        with pytest.raises(ValueError):
            emit_pr_plane([], tmp_path / "pr.csv")

    def test_failures_csv(self, tmp_path):
        cohort = small_cohort(patients=3, min_events=2)
        from abdetect.records import PatientRecord

        cohort[0] = PatientRecord(
            cohort[0].patient_id, cohort[0].hr, cohort[0].spo2, np.zeros(len(cohort[0]), bool)
        )
        report = run_loo(cohort, "pln", fast_config(), seed=1)
        path = tmp_path / "failures.csv"
        write_failures_csv(report, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[1].startswith(f"pln,{cohort[0].patient_id},")

    def test_summary_table_lists_each_algorithm(self, pln_report):
        table = format_summary_table([pln_report])
        assert "pln" in table
        assert "+/-" in table
