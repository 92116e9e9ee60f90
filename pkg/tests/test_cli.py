import json
from pathlib import Path

import pytest

from abdetect.cli import run_cli

FAST_PLN = ["--delta-nodes", "16", "--n-max", "52", "--l-max", "2"]
FAST_ANN = ["--epochs", "3", "--hidden", "12"]
FAST_SVM = ["--max-train-points", "300"]


def synth_args(out, patients=4, minutes=300, seed=9):
    return [
        "synth",
        "--patients",
        str(patients),
        "--minutes",
        str(minutes),
        "--fraction",
        "0.02",
        "--min-events",
        "2",
        "--seed",
        str(seed),
        "--out",
        str(out),
    ]


def strip_timing(trials_csv: Path) -> list[str]:
    lines = trials_csv.read_text().splitlines()
    return [",".join(line.split(",")[:-1]) for line in lines]


@pytest.fixture(scope="module")
def cohort_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cohort")
    assert run_cli(synth_args(out)) == 0
    return out


class TestSynth:
    def test_writes_cohort_and_manifest(self, tmp_path):
        out = tmp_path / "c"
        assert run_cli(synth_args(out)) == 0
        csvs = sorted(p.name for p in out.glob("*.csv"))
        assert csvs == ["p00.csv", "p01.csv", "p02.csv", "p03.csv"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 9
        assert manifest["config"]["patients"] == 4

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(synth_args(a)) == 0
        assert run_cli(synth_args(b)) == 0
        for pa in sorted(a.glob("*.csv")):
            assert pa.read_bytes() == (b / pa.name).read_bytes()
        # same argv (same out path) reproduces the manifest byte for byte
        first = (a / "manifest.json").read_bytes()
        assert run_cli(synth_args(a)) == 0
        assert (a / "manifest.json").read_bytes() == first

    def test_easy_profile_sets_large_amplitudes(self, tmp_path):
        out = tmp_path / "easy"
        assert run_cli(synth_args(out) + ["--profile", "easy"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["event_hr_drop"] == [60.0, 70.0]
        assert manifest["config"]["event_spo2_floor"] == [75.0, 80.0]


class TestLoo:
    def test_protocol_shape(self, cohort_dir, tmp_path):
        out = tmp_path / "loo"
        rc = run_cli(
            ["loo", "--algo", "pln", "--cohort", str(cohort_dir), "--seed", "3", "--out", str(out)]
            + FAST_PLN
        )
        assert rc == 0
        trials = (out / "trials.csv").read_text().splitlines()
        assert len(trials) == 1 + 4  # header + one row per patient
        patients = [line.split(",")[1] for line in trials[1:]]
        assert sorted(patients) == ["p00", "p01", "p02", "p03"]
        pr = (out / "pr_plane.csv").read_text().splitlines()
        assert len(pr) == 1 + 4 + 1  # header, per-patient rows, aggregate
        assert (out / "failures.csv").read_text().splitlines()[0].startswith("algorithm")
        assert (out / "manifest.json").is_file()

    def test_identical_outputs_across_runs_and_jobs(self, cohort_dir, tmp_path):
        outs = []
        for name, jobs in (("r1", "1"), ("r2", "1"), ("r4", "4")):
            out = tmp_path / name
            rc = run_cli(
                [
                    "loo",
                    "--algo",
                    "pln",
                    "--cohort",
                    str(cohort_dir),
                    "--seed",
                    "3",
                    "--out",
                    str(out),
                    "--jobs",
                    jobs,
                ]
                + FAST_PLN
            )
            assert rc == 0
            outs.append(out)
        # wall-clock is the only column allowed to differ
        assert strip_timing(outs[0] / "trials.csv") == strip_timing(outs[1] / "trials.csv")
        assert strip_timing(outs[0] / "trials.csv") == strip_timing(outs[2] / "trials.csv")
        for name in ("aggregate.csv", "pr_plane.csv", "failures.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
            assert (outs[0] / name).read_bytes() == (outs[2] / name).read_bytes()


class TestTrainEvaluate:
    @pytest.mark.parametrize(
        "algo,extra",
        [("pln", FAST_PLN), ("svm", FAST_SVM), ("ann", FAST_ANN)],
    )
    def test_round_trip(self, cohort_dir, tmp_path, algo, extra):
        train_out = tmp_path / f"train_{algo}"
        rc = run_cli(
            ["train", "--algo", algo, "--cohort", str(cohort_dir), "--seed", "5", "--out", str(train_out)]
            + extra
        )
        assert rc == 0
        model_path = train_out / "model.txt"
        assert model_path.is_file()
        eval_out = tmp_path / f"eval_{algo}"
        rc = run_cli(
            [
                "evaluate",
                "--model",
                str(model_path),
                "--patient",
                str(cohort_dir / "p01.csv"),
                "--out",
                str(eval_out),
            ]
        )
        assert rc == 0
        lines = (eval_out / "evaluation.csv").read_text().splitlines()
        assert lines[0].startswith("algorithm,patient_id,tp")
        assert lines[1].split(",")[0] == algo

    def test_train_accepts_file_list(self, cohort_dir, tmp_path):
        out = tmp_path / "train_files"
        files = [str(cohort_dir / f"p0{i}.csv") for i in range(3)]
        rc = run_cli(
            ["train", "--algo", "pln", "--files", *files, "--seed", "5", "--out", str(out)] + FAST_PLN
        )
        assert rc == 0


class TestReport:
    def test_merges_three_algorithms(self, cohort_dir, tmp_path):
        inputs = []
        for algo, extra in (("pln", FAST_PLN), ("svm", FAST_SVM), ("ann", FAST_ANN)):
            out = tmp_path / f"loo_{algo}"
            rc = run_cli(
                ["loo", "--algo", algo, "--cohort", str(cohort_dir), "--seed", "3", "--out", str(out)]
                + extra
            )
            assert rc == 0
            inputs.append(str(out))
        merged = tmp_path / "merged"
        assert run_cli(["report", "--inputs", *inputs, "--out", str(merged)]) == 0
        pr = (merged / "pr_plane.csv").read_text().splitlines()
        aggregates = [line for line in pr[1:] if line.split(",")[1] == "aggregate"]
        assert len(aggregates) == 3
        assert {line.split(",")[0] for line in aggregates} == {"pln", "svm", "ann"}
        # aggregate row equals the arithmetic mean of that algorithm's rows
        for agg in aggregates:
            algo = agg.split(",")[0]
            rows = [l for l in pr[1:] if l.split(",")[0] == algo and l.split(",")[1] != "aggregate"]
            mean_recall = sum(float(l.split(",")[2]) for l in rows) / len(rows)
            assert float(agg.split(",")[2]) == pytest.approx(mean_recall, abs=1e-12)


class TestConfigFile:
    def test_overrides_flags(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("patients = 2\nminutes = 240  # smaller run\n")
        out = tmp_path / "c"
        rc = run_cli(synth_args(out, patients=6) + ["--config", str(cfg)])
        assert rc == 0
        assert len(list(out.glob("*.csv"))) == 2

    def test_unknown_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("does_not_exist = 3\n")
        assert run_cli(synth_args(tmp_path / "c") + ["--config", str(cfg)]) == 1

    def test_missing_config_file_is_data_error(self, tmp_path):
        assert run_cli(synth_args(tmp_path / "c") + ["--config", str(tmp_path / "nope.cfg")]) == 2


class TestExitCodes:
    def test_usage_errors(self):
        assert run_cli([]) == 1
        assert run_cli(["frobnicate"]) == 1
        assert run_cli(["loo", "--algo", "forest", "--cohort", "x", "--out", "y"]) == 1

    def test_help_is_success(self, capsys):
        assert run_cli(["--help"]) == 0
        assert "synth" in capsys.readouterr().out

    def test_missing_cohort_is_data_error(self, tmp_path):
        rc = run_cli(
            ["loo", "--algo", "pln", "--cohort", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]
        )
        assert rc == 2

    def test_missing_model_is_data_error(self, cohort_dir, tmp_path):
        rc = run_cli(
            ["evaluate", "--model", str(tmp_path / "no.txt"), "--patient", str(cohort_dir / "p00.csv")]
        )
        assert rc == 2

    def test_training_failure_exit_code(self, tmp_path):
        out = tmp_path / "flat"
        assert run_cli(
            [
                "synth",
                "--patients",
                "2",
                "--minutes",
                "200",
                "--fraction",
                "0",
                "--min-events",
                "0",
                "--seed",
                "1",
                "--out",
                str(out),
            ]
        ) == 0
        rc = run_cli(
            ["train", "--algo", "pln", "--cohort", str(out), "--seed", "1", "--out", str(tmp_path / "m")]
            + FAST_PLN
        )
        assert rc == 3

    def test_unwritable_out_is_io_error(self, cohort_dir, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        rc = run_cli(synth_args(blocker / "sub"))
        assert rc == 4
