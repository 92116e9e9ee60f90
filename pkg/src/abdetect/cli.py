"""Command-line entry point tying the pipeline together.

Commands
--------
synth     generate a seeded synthetic cohort into a directory of patient CSVs
train     train one model (pln | svm | ann) on a cohort or explicit file list
evaluate  score a saved model against one patient file
loo       patient-wise leave-one-out protocol for one algorithm
report    merge one or more loo output directories into a recall-precision plane

Every command takes ``--seed`` (all randomness flows from it) and writes a
``manifest.json`` beside its outputs with the resolved configuration, enough
to re-run the command. A ``--config FILE`` of flat ``key = value`` lines
overrides flags; keys are flag names with dashes as underscores.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import ast
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .ann import AnnModel, AnnTrainConfig, ann_forward, ann_train
from .dataset import assemble, balance_by_duplication, concat
from .errors import (
    NoPositivesError,
    RecordFormatError,
    SolverError,
    ToolkitError,
    TrainingError,
)
from .evaluation import (
    ALGORITHMS,
    HarnessConfig,
    emit_pr_plane,
    format_summary_table,
    run_loo,
    write_aggregate_csv,
    write_failures_csv,
    write_trials_csv,
)
from .framing import FrameConfig, extract_frames
from .metrics import ConfusionCounts, confusion_counts, fm_index, precision_recall
from .numerics import AdmmConfig
from .pln import PlnConfig, PlnModel, pln_predict, train_pln
from .records import load_cohort, load_patient_csv, save_cohort
from .seeding import derive_seed
from .serialize import ModelFormatError, load_model, save_model
from .svm import SvmModel, SvmTrainConfig, svm_predict, svm_train
from .synth import SynthConfig, generate_cohort

EVALUATION_HEADER = "algorithm,patient_id,tp,fp,fn,tn,precision,recall,fm"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAINING = 3
EXIT_IO = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want exit code 1
        raise UsageError(message)


def _add_common(p: _Parser) -> None:
    p.add_argument("--seed", type=int, default=0, help="run seed; all randomness derives from it")
    p.add_argument("--config", type=str, default=None, help="key=value file overriding flags")


def _add_frame_flags(p: _Parser) -> None:
    p.add_argument("--frame-length", type=int, default=15)
    p.add_argument("--center-offset", type=int, default=-1, help="-1 means floor(frame_length/2)")


def _add_algo_flags(p: _Parser) -> None:
    p.add_argument("--algo", choices=ALGORITHMS, required=True)
    p.add_argument("--balance-ratio", type=float, default=1.0)
    # progressive network
    p.add_argument("--lam", type=float, default=0.1, help="base-layer ridge weight")
    p.add_argument("--mu", type=float, default=1e4, help="constrained-solver penalty")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--delta-nodes", type=int, default=50)
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--l-max", type=int, default=10)
    p.add_argument("--eta-node", type=float, default=1e-3)
    p.add_argument("--eta-layer", type=float, default=1e-3)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--admm-iters", type=int, default=100)
    p.add_argument("--admm-tol-primal", type=float, default=1e-6)
    p.add_argument("--admm-tol-dual", type=float, default=1e-6)
    # svm
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=None, help="default 1/feature-dimension")
    p.add_argument("--kkt-tol", type=float, default=1e-3)
    p.add_argument("--max-passes", type=int, default=10)
    p.add_argument("--max-train-points", type=int, default=5000)
    # ann
    p.add_argument("--hidden", type=int, default=400)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--epochs", type=int, default=50)


def build_parser() -> _Parser:
    parser = _Parser(prog="abdetect", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"abdetect {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--patients", type=int, default=13)
    p.add_argument("--minutes", type=int, default=5760)
    p.add_argument("--fraction", type=float, default=0.0013, help="target positive-frame fraction")
    p.add_argument("--hr-baseline", type=float, default=150.0)
    p.add_argument("--hr-noise", type=float, default=5.0)
    p.add_argument("--spo2-baseline", type=float, default=97.0)
    p.add_argument("--spo2-noise", type=float, default=1.0)
    p.add_argument("--hr-drop", type=float, nargs=2, default=[40.0, 70.0], metavar=("LO", "HI"))
    p.add_argument("--spo2-floor", type=float, nargs=2, default=[75.0, 88.0], metavar=("LO", "HI"))
    p.add_argument("--duration", type=int, nargs=2, default=[3, 10], metavar=("LO", "HI"))
    p.add_argument("--min-events", type=int, default=1)
    p.add_argument(
        "--profile",
        choices=["default", "easy"],
        default="default",
        help="easy = large-amplitude events (hr drop 60-70, spo2 floor 75-80)",
    )

    p = sub.add_parser("train", help="train one model on a cohort")
    _add_common(p)
    _add_frame_flags(p)
    _add_algo_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--cohort", type=str, default=None, help="directory of patient CSVs")
    p.add_argument("--files", type=str, nargs="+", default=None, help="explicit patient CSV files")

    p = sub.add_parser("evaluate", help="score a saved model on one patient")
    _add_common(p)
    _add_frame_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--patient", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("loo", help="leave-one-out protocol for one algorithm")
    _add_common(p)
    _add_frame_flags(p)
    _add_algo_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("report", help="merge loo outputs into one recall-precision plane")
    _add_common(p)
    p.add_argument("--inputs", nargs="+", required=True, help="loo output directories")
    p.add_argument("--out", required=True)

    return parser


def _coerce(value: str, current):
    if isinstance(current, (list, tuple)):
        return [_coerce(v, current[0] if len(current) else "") for v in value.split()]
    try:
        return ast.literal_eval(value)
    except (ValueError, SyntaxError):
        return value


def apply_config_file(args: argparse.Namespace) -> None:
    """Overlay ``key = value`` lines from --config onto parsed flags."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.is_file():
        raise RecordFormatError(f"no such config file: {path}")
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key = value, found {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key in ("config", "command") or not hasattr(args, key):
            raise UsageError(f"{path}:{line_no}: unknown config key {key!r}")
        setattr(args, key, _coerce(value.strip(), getattr(args, key)))


def _frame_config(args) -> FrameConfig:
    return FrameConfig(l=args.frame_length, center_offset=args.center_offset)


def _harness_config(args) -> HarnessConfig:
    return HarnessConfig(
        frame=_frame_config(args),
        pln=PlnConfig(
            lam=args.lam,
            mu=args.mu,
            alpha=args.alpha,
            delta_nodes=args.delta_nodes,
            n_max=args.n_max,
            l_max=args.l_max,
            eta_node=args.eta_node,
            eta_layer=args.eta_layer,
            val_fraction=args.val_fraction,
            admm=AdmmConfig(
                mu=args.mu,
                max_iters=args.admm_iters,
                tol_primal=args.admm_tol_primal,
                tol_dual=args.admm_tol_dual,
            ),
        ),
        svm=SvmTrainConfig(
            C=args.svm_c,
            gamma=args.gamma,
            kkt_tol=args.kkt_tol,
            max_passes=args.max_passes,
            max_train_points=args.max_train_points,
        ),
        ann=AnnTrainConfig(
            learning_rate=args.learning_rate,
            batch_size=args.batch_size,
            epochs=args.epochs,
        ),
        ann_hidden=args.hidden,
        balance_ratio=args.balance_ratio,
    )


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int, inputs, outputs) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "toolkit_version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _ensure_out_dir(path_str: str) -> Path:
    out = Path(path_str)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _cmd_synth(args) -> int:
    if args.profile == "easy":
        args.hr_drop = [60.0, 70.0]
        args.spo2_floor = [75.0, 80.0]
    cfg = SynthConfig(
        patients=args.patients,
        minutes_per_patient=args.minutes,
        target_minority_fraction=args.fraction,
        hr_baseline=args.hr_baseline,
        hr_noise_sd=args.hr_noise,
        spo2_baseline=args.spo2_baseline,
        spo2_noise_sd=args.spo2_noise,
        event_hr_drop=tuple(args.hr_drop),
        event_spo2_floor=tuple(args.spo2_floor),
        event_duration=tuple(args.duration),
        min_events_per_patient=args.min_events,
        seed=args.seed,
    )
    out = _ensure_out_dir(args.out)
    cohort = generate_cohort(cfg)
    paths = save_cohort(cohort, out)
    config_echo = asdict(cfg)
    _write_manifest(out, "synth", config_echo, args.seed, [], paths)
    n_events = sum(int(r.event_mark.sum()) for r in cohort)
    print(f"wrote {len(paths)} patient files to {out} ({n_events} events)")
    return EXIT_OK


def _load_training_records(args):
    if args.cohort:
        records = load_cohort(args.cohort, min_length=args.frame_length)
        inputs = [args.cohort]
    elif args.files:
        records = [load_patient_csv(f, min_length=args.frame_length) for f in args.files]
        inputs = list(args.files)
    else:
        raise UsageError("provide --cohort or --files")
    return records, inputs


def _train_single(algorithm: str, train_set, cfg: HarnessConfig, seed: int):
    if algorithm == "pln":
        return train_pln(train_set, replace(cfg.pln, seed=seed))
    balanced = balance_by_duplication(train_set, derive_seed(seed, "balance"), ratio=cfg.balance_ratio)
    if algorithm == "svm":
        return svm_train(balanced, replace(cfg.svm, seed=seed))
    return ann_train(balanced, replace(cfg.ann, seed=seed), hidden=cfg.ann_hidden)


def _cmd_train(args) -> int:
    records, inputs = _load_training_records(args)
    cfg = _harness_config(args)
    train_set = concat([assemble(extract_frames(r, cfg.frame)) for r in records])
    model = _train_single(args.algo, train_set, cfg, args.seed)
    out = _ensure_out_dir(args.out)
    model_path = out / "model.txt"
    save_model(model, model_path)
    _write_manifest(out, "train", _config_echo(args, cfg), args.seed, inputs, [model_path])
    print(f"trained {args.algo} on {train_set.n} frames -> {model_path}")
    return EXIT_OK


def _config_echo(args, cfg: HarnessConfig) -> dict:
    echo = asdict(cfg)
    if hasattr(args, "algo"):
        echo["algo"] = args.algo
    return echo


def _model_algorithm(model) -> str:
    if isinstance(model, PlnModel):
        return "pln"
    if isinstance(model, SvmModel):
        return "svm"
    if isinstance(model, AnnModel):
        return "ann"
    raise ModelFormatError(f"unrecognized model type {type(model).__name__}")


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    algorithm = _model_algorithm(model)
    record = load_patient_csv(args.patient, min_length=args.frame_length)
    frame_cfg = _frame_config(args)
    test_set = assemble(extract_frames(record, frame_cfg))
    if algorithm == "pln":
        pred = pln_predict(model, test_set.X)[1]
    elif algorithm == "svm":
        pred = svm_predict(model, test_set.X)[1]
    else:
        pred = ann_forward(model, test_set.X)[1]
    counts = confusion_counts(test_set.labels, pred)
    precision, recall = precision_recall(counts)
    fm = fm_index(counts)
    line = (
        f"{algorithm},{record.patient_id},{counts.tp},{counts.fp},{counts.fn},{counts.tn},"
        f"{precision!r},{recall!r},{fm!r}"
    )
    print(EVALUATION_HEADER)
    print(line)
    if args.out:
        out = _ensure_out_dir(args.out)
        eval_path = out / "evaluation.csv"
        eval_path.write_text(EVALUATION_HEADER + "\n" + line + "\n", encoding="utf-8")
        _write_manifest(
            out,
            "evaluate",
            {"frame": asdict(frame_cfg), "model": args.model},
            args.seed,
            [args.model, args.patient],
            [eval_path],
        )
    return EXIT_OK


def _cmd_loo(args) -> int:
    records = load_cohort(args.cohort, min_length=args.frame_length)
    cfg = _harness_config(args)
    report = run_loo(records, args.algo, cfg, seed=args.seed, jobs=args.jobs)
    out = _ensure_out_dir(args.out)
    trials_path = out / "trials.csv"
    failures_path = out / "failures.csv"
    aggregate_path = out / "aggregate.csv"
    pr_path = out / "pr_plane.csv"
    write_trials_csv(report, trials_path)
    write_failures_csv(report, failures_path)
    write_aggregate_csv([report], aggregate_path)
    emit_pr_plane([report], pr_path)
    _write_manifest(
        out,
        "loo",
        _config_echo(args, cfg),
        args.seed,
        [args.cohort],
        [trials_path, failures_path, aggregate_path, pr_path],
    )
    print(format_summary_table([report]))
    return EXIT_OK


def _read_trials_csv(path: Path):
    """Rebuild (algorithm, trial rows) from a loo output's trials.csv."""
    from .evaluation import TRIALS_HEADER, CohortReport, TrialResult
    from .metrics import summarize_trials

    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != TRIALS_HEADER:
        raise RecordFormatError(f"{path}: not a trials.csv (unexpected header)")
    by_algo: dict[str, list[TrialResult]] = {}
    for line in lines[1:]:
        f = line.split(",")
        if len(f) != 10:
            raise RecordFormatError(f"{path}: malformed row {line!r}")
        counts = ConfusionCounts(int(f[2]), int(f[3]), int(f[4]), int(f[5]))
        by_algo.setdefault(f[0], []).append(
            TrialResult(
                test_patient=f[1],
                counts=counts,
                precision=float(f[6]),
                recall=float(f[7]),
                fm=float(f[8]),
                train_seconds=float(f[9]),
                model_descriptor=f[0],
            )
        )
    reports = []
    for algo, trials in by_algo.items():
        fm_mean, fm_std = summarize_trials([t.fm for t in trials])
        reports.append(CohortReport(algorithm=algo, trials=trials, fm_mean=fm_mean, fm_std=fm_std))
    return reports


def _cmd_report(args) -> int:
    reports = []
    for d in args.inputs:
        trials_path = Path(d) / "trials.csv"
        if not trials_path.is_file():
            raise RecordFormatError(f"no trials.csv in {d}")
        reports.extend(_read_trials_csv(trials_path))
    out = _ensure_out_dir(args.out)
    pr_path = out / "pr_plane.csv"
    aggregate_path = out / "aggregate.csv"
    emit_pr_plane(reports, pr_path)
    write_aggregate_csv(reports, aggregate_path)
    _write_manifest(
        out, "report", {"inputs": list(args.inputs)}, args.seed, args.inputs, [pr_path, aggregate_path]
    )
    print(format_summary_table(reports))
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "loo": _cmd_loo,
    "report": _cmd_report,
}


def run_cli(argv: list[str]) -> int:
    """Parse and execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        apply_config_file(args)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RecordFormatError, ModelFormatError, NoPositivesError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, SolverError) as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
