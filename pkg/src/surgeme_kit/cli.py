"""Command-line entry point: synth | ingest-check | train | experiment | report.

Batch and non-interactive; exit code 0 iff no error, with errors printed
to stderr under a stable greppable prefix.  SURGEME_KIT_LOG controls log
verbosity (error, warn, info, debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import dump_reference, load_config
from .core import Dataset, Domain, builtin_profiles, validate_dataset
from .errors import ConfigError, SurgemeKitError
from .experiments import (
    ExperimentConfig,
    grouped_holdout,
    mix_training_data,
    run_domain_transfer,
    run_no_transfer,
    stratified_folds,
    _build_bank,
    _design,
    N_CLASSES,
)
from .ingest import load_dataset, read_profiles
from .learners import LabeledMatrix, save_model, train as train_learner
from .reporting import emit_report
from .seeding import derive_seed
from .synthgen import (
    BenchmarkSpec,
    EmbodimentParams,
    ProfileSpec,
    desk_synth_v1,
    generate_benchmark,
    write_benchmark,
)

log = logging.getLogger("surgeme_kit.cli")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("SURGEME_KIT_LOG", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _benchmark_spec(cfg: dict) -> BenchmarkSpec:
    synth = cfg["synth"]
    if synth["profiles"] is None:
        base = desk_synth_v1(synth["trials_per_profile"], synth["seed"])
        return BenchmarkSpec(synth["benchmark"], base.profiles,
                             synth["trials_per_profile"], synth["seed"],
                             synth["n_objects"], synth["sample_hz"])
    profiles = {}
    for name, spec in synth["profiles"].items():
        spec = dict(spec)
        domain = Domain(spec.pop("domain", "sim"))
        if "board_pose" in spec:
            spec["board_pose"] = tuple(spec["board_pose"])
        profiles[name] = ProfileSpec(EmbodimentParams(**spec), domain)
    return BenchmarkSpec(synth["benchmark"], profiles,
                         synth["trials_per_profile"], synth["seed"],
                         synth["n_objects"], synth["sample_hz"])


def _resolve_dataset(cfg: dict) -> Dataset:
    manifest = cfg["dataset"]["manifest"]
    if manifest is None:
        log.info("no manifest configured; generating the synthetic benchmark")
        return generate_benchmark(_benchmark_spec(cfg))
    profiles = builtin_profiles()
    for name, spec in cfg["dataset"]["profiles"].items():
        tmp = dict(spec)
        tmp_path = None
        # reuse the profiles.json field schema
        profiles.update(read_profiles_dict({name: tmp}))
        del tmp_path
    return load_dataset(manifest, profiles, cfg["dataset"]["overlap_tolerance"])


def read_profiles_dict(raw: dict):
    """Profile definitions straight from config (same schema as profiles.json)."""
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(raw, fh)
        tmp = fh.name
    try:
        return read_profiles(tmp)
    finally:
        os.unlink(tmp)


def _experiment_config(cfg: dict, learner: str, scenario: str | None = None,
                       jobs: int | None = None) -> ExperimentConfig:
    exp = cfg["experiment"]
    return ExperimentConfig(
        scenario=scenario or exp["scenario"],
        mode=exp["mode"],
        learner=learner,
        learner_params=dict(exp["learner_params"].get(learner, {}))
        if learner in exp["learner_params"] or not exp["learner_params"]
        else dict(exp["learner_params"]),
        feature_kind=exp["feature_kind"],
        folds=exp["folds"],
        seeds=tuple(exp["seeds"]),
        ratio_grid=tuple(exp["ratio_grid"]),
        include_joints=exp["include_joints"],
        frames=exp["frames"],
        domain=exp["domain"],
        holdout_fraction=exp["holdout_fraction"],
        master_seed=cfg["seed"],
        jobs=jobs if jobs is not None else cfg["jobs"],
    )


def _out_dir(cfg: dict, args) -> Path:
    return Path(args.out if args.out else cfg["output_dir"])


def cmd_synth(cfg: dict, args) -> int:
    out = _out_dir(cfg, args)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise SurgemeKitError(
            f"output directory {out} is not empty (use --force to overwrite)")
    spec = _benchmark_spec(cfg)
    counts = write_benchmark(spec, out)
    print(json.dumps(counts, indent=2, sort_keys=True))
    return 0


def cmd_ingest_check(cfg: dict, args) -> int:
    ds = _resolve_dataset(cfg)
    violations = validate_dataset(ds)
    print(f"segments: {len(ds.segments)}")
    for cls, count in sorted(ds.class_counts().items()):
        print(f"  {cls.canonical_name}: {count}")
    if violations:
        for v in violations:
            print(f"violation[{v.kind.value}] trial={v.trial_id} "
                  f"segment={v.segment_index}: {v.message}", file=sys.stderr)
        return 1
    print("no violations")
    return 0


def cmd_train(cfg: dict, args) -> int:
    ds = _resolve_dataset(cfg)
    learner = cfg["experiment"]["learners"][0]
    exp_cfg = _experiment_config(cfg, learner)
    exp_cfg.validate()
    seed0 = exp_cfg.seeds[0]
    segments = ds.segments
    if exp_cfg.scenario == "no_transfer":
        if exp_cfg.domain is not None:
            segments = [s for s in segments if s.domain == Domain(exp_cfg.domain)]
        sub = Dataset(segments, ds.profiles)
        folds = stratified_folds(sub, exp_cfg.folds,
                                 derive_seed(exp_cfg.master_seed, "cv", seed0))
        train_idx, test_idx = folds[0]
    else:
        sim_idx = [i for i, s in enumerate(segments) if s.domain == Domain.SIM]
        real_idx = [i for i, s in enumerate(segments) if s.domain == Domain.REAL]
        real_segments = [segments[i] for i in real_idx]
        held_in_local, held_out_local = grouped_holdout(
            real_segments, exp_cfg.holdout_fraction,
            derive_seed(exp_cfg.master_seed, "transfer-holdout", seed0))
        pool = [real_segments[i] for i in held_in_local]
        ratio = float(cfg["experiment"]["train_ratio"])
        _, info = mix_training_data([segments[i] for i in sim_idx], pool, ratio,
                                    derive_seed(exp_cfg.master_seed, "mix", seed0, ratio))
        train_idx = sorted(sim_idx) + sorted(real_idx[held_in_local[i]]
                                             for i in info.segments)
        test_idx = sorted(real_idx[i] for i in held_out_local)
        sub = Dataset(segments, ds.profiles)
    bank = _build_bank(segments if exp_cfg.scenario != "no_transfer" else sub.segments,
                       exp_cfg)
    X_train, y_train = _design(bank, exp_cfg, train_idx)
    X_test, y_test = _design(bank, exp_cfg, test_idx)
    model_seed = derive_seed(exp_cfg.master_seed, "train-cmd", learner)
    model = train_learner(learner, LabeledMatrix(X_train, y_train, N_CLASSES),
                          exp_cfg.learner_params, model_seed)
    accuracy = float((model.predict(X_test) == y_test).mean())
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / f"model_{learner}.sgkm"
    save_model(model, model_path)
    print(f"trained {learner} ({exp_cfg.scenario}, {exp_cfg.mode}, "
          f"{exp_cfg.feature_kind}) on {len(train_idx)} training rows; "
          f"holdout accuracy {accuracy:.4f}; model -> {model_path}")
    return 0


def cmd_experiment(cfg: dict, args) -> int:
    ds = _resolve_dataset(cfg)
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    scenario = cfg["experiment"]["scenario"]
    summary_lines = ["scenario,series,mode,learner,feature_kind,ratio,mean,std,cells"]
    for learner in cfg["experiment"]["learners"]:
        exp_cfg = _experiment_config(cfg, learner)
        if scenario == "no_transfer":
            report = run_no_transfer(ds, exp_cfg)
        else:
            report = run_domain_transfer(ds, exp_cfg)
        report_dir = out / f"{scenario}_{exp_cfg.mode}_{learner}"
        emit_report(report, report_dir)
        for row in report.summary_rows():
            ratio = "" if row["ratio"] is None else repr(float(row["ratio"]))
            summary_lines.append(",".join([
                row["scenario"], row["series"], row["mode"], row["learner"],
                row["feature_kind"], ratio, repr(row["mean"]), repr(row["std"]),
                str(row["cells"])]))
        print(f"{learner}: report -> {report_dir}")
    (out / "summary.csv").write_text("\n".join(summary_lines) + "\n",
                                     encoding="utf-8", newline="\n")
    print(f"summary -> {out / 'summary.csv'}")
    return 0


def cmd_report(cfg: dict, args) -> int:
    from .experiments import ExperimentReport

    text = Path(args.from_json).read_text(encoding="utf-8")
    report = ExperimentReport.from_json(text)
    out = _out_dir(cfg, args)
    emit_report(report, out)
    print(f"report regenerated -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surgeme-kit",
        description="Surgeme recognition toolkit: synthetic benchmark, "
                    "ingestion checks, classifier training, and transfer "
                    "experiments.")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config file (defaults apply otherwise)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker processes for experiment cells")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (overrides config output_dir)")
    parser.add_argument("--force", action="store_true",
                        help="allow writing into a non-empty output directory")
    parser.add_argument("--dry-run", action="store_true",
                        help="print the resolved config and exit")
    parser.add_argument("--dump-config-reference", type=Path, default=None,
                        metavar="PATH",
                        help="write a reference file documenting every config "
                             "key and its default, then exit")
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("synth", help="generate the synthetic benchmark on disk")
    sub.add_parser("ingest-check", help="parse and validate the configured dataset")
    sub.add_parser("train", help="train one learner and save the model")
    sub.add_parser("experiment", help="run the configured evaluation scenario")
    report_p = sub.add_parser("report", help="re-emit report files from report.json")
    report_p.add_argument("--from", dest="from_json", required=True,
                          help="path to a previously written report.json")
    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "ingest-check": cmd_ingest_check,
    "train": cmd_train,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.dump_config_reference is not None:
            dump_reference(args.dump_config_reference)
            print(f"config reference -> {args.dump_config_reference}")
            return 0
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.jobs is not None:
            cfg["jobs"] = args.jobs
        if args.dry_run:
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        if args.command is None:
            parser.print_help()
            return 2
        return _COMMANDS[args.command](cfg, args)
    except (SurgemeKitError, OSError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
