"""Command-line entry point: ``stressdetect <subcommand> [options]``.

Exit codes: 0 success, 2 input or configuration error, 3 convergence error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConvergenceError, StressDetectError
from .evaluation import atomic_write_text, read_report
from .pipeline import (CLASSIFIERS, ExperimentConfig, cohort_sessions, extract_session_dir,
                       generate_cohort_dir, run_experiment, with_overrides)
from .report import render_summary
from .synth import GeneratorConfig

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE = 0, 2, 3

_INT_KEYS = {"T", "seed", "jobs", "folds", "top_k", "cohort_size", "cv_max_rows"}
_FLOAT_KEYS = {"C", "separability", "train_fraction"}
_GRID_KEYS = {"C_grid", "gamma_grid"}


class InputError(StressDetectError):
    """Bad command-line input; reported with exit code 2."""


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; blank lines and ``#`` comments are ignored."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{n}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in _INT_KEYS:
                out[key] = None if value.lower() == "none" else int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _GRID_KEYS:
                out[key] = tuple(float(v) for v in value.replace(",", " ").split())
            else:
                out[key] = value
        except ValueError:
            raise InputError(f"{path}:{n}: bad value for {key}: {value!r}") from None
    return out


def _experiment_config(args) -> ExperimentConfig:
    file_cfg = read_config_file(args.config) if args.config else {}
    allowed = set(ExperimentConfig.field_names())
    base = {k: v for k, v in file_cfg.items() if k in allowed}
    flags = {"modality": args.modality, "classifier": args.classifier, "T": args.T, "C": args.C,
             "seed": args.seed, "jobs": args.jobs}
    return with_overrides(ExperimentConfig(**base), **flags)


def _generator_config(args) -> GeneratorConfig:
    file_cfg = read_config_file(args.config) if args.config else {}
    kwargs = {}
    for key in ("seed", "separability", "cohort_size", "counts"):
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key)
        if value is not None:
            kwargs[key] = value
    return GeneratorConfig(**kwargs)


def _require(path, what):
    if path is None:
        raise InputError(f"--{what} is required")
    return Path(path)


def cmd_synth(args):
    cfg = _generator_config(args)
    out = _require(args.out or args.cohort, "out")
    generate_cohort_dir(cfg, out, args.jobs or 1, raw_streams=args.raw)
    print(f"wrote {cfg.cohort_size} sessions to {out}")


def cmd_extract(args):
    cohort = _require(args.cohort, "cohort")
    for directory in cohort_sessions(cohort):
        extract_session_dir(directory)
        print(f"extracted {directory.name}")


def cmd_train(args):
    cohort = _require(args.cohort, "cohort")
    out = _require(args.out, "out")
    report = run_experiment(_experiment_config(args), cohort, out)
    print(f"trained {len(report.participants)} models into {out / 'models'}")


def cmd_eval(args):
    cohort = _require(args.cohort, "cohort")
    out = _require(args.out, "out")
    report = run_experiment(_experiment_config(args), cohort, out)
    acc = report.cohort["accuracy"]
    print(f"accuracy {acc.format()} over {len(report.participants)} participants -> {out / 'report.json'}")


def cmd_rank(args):
    cohort = _require(args.cohort, "cohort")
    out = _require(args.out, "out")
    config = with_overrides(_experiment_config(args), classifier="adaboost")
    report = run_experiment(config, cohort, out)
    for feature, pct in report.ranking[: config.top_k]:
        print(f"{feature}\t{pct:.1f}%")


def cmd_report(args):
    out = _require(args.out, "out")
    report_path = out / "report.json"
    if not report_path.is_file():
        raise InputError(f"{out}: no report.json; run 'eval' or 'all' first")
    reports = {"main": read_report(report_path)}
    for extra in sorted(out.glob("report_*.json")):
        reports[extra.stem[len("report_"):]] = read_report(extra)
    atomic_write_text(out / "summary.md", render_summary(reports))
    print(f"wrote {out / 'summary.md'}")


def cmd_all(args):
    out = _require(args.out, "out")
    cohort = Path(args.cohort) if args.cohort else out / "cohort"
    if not (cohort / "manifest.json").is_file():
        generate_cohort_dir(_generator_config(args), cohort, args.jobs or 1)
    config = _experiment_config(args)
    out.mkdir(parents=True, exist_ok=True)
    run_experiment(config, cohort, out)
    # companion runs for the modality and T=5 comparisons
    if config.classifier == "adaboost":
        for modality in ("phys", "badge", "combined"):
            if modality != config.modality:
                rep = run_experiment(with_overrides(config, modality=modality), cohort)
                atomic_write_text(out / f"report_{modality}.json", rep.to_json())
        rep = run_experiment(with_overrides(config, T=5), cohort)
        atomic_write_text(out / "report_T5.json", rep.to_json())
    cmd_report(args)


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "train": cmd_train, "eval": cmd_eval,
            "rank": cmd_rank, "report": cmd_report, "all": cmd_all}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stressdetect",
                                     description="Stress detection from wearable sensor sessions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cohort", help="cohort directory (one sub-directory per participant)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--config", help="flat key = value config file; flags win")
    common.add_argument("--modality", choices=("phys", "badge", "combined"))
    common.add_argument("--classifier", choices=CLASSIFIERS)
    common.add_argument("--T", type=int, help="AdaBoost rounds")
    common.add_argument("--C", type=float, help="linear SVM cost")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"synth": "generate a synthetic cohort", "extract": "rebuild features from raw streams",
             "train": "train per-participant models", "eval": "train and evaluate",
             "rank": "AdaBoost feature ranking", "report": "markdown summary of a results directory",
             "all": "synth (if needed), evaluate and report"}
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name in ("synth", "all"):
            p.add_argument("--separability", type=float)
            p.add_argument("--cohort-size", dest="cohort_size", type=int)
            p.add_argument("--counts", choices=("table2", "protocol"))
        if name == "synth":
            p.add_argument("--raw", action="store_true", help="also write the raw sensor streams")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (StressDetectError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
