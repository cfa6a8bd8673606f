"""Command-line entry point.

Subcommands:
  train        run a configured experiment (JSON config, seeded runs)
  diagnose     audit a finished run directory's artifacts
  parse-check  validate a LIBSVM-format file

Exit codes: train 0=ok 2=bad config 3=bad/missing data 4=invariant
violation; diagnose 0=pass 1=invariant failure 3=missing artifacts;
parse-check 0=valid 1=malformed 3=missing file.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import pathlib
import sys

from orf.core import InvariantViolation
from orf.data import ParseError, parse_libsvm
from orf.evaluation import (MissingArtifacts, consistency_report,
                            load_run_artifacts)
from orf.experiment import ConfigError, DataError, ExperimentConfig, run_all


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("ORF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def cmd_train(args) -> int:
    try:
        config = ExperimentConfig.load(args.config)
        if args.seed is not None:
            config = dataclasses.replace(
                config, hyperparams=dataclasses.replace(
                    config.hyperparams, master_seed=args.seed))
        if args.out is not None:
            config = dataclasses.replace(config, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        results = run_all(config, threads=_resolve_threads(args.threads))
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 4
    for res in results:
        last = res.checkpoints[-1]
        line = (f"run {res.run_dir.name}: t={last.t} "
                f"forest_accuracy={last.forest_accuracy:.4f} "
                f"mean_tree_accuracy={last.mean_tree_accuracy:.4f}")
        if res.bayes_accuracy is not None:
            line += f" bayes_accuracy={res.bayes_accuracy:.4f}"
        print(line)
    return 0


def _run_dirs(path: pathlib.Path):
    if (path / "run.json").exists():
        return [path]
    return sorted(p for p in path.glob("run*") if p.is_dir())


def cmd_diagnose(args) -> int:
    path = pathlib.Path(args.run_dir)
    if not path.is_dir():
        print(f"not a directory: {path}", file=sys.stderr)
        return 3
    dirs = _run_dirs(path)
    if not dirs:
        print(f"no run artifacts under {path}", file=sys.stderr)
        return 3
    all_ok = True
    for run_dir in dirs:
        try:
            artifacts = load_run_artifacts(run_dir)
        except MissingArtifacts as exc:
            print(str(exc), file=sys.stderr)
            return 3
        audit = consistency_report(artifacts)
        for line in audit.lines():
            print(f"{run_dir.name}: {line}")
        all_ok = all_ok and audit.ok
    return 0 if all_ok else 1


def cmd_parse_check(args) -> int:
    path = pathlib.Path(args.file)
    try:
        text = path.read_text()
    except FileNotFoundError:
        print(f"file not found: {path}", file=sys.stderr)
        return 3
    try:
        ds = parse_libsvm(text)
    except ParseError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return 1
    print(f"{path}: ok ({len(ds.points)} points, {ds.n_features} features, "
          f"{ds.n_classes} classes)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orf", description="streaming random forest experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a configured experiment")
    p_train.add_argument("--config", required=True, help="experiment JSON")
    p_train.add_argument("--seed", type=int, help="override master seed")
    p_train.add_argument("--out", help="override output directory")
    p_train.add_argument("--threads", type=int,
                         help="tree-update worker threads "
                              "(default: ORF_THREADS or 1)")
    p_train.set_defaults(func=cmd_train)

    p_diag = sub.add_parser("diagnose", help="audit run artifacts")
    p_diag.add_argument("run_dir", help="run directory (or parent of run*/)")
    p_diag.set_defaults(func=cmd_diagnose)

    p_parse = sub.add_parser("parse-check", help="validate a LIBSVM file")
    p_parse.add_argument("file")
    p_parse.set_defaults(func=cmd_parse_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
