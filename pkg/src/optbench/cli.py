"""Command-line interface.

    optbench train --model vgg-lite --optimizer adam [options]
    optbench report --runs RUNS_DIR [--csv DIR] [--metric FIELD]
    optbench selftest

Exit codes: 0 success, 1 configuration error (including bad arguments),
2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DataError, NumericsError, OptbenchError
from .harness import RunConfig, best_score, default_run_path, run_training
from .models import MODEL_NAMES
from .optim import OPTIMIZER_NAMES
from .report import report as build_report
from .selftest import run_selftest


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="optbench",
                     description="CPU optimizer benchmark harness")
    parser.add_argument("--version", action="version",
                        version=f"optbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one training configuration")
    train.add_argument("--model", required=True, choices=MODEL_NAMES)
    train.add_argument("--optimizer", required=True,
                       choices=OPTIMIZER_NAMES)
    train.add_argument("--lr", type=float, default=0.0005)
    train.add_argument("--momentum", type=float, default=0.9)
    train.add_argument("--beta1", type=float, default=0.9)
    train.add_argument("--beta2", type=float, default=0.999)
    train.add_argument("--eps", type=float, default=1e-8)
    train.add_argument("--padam-p", type=float, default=0.125)
    train.add_argument("--weight-decay", type=float, default=0.0)
    train.add_argument("--batch-size", type=int, default=64)
    train.add_argument("--epochs", type=int, default=30)
    train.add_argument("--seed", type=int, action="append",
                       help="u64 run seed; repeat for multiple seeds")
    train.add_argument("--data", default="synthetic",
                       help="directory of EMNIST IDX files, or 'synthetic'")
    train.add_argument("--out", default="runs",
                       help="directory for run record files")
    train.add_argument("--val-fraction", type=float, default=1.0 / 6.0)
    train.add_argument("--synthetic-classes", type=int, default=10)
    train.add_argument("--synthetic-train-per-class", type=int, default=200)
    train.add_argument("--synthetic-test-per-class", type=int, default=50)
    train.add_argument("--lrn", action="store_true",
                       help="enable local response norm (alexnet only)")

    rep = sub.add_parser("report", help="summarize run records")
    rep.add_argument("--runs", required=True,
                     help="directory containing *.jsonl run records")
    rep.add_argument("--csv", default=None,
                     help="also write per-run curve CSVs to this directory")
    rep.add_argument("--metric", default="test_f1",
                     choices=("test_f1", "val_f1"),
                     help="which metric stream the table ranks")

    sub.add_parser("selftest",
                   help="run gradient checks and optimizer oracles")
    return parser


def _cmd_train(args) -> int:
    seeds = args.seed if args.seed else [0]
    for seed in seeds:
        cfg = RunConfig(
            model=args.model, optimizer=args.optimizer, lr=args.lr,
            momentum=args.momentum, beta1=args.beta1, beta2=args.beta2,
            eps=args.eps, padam_p=args.padam_p,
            weight_decay=args.weight_decay, batch_size=args.batch_size,
            epochs=args.epochs, seed=seed, data=args.data, out_dir=args.out,
            val_fraction=args.val_fraction,
            synthetic_classes=args.synthetic_classes,
            synthetic_train_per_class=args.synthetic_train_per_class,
            synthetic_test_per_class=args.synthetic_test_per_class,
            lrn=args.lrn)
        record = run_training(cfg)
        path = default_run_path(cfg)
        print(f"wrote {path} ({len(record.rows)} epochs)")
        if record.rows:
            field = ("test_f1" if record.rows[0]["test_f1"] is not None
                     else "val_f1")
            value, epoch = best_score(record, field)
            print(f"  best {field.replace('_', ' ')}: {value:.5f} "
                  f"(epoch {epoch})")
    return 0


def _cmd_report(args) -> int:
    runs_dir = Path(args.runs)
    if not runs_dir.is_dir():
        raise DataError(f"{runs_dir}: not a directory")
    run_files = sorted(runs_dir.glob("*.jsonl"))
    if not run_files:
        raise DataError(f"{runs_dir}: no *.jsonl run records found")
    text, warnings = build_report(run_files, metric_field=args.metric,
                                  csv_dir=args.csv)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(text, end="")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "report":
            return _cmd_report(args)
        return 0 if run_selftest() else 3
    except ConfigError as err:
        print(f"optbench: configuration error: {err}", file=sys.stderr)
        return 1
    except NumericsError as err:
        print(f"optbench: numerical failure: {err}", file=sys.stderr)
        return 3
    except DataError as err:
        print(f"optbench: data error: {err}", file=sys.stderr)
        return 2
    except OptbenchError as err:
        print(f"optbench: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
