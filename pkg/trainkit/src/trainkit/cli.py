"""Training utility commands: validate, train, export, eval."""

from __future__ import annotations

import argparse
import json
import sys

from .dataset import DatasetError, load_manifest, validate_dataset
from .evaluate import evaluate_model
from .export import ExportError, export_model
from .train import AugmentationConfig, TrainConfig, train


def cmd_validate(args) -> int:
    report = validate_dataset(args.root)
    print(json.dumps(report.to_dict(), indent=2))
    if args.manifest:
        manifest = load_manifest(args.manifest)
        ok = report.matches_manifest(manifest)
        print(f"manifest match: {'yes' if ok else 'NO'}")
        if not ok:
            return 1
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig(
        stage=args.stage,
        epochs=args.epochs,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        dropout=args.dropout,
        augmentation=None if args.no_augment else AugmentationConfig(),
        toy_scale=args.toy,
        seed=args.seed,
    )
    result = train(cfg, args.root, args.out, init_checkpoint=args.init)
    print(json.dumps(result.to_dict(), indent=2))
    return 0


def cmd_export(args) -> int:
    report = export_model(args.checkpoint, args.out, probe_dir=args.probes)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_eval(args) -> int:
    report = evaluate_model(args.checkpoint, args.validation_dir)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trainkit",
        description="Train, evaluate, and export the drowsiness classifier",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check dataset layout and counts")
    p.add_argument("root")
    p.add_argument("--manifest", help="JSON of expected counts to compare against")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train one stage")
    p.add_argument("root")
    p.add_argument("--stage", choices=("head", "finetune"), required=True)
    p.add_argument("--out", required=True, help="output directory for checkpoint/history")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=("rmsprop", "adam", "nadam"))
    p.add_argument("--dropout", type=float, default=0.6)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--toy", action="store_true", help="cap work for smoke runs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", help="checkpoint to continue from (finetune stage)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export", help="export a checkpoint to the interchange format")
    p.add_argument("checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--probes", help="directory of probe images for the parity gate")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval", help="confusion matrix and accuracy on a validation dir")
    p.add_argument("checkpoint")
    p.add_argument("validation_dir")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ExportError, ValueError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
