"""``oaae`` command line: train, score, eval, check, report.

Exit codes: 0 success, 2 configuration error, 3 IO/parse error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import checks, data, evaluation, scoring, training
from .linalg import DecompositionError
from .nn import CheckpointError, ConfigurationError, load_checkpoint

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
DATASETS = ("synthetic", "mnist", "fashion-mnist", "cifar10")

# flag name -> TrainConfig field
OVERRIDES = {
    "epochs": "epochs", "batch_size": "batch_size", "lr": "learning_rate", "noise_std": "noise_std",
    "generator_period": "generator_period", "seed": "seed", "latent_dim": "latent_dim",
    "lambda_recon": "lambda_recon", "lambda_adv_enc": "lambda_adv_enc", "lambda_adv_dec": "lambda_adv_dec",
    "lambda_ole": "lambda_ole", "lambda_cls": "lambda_cls",
}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _add_dataset_flags(p):
    p.add_argument("--dataset", choices=DATASETS, default="synthetic")
    p.add_argument("--data-dir", default=None, help="dataset root (default: $OAAE_DATA_DIR or ./data)")
    p.add_argument("--synthetic-classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=500)
    p.add_argument("--test-per-class", type=int, default=None)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--synthetic-noise", type=float, default=0.3)


def _add_train_flags(p):
    p.add_argument("--config", default=None, help="JSON file with TrainConfig fields")
    for flag, field_name in OVERRIDES.items():
        kind = int if field_name in ("epochs", "batch_size", "generator_period", "seed", "latent_dim") else float
        p.add_argument("--" + flag.replace("_", "-"), dest=flag, type=kind, default=None)


def _synthetic_params(args) -> dict:
    return {"num_classes": args.synthetic_classes, "per_class": args.per_class,
            "side": args.side, "noise_std": args.synthetic_noise}


def _load(args, split, seed=None):
    if args.dataset == "synthetic":
        params = _synthetic_params(args)
        if seed is None:
            seed = args.seed if getattr(args, "seed", None) is not None else 0
        params["seed"] = seed
        if split == "test" and args.test_per_class is not None:
            params["per_class"] = args.test_per_class
        return data.load_dataset("synthetic", split, **params)
    return data.load_dataset(args.dataset, split, args.data_dir)


def _train_config(args) -> training.TrainConfig:
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise CliError(EXIT_CONFIG, f"config file not found: {path}")
        try:
            cfg = training.TrainConfig.from_json(path)
        except (ValueError, TypeError) as exc:
            raise CliError(EXIT_CONFIG, f"invalid config {path}: {exc}") from None
    else:
        cfg = training.TrainConfig()
    updates = {f: getattr(args, flag) for flag, f in OVERRIDES.items() if getattr(args, flag) is not None}
    try:
        return replace(cfg, **updates)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def cmd_train(args) -> int:
    cfg = _train_config(args)
    dataset = _load(args, "train", cfg.seed)
    if args.novelty_class is not None:
        dataset = dataset.without_class(args.novelty_class)
    out = Path(args.out)
    loss_log = Path(args.loss_log) if args.loss_log else out.with_suffix(".losses.csv")
    _, report = training.train(dataset, cfg, checkpoint_path=out, loss_log_path=loss_log,
                               checkpoint_every_epoch=args.checkpoint_every_epoch)
    print(f"wrote {out} and {loss_log} ({len(report.epochs)} epochs)")
    return EXIT_OK


def cmd_score(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
    except CheckpointError as exc:
        raise CliError(EXIT_IO, str(exc)) from None
    dataset = _load(args, args.split)
    is_novel = None if args.novelty_class is None else dataset.labels == args.novelty_class
    scored = scoring.score_batch(model, dataset.images, args.kind, is_novel)
    scoring.write_scores_csv(scored, args.out or sys.stdout)
    if is_novel is not None and 0 < is_novel.sum() < len(is_novel):
        auc = evaluation.auroc([s.novelty_score for s in scored], is_novel)
        print(f"AUROC={auc:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _train_config(args)
    seed = cfg.seed
    num_classes = args.synthetic_classes if args.dataset == "synthetic" else 10
    if args.all_classes:
        classes = list(range(num_classes))
    elif args.novelty_class is not None:
        classes = [args.novelty_class]
    else:
        raise CliError(EXIT_CONFIG, "eval needs --novelty-class K or --all-classes")
    synthetic = _synthetic_params(args) if args.dataset == "synthetic" else {}
    try:
        spec = evaluation.ProtocolSpec(args.dataset, classes[0], num_classes, seed, args.data_dir,
                                       synthetic, args.test_per_class, args.kind)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    if args.repeats < 1:
        raise CliError(EXIT_CONFIG, "--repeats must be >= 1")
    report = evaluation.run_protocol(spec, cfg, classes, args.checkpoint_dir, method=args.method,
                                     repeats=args.repeats)
    if args.out_csv:
        report.write_csv(args.out_csv)
        report.write_json(Path(args.out_csv).with_suffix(".json"))
    table = report.table()
    if args.out_table:
        Path(args.out_table).write_text(table + "\n")
    print(table)
    for cell in report.cells:
        if cell.error:
            print(f"cell {cell.novelty_class} failed: {cell.error}", file=sys.stderr)
    return EXIT_NUMERIC if any(c.error for c in report.cells) else EXIT_OK


def cmd_check(args) -> int:
    results = checks.run_checks(args.seed)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return EXIT_NUMERIC
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_report(args) -> int:
    rows, columns = [], set()
    for path in args.reports:
        r, c = evaluation.read_report_csv(path)
        rows += r
        columns.update(c)
    print(evaluation.format_table(rows, sorted(columns)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oaae", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on the normal classes")
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.add_argument("--novelty-class", type=int, default=None, help="class removed from training")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-log", default=None, help="per-epoch loss CSV (default: <out>.losses.csv)")
    p.add_argument("--checkpoint-every-epoch", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score images with a trained checkpoint")
    _add_dataset_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--kind", choices=scoring.SCORE_KINDS, default="angle")
    p.add_argument("--novelty-class", type=int, default=None, help="fills the is_novel column")
    p.add_argument("--seed", type=int, default=None, help="synthetic data seed")
    p.add_argument("--out", default=None, help="score CSV (default: stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="run the held-out-class AUROC protocol")
    _add_dataset_flags(p)
    _add_train_flags(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--novelty-class", type=int, default=None)
    group.add_argument("--all-classes", action="store_true")
    p.add_argument("--kind", choices=scoring.SCORE_KINDS, default="angle")
    p.add_argument("--method", default="OAAE")
    p.add_argument("--repeats", type=int, default=1, help="seeds per cell, averaged")
    p.add_argument("--checkpoint-dir", default=None)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-table", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="run the numerical self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("report", help="render report CSVs as an aligned table")
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigurationError, ValueError) as exc:
        if isinstance(exc, (data.ParseError, CheckpointError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        if isinstance(exc, (scoring.DegenerateLatentError, evaluation.UndefinedAurocError)):
            print(f"numerical error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (training.TrainingError, DecompositionError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
