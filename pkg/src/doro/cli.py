"""Command-line interface: train / eval / verify / synth / trim.

All randomness flows from --seed, so reruns with identical flags produce
byte-identical outputs.  Metrics are emitted as line-delimited JSON records
(one per epoch plus one summary record per run).

Exit codes: 0 success, 1 verification failure, 2 flag/validation error,
3 training divergence.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import data, models, trainer
from .trainer import (SELECTION_STRATEGIES, TrainConfig, TrainingDivergence,
                      TrainRun)
from .verify import run_all

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3

OUT_DIR_ENV = "DORO_OUT_DIR"


class CliError(Exception):
    pass


def _out_path(path: str) -> Path:
    base = os.environ.get(OUT_DIR_ENV)
    p = Path(path)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _load_dataset(args) -> data.TabularDataset:
    if getattr(args, "synth_spec", None):
        if args.synth_spec != "default":
            raise CliError(f"unknown synth spec {args.synth_spec!r}")
        return data.synth_subpop(data.default_spec(seed=args.seed))
    if not args.data or not args.domains:
        raise CliError("either --synth-spec or both --data and --domains are required")
    return data.load_csv(args.data, args.domains)


def _parse_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise CliError(f"could not parse numeric list {text!r}") from None


def _run_one(dataset, eval_dataset, config: TrainConfig):
    run = trainer.train(dataset, config, eval_dataset)
    records = [r.to_dict() for r in run.history]
    summary = {
        "type": "summary",
        "method": config.method,
        "alpha": config.alpha,
        "eps": config.eps,
        "seed": config.seed,
        "selected_epoch": {},
        "final": {},
    }
    for strategy in SELECTION_STRATEGIES:
        epoch = trainer.model_select(run, eval_dataset, strategy,
                                     alpha=config.alpha, eps=config.eps)
        record = trainer.evaluate(run.checkpoints[epoch], eval_dataset)
        summary["selected_epoch"][strategy] = epoch
        summary["final"][strategy] = {
            "avg_accuracy": record.avg_accuracy,
            "worst_accuracy": record.worst_accuracy,
        }
    return run, records, summary


def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    train_set, eval_set = data.split(dataset, args.train_fraction, args.seed)
    alphas = _parse_list(args.alpha)
    epss = _parse_list(args.eps)
    combos = [(a, e) for a in alphas for e in epss]
    sweep = len(combos) > 1
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    jobs = []
    for alpha, eps in combos:
        config = TrainConfig(
            method=args.method, alpha=alpha, eps=eps, epochs=args.epochs,
            batch_size=args.batch_size, learning_rate=args.lr,
            momentum=args.momentum, weight_decay=args.weight_decay,
            seed=args.seed, architecture=args.arch, hidden=args.hidden,
        )
        path = (out.with_name(f"{out.stem}_alpha{alpha:g}_eps{eps:g}{out.suffix}")
                if sweep else out)
        jobs.append((config, path))

    def execute(config):
        return _run_one(train_set, eval_set, config)

    if args.jobs > 1 and sweep:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_worker,
                                    [(train_set, eval_set, c) for c, _ in jobs]))
    else:
        results = [execute(config) for config, _ in jobs]

    for (config, path), (run, records, summary) in zip(jobs, results):
        with open(path, "w") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
            fh.write(json.dumps(summary) + "\n")
        ckpt_dir = path.parent / f"{path.stem}_checkpoints"
        ckpt_dir.mkdir(exist_ok=True)
        for epoch, params in enumerate(run.checkpoints):
            models.save_checkpoint(params, ckpt_dir / f"epoch{epoch:04d}.npz")
    return EXIT_OK


def _sweep_worker(payload):
    train_set, eval_set, config = payload
    return _run_one(train_set, eval_set, config)


def cmd_eval(args) -> int:
    dataset = _load_dataset(args)
    params = models.load_checkpoint(args.checkpoint)
    record = trainer.evaluate(params, dataset)
    print(json.dumps(record.to_dict()))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_all(trials=args.trials, seed=args.seed, corrupt=args.corrupt)
    width = max(len(r.name) for r in results)
    failed = False
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{result.name:<{width}}  {status}  ({result.trials} trials)")
        if not result.passed:
            failed = True
            print(f"  counterexample: {result.counterexample}")
    return EXIT_VERIFY_FAIL if failed else EXIT_OK


def cmd_synth(args) -> int:
    spec = data.SyntheticSpec(
        n=args.n, minority_fraction=args.minority_fraction,
        label_flip_fraction=args.label_flip,
        outlier_fraction=args.outlier_fraction, seed=args.seed,
    )
    dataset = data.synth_subpop(spec)
    data.save_csv(dataset, _out_path(args.out_features), _out_path(args.out_domains))
    if args.out_metadata:
        data.save_metadata(dataset, _out_path(args.out_metadata))
    return EXIT_OK


def cmd_trim(args) -> int:
    dataset = data.load_csv(args.data, args.domains)
    config = TrainConfig(
        method="erm", epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.lr, seed=args.seed, architecture=args.arch,
        hidden=args.hidden,
    )
    try:
        trimmed, removed = trainer.iterative_trim(
            dataset, args.rounds, args.drop, config
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    data.save_csv(trimmed, _out_path(args.out_features), _out_path(args.out_domains))
    with open(_out_path(args.removed_out), "w") as fh:
        json.dump({"removed_indices": removed}, fh)
        fh.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doro",
        description="DRO/DORO training, evaluation and verification for "
                    "tabular subpopulation-shift tasks",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_data_flags(p):
        p.add_argument("--data", help="features CSV (feature columns + label)")
        p.add_argument("--domains", help="domains CSV (0/1 column per domain)")

    def add_model_flags(p):
        p.add_argument("--arch", default="linear", choices=["linear", "mlp"])
        p.add_argument("--hidden", type=int, default=16)
        p.add_argument("--batch-size", type=int, default=64)
        p.add_argument("--lr", type=float, default=0.1)
        p.add_argument("--epochs", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train one model (or an alpha/eps sweep)")
    add_data_flags(p)
    p.add_argument("--synth-spec", help="'default' to use the builtin synthetic dataset")
    p.add_argument("--method", required=True, choices=trainer.METHODS)
    p.add_argument("--alpha", default="0.5", help="comma-separated list")
    p.add_argument("--eps", default="0", help="comma-separated list")
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="metrics JSONL output path")
    add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    add_data_flags(p)
    p.add_argument("--synth-spec")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run the randomized self-check suite")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("synth", help="generate a synthetic dataset as CSV")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--minority-fraction", type=float, default=0.1)
    p.add_argument("--label-flip", type=float, default=0.0)
    p.add_argument("--outlier-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-features", required=True)
    p.add_argument("--out-domains", required=True)
    p.add_argument("--out-metadata")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("trim", help="iterative highest-loss sample removal")
    add_data_flags(p)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--drop", type=int, required=True)
    p.add_argument("--out-features", required=True)
    p.add_argument("--out-domains", required=True)
    p.add_argument("--removed-out", default="removed.json")
    add_model_flags(p)
    p.set_defaults(func=cmd_trim)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
