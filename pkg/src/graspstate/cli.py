"""Command-line front end.

Verbs: generate (synthesize a dataset), train (fit one model), eval
(score a trained model on a split), ablate (train per sensor subset),
taxonomy (per-trial failure counters). Every command writes
deterministic files: rerunning with the same arguments reproduces the
same bytes.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from .core import GraspState
from .evaluation import (
    COMBO_NAMES,
    DEFAULT_SLACK,
    SINGLE_SENSOR_NAMES,
    ablation_run,
    failure_taxonomy,
    majority_filter,
)
from .features import CAMERA_METHODS, SensorMask
from .forest import RfHyperparams
from .io import (
    REPORT_FORMAT,
    load_bundle,
    load_dataset,
    save_bundle,
    save_dataset,
    write_ablation_csv,
    write_config,
    write_confusion_csv,
    write_report_csv,
    write_stream_csv,
    write_taxonomy_csv,
)
from .lstm import LstmHyperparams
from .pipeline import FAMILIES, train_bundle
from .synth import generate_dataset

_SPLITS = ("train", "val", "test")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graspstate",
        description="Grasp-state classification experiments on synthetic picking trials.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a labeled trial dataset")
    g.add_argument("--out", required=True, help="dataset directory to create")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--train", type=int, required=True, help="trials in the train split")
    g.add_argument("--val", type=int, required=True)
    g.add_argument("--test", type=int, required=True)

    t = sub.add_parser("train", help="fit one classifier on the train split")
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--out", required=True, help="model directory to create")
    t.add_argument("--model", choices=FAMILIES, default="rf")
    t.add_argument(
        "--sensors",
        default="imu,ir,tension,tactile,camera",
        help="comma-separated channels",
    )
    t.add_argument("--camera", choices=CAMERA_METHODS, default="com")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--trees", type=int, default=None, help="forest size override")
    t.add_argument("--epochs", type=int, default=None, help="recurrent epochs override")
    t.add_argument("--hidden", type=int, default=None, help="recurrent width override")
    t.add_argument("--stride", type=int, default=None, help="training window stride")

    e = sub.add_parser("eval", help="score a trained model on one split")
    e.add_argument("--data", required=True)
    e.add_argument("--model-dir", required=True, dest="model_dir")
    e.add_argument("--out", required=True, help="report directory to create")
    e.add_argument("--split", choices=_SPLITS, default="test")
    e.add_argument("--filter", choices=("on", "off", "auto"), default="auto")
    e.add_argument("--slack", type=int, default=DEFAULT_SLACK)

    a = sub.add_parser("ablate", help="train and score one model per sensor subset")
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--model", choices=FAMILIES, default="rf")
    a.add_argument("--set", choices=("singles", "combos"), default="singles",
                   dest="subset_set")
    a.add_argument("--split", choices=_SPLITS, default="test")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--trees", type=int, default=None)
    a.add_argument("--epochs", type=int, default=None)
    a.add_argument("--hidden", type=int, default=None)
    a.add_argument("--stride", type=int, default=None)

    x = sub.add_parser("taxonomy", help="per-trial failure counters for one split")
    x.add_argument("--data", required=True)
    x.add_argument("--model-dir", required=True, dest="model_dir")
    x.add_argument("--out", required=True)
    x.add_argument("--split", choices=_SPLITS, default="test")
    x.add_argument("--filter", choices=("on", "off", "auto"), default="auto")
    x.add_argument("--slack", type=int, default=DEFAULT_SLACK)
    return parser


def _split_counts(name: str, total: int) -> tuple:
    if total < 2:
        raise ValueError(
            f"split {name!r} needs at least 2 trials (one per scenario), got {total}"
        )
    return ((total + 1) // 2, total // 2)


def cmd_generate(args) -> int:
    counts = {
        "train": _split_counts("train", args.train),
        "val": _split_counts("val", args.val),
        "test": _split_counts("test", args.test),
    }
    dataset = generate_dataset(counts, base_seed=args.seed)
    save_dataset(dataset, args.out, base_seed=args.seed, counts=counts)
    total = args.train + args.val + args.test
    print(f"wrote {total} trials to {args.out}")
    return 0


def _hyperparams(args):
    rf_hp = None
    lstm_hp = None
    if args.model == "rf":
        rf_hp = RfHyperparams(
            n_estimators=args.trees if args.trees is not None else 100,
            seed=args.seed,
        )
    else:
        lstm_hp = LstmHyperparams(
            epochs=args.epochs if args.epochs is not None else 30,
            hidden_size=args.hidden if args.hidden is not None else 64,
            seed=args.seed,
        )
    return rf_hp, lstm_hp


def cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    names = [s for s in args.sensors.split(",") if s.strip()]
    mask = SensorMask.from_names(names, camera_method=args.camera)
    rf_hp, lstm_hp = _hyperparams(args)
    bundle = train_bundle(
        dataset.train,
        args.model,
        mask,
        rf_hp=rf_hp,
        lstm_hp=lstm_hp,
        train_stride=args.stride,
    )
    save_bundle(bundle, args.out, extra_config={"train_stride": args.stride})
    print(f"trained {args.model} on {len(dataset.train)} trials -> {args.out}")
    return 0


def _resolve_filter(flag: str) -> Optional[bool]:
    return {"on": True, "off": False, "auto": None}[flag]


def cmd_eval(args) -> int:
    bundle = load_bundle(args.model_dir)
    dataset = load_dataset(args.data)
    trials = dataset.split(args.split)
    streams: list = []
    report = bundle.evaluate(
        trials,
        filter_on=_resolve_filter(args.filter),
        slack=args.slack,
        streams_out=streams,
    )
    os.makedirs(os.path.join(args.out, "streams"), exist_ok=True)
    write_report_csv(report, os.path.join(args.out, "report.csv"))
    write_confusion_csv(report.confusion, os.path.join(args.out, "confusion.csv"))
    by_id = {tr.trial_id: tr for tr in trials}
    for stream in streams:
        write_stream_csv(
            by_id[stream.trial_id],
            stream,
            os.path.join(args.out, "streams", f"{stream.trial_id}.csv"),
        )
    write_config(
        os.path.join(args.out, "config.json"),
        {
            "format": REPORT_FORMAT,
            "family": bundle.family,
            "mask": bundle.mask.label(),
            "split": args.split,
            "filtered": report.filtered,
            "slack": report.slack,
            "n_windows": int(report.n_windows),
            "trial_counts": report.trial_counts,
        },
    )
    f1s = " ".join(
        f"{s.key}={report.f1(s):.3f}" for s in GraspState
    )
    print(f"evaluated {len(trials)} {args.split} trials: {f1s}")
    return 0


def cmd_ablate(args) -> int:
    dataset = load_dataset(args.data)
    subsets = SINGLE_SENSOR_NAMES if args.subset_set == "singles" else COMBO_NAMES
    rf_hp, lstm_hp = _hyperparams(args)
    rows = ablation_run(
        dataset,
        args.model,
        subsets,
        eval_split=args.split,
        rf_hp=rf_hp,
        lstm_hp=lstm_hp,
        train_stride=args.stride,
    )
    os.makedirs(args.out, exist_ok=True)
    write_ablation_csv(rows, os.path.join(args.out, "ablation.csv"))
    write_config(
        os.path.join(args.out, "config.json"),
        {
            "format": REPORT_FORMAT,
            "family": args.model,
            "set": args.subset_set,
            "subsets": list(subsets),
            "split": args.split,
            "seed": args.seed,
        },
    )
    print(f"ablated {len(rows)} subsets -> {args.out}")
    return 0


def cmd_taxonomy(args) -> int:
    bundle = load_bundle(args.model_dir)
    dataset = load_dataset(args.data)
    trials = sorted(dataset.split(args.split), key=lambda tr: tr.trial_id)
    filter_on = _resolve_filter(args.filter)
    if filter_on is None:
        filter_on = bundle.family == "lstm"
    rows = []
    for trial in trials:
        stream = bundle.classify(trial)
        if filter_on:
            stream = majority_filter(stream)
        rows.append(
            (trial.trial_id, trial.scenario, failure_taxonomy(trial, stream, args.slack))
        )
    os.makedirs(args.out, exist_ok=True)
    write_taxonomy_csv(rows, os.path.join(args.out, "taxonomy.csv"))
    write_config(
        os.path.join(args.out, "config.json"),
        {
            "format": REPORT_FORMAT,
            "family": bundle.family,
            "mask": bundle.mask.label(),
            "split": args.split,
            "filtered": filter_on,
            "slack": args.slack,
        },
    )
    total = sum(sum(c.values()) for _, _, c in rows)
    print(f"taxonomy over {len(rows)} trials: {total} failure flags -> {args.out}")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "taxonomy": cmd_taxonomy,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
