#!/usr/bin/env python3
"""Desk-scale end-to-end run: synthesize a dataset and train both model
families on the full sensor suite, reporting window-level metrics plus
per-trial failure counters on the held-out test split.

Run from the repo root:

    python3 scripts/run_desk_experiment.py --out runs/desk
"""

import argparse
import sys
import time
from pathlib import Path

from graspstate.core import STATES
from graspstate.evaluation import mask_from_label
from graspstate.io import (
    save_dataset,
    write_confusion_csv,
    write_report_csv,
)
from graspstate.pipeline import train_bundle
from graspstate.synth import generate_dataset

FULL_SUITE = "imu+ir+tension+tactile+camera(com)"


def parse_args(argv):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=20240817)
    p.add_argument("--train", type=int, default=60)
    p.add_argument("--val", type=int, default=20)
    p.add_argument("--test", type=int, default=20)
    p.add_argument("--families", default="rf,lstm")
    return p.parse_args(argv)


def split_counts(total):
    if total < 2:
        raise SystemExit(f"need at least 2 trials per split, got {total}")
    return ((total + 1) // 2, total // 2)


def show(name, report):
    print(f"\n{name}: {report.n_windows} windows, "
          f"filter={'on' if report.filtered else 'off'}")
    for state in STATES:
        p, r, f1 = report.per_class[int(state)]
        print(f"  {state.key:16s} precision={p:.4f} recall={r:.4f} f1={f1:.4f}")
    worst = min(float(report.per_class[int(s), 2]) for s in STATES)
    print(f"  worst per-class f1: {worst:.4f}")
    print("  counters:", dict(report.counters))


def main(argv=None):
    args = parse_args(argv if argv is not None else sys.argv[1:])
    counts = {
        "train": split_counts(args.train),
        "val": split_counts(args.val),
        "test": split_counts(args.test),
    }
    t0 = time.perf_counter()
    dataset = generate_dataset(counts, args.seed)
    print(f"generated {sum(len(split) for _, split in dataset.splits())} trials "
          f"in {time.perf_counter() - t0:.1f}s (seed {args.seed})")
    args.out.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, args.out / "data", args.seed, counts)

    mask = mask_from_label(FULL_SUITE)
    for family in args.families.split(","):
        family = family.strip()
        t1 = time.perf_counter()
        bundle = train_bundle(dataset.train, family, mask)
        report = bundle.evaluate(dataset.test)
        print(f"\n== {family} == train+eval {time.perf_counter() - t1:.1f}s")
        show(family, report)
        write_report_csv(report, args.out / f"{family}_report.csv")
        write_confusion_csv(report.confusion, args.out / f"{family}_confusion.csv")
    print(f"\nartifacts under {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
