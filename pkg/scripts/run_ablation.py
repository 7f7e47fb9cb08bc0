#!/usr/bin/env python3
"""Sensor ablation study: train one model per sensor subset and compare
per-class F1 on the test split.

Run from the repo root:

    python3 scripts/run_ablation.py --out runs/ablation --set singles
"""

import argparse
import sys
import time
from pathlib import Path

from graspstate.core import STATES
from graspstate.evaluation import COMBO_NAMES, SINGLE_SENSOR_NAMES, ablation_run
from graspstate.io import write_ablation_csv
from graspstate.synth import generate_dataset


def parse_args(argv):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=20240817)
    p.add_argument("--family", default="rf", choices=("rf", "lstm"))
    p.add_argument("--set", dest="subset_set", default="singles",
                   choices=("singles", "combos"))
    p.add_argument("--train", type=int, default=60)
    p.add_argument("--val", type=int, default=20)
    p.add_argument("--test", type=int, default=20)
    return p.parse_args(argv)


def split_counts(total):
    if total < 2:
        raise SystemExit(f"need at least 2 trials per split, got {total}")
    return ((total + 1) // 2, total // 2)


def main(argv=None):
    args = parse_args(argv if argv is not None else sys.argv[1:])
    counts = {
        "train": split_counts(args.train),
        "val": split_counts(args.val),
        "test": split_counts(args.test),
    }
    dataset = generate_dataset(counts, args.seed)
    subsets = SINGLE_SENSOR_NAMES if args.subset_set == "singles" else COMBO_NAMES
    t0 = time.perf_counter()
    rows = ablation_run(dataset, args.family, subsets)
    print(f"{len(rows)} subsets in {time.perf_counter() - t0:.1f}s "
          f"({args.family}, seed {args.seed})\n")
    header = " ".join(f"{s.key:>16s}" for s in STATES)
    print(f"{'subset':32s}{header}")
    for label, f1s in rows:
        cells = " ".join(f"{float(v):16.4f}" for v in f1s)
        print(f"{label:32s}{cells}")
    args.out.mkdir(parents=True, exist_ok=True)
    write_ablation_csv(rows, args.out / "ablation.csv")
    print(f"\nwrote {args.out / 'ablation.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
