#!/usr/bin/env python3
"""Reference-data ablation on synthetic data.

Builds a long synthetic target database, subsets it to several
durations with multiple seeds, converts held-out source utterances
against every subset and writes per-cell rows plus a per-duration
summary with 95% confidence intervals.

Run:  python scripts/run_duration_ablation.py --out results/ablation --seed 0
"""

from __future__ import annotations

import argparse
import collections
import csv
from pathlib import Path

import numpy as np

from knnmorph import (
    SynthConfig,
    ablation_run,
    aggregate_ci,
    database_from_sequences,
    database_duration,
    generate,
    write_ablation_csv,
)
from knnmorph.evaluation import PROXY_METRIC


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, required=True, help="generation seed")
    parser.add_argument(
        "--durations", default="10,30,60,120,300", help="subset durations in seconds"
    )
    parser.add_argument(
        "--subset-seeds", default="0,1,2,3,4,5,6,7", help="subset shuffle seeds"
    )
    parser.add_argument("--k", type=int, default=4)
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0)
    args = parser.parse_args()

    durations = [float(x) for x in args.durations.split(",")]
    seeds = [int(x) for x in args.subset_seeds.split(",")]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    config = SynthConfig(
        n_phones=192,
        dim=64,
        n_speakers=2,
        frames_per_utterance=500,
        utterances_per_speaker=60,
        noise_scale=0.05,
        seed=args.seed,
    )
    sequences, _ = generate(config)
    db = database_from_sequences(sequences["spk1"], "spk1")
    sources = sequences["spk0"][:6]
    print(
        f"target database: {db.num_units} units, "
        f"{database_duration(db):.0f} s; {len(sources)} source utterances"
    )

    rows = ablation_run(sources, db, durations, seeds, args.k, args.lam)
    write_ablation_csv(rows, out_dir / "ablation_rows.csv")

    by_duration = collections.defaultdict(list)
    for row in rows:
        if row.metric_name == PROXY_METRIC:
            by_duration[row.duration_seconds].append(row.value)
    with open(out_dir / "ablation_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["duration_seconds", "mean_proxy_secs", "ci95_halfwidth", "n"])
        print(f"{'duration':>10s}  {'proxy secs':>22s}")
        for duration in durations:
            ci = aggregate_ci(by_duration[duration])
            writer.writerow([repr(duration), repr(ci.mean), repr(ci.halfwidth), ci.n])
            print(f"{duration:>8.0f} s  {ci.mean:.4f} +/- {ci.halfwidth:.4f}")
    print(f"wrote {out_dir / 'ablation_rows.csv'}")
    print(f"wrote {out_dir / 'ablation_summary.csv'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
