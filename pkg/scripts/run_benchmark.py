"""Multi-seed comparison on the 50%-symmetric-noise blobs benchmark.

Example::

    python scripts/run_benchmark.py --seeds 0 1 2 3 4 --methods dpc ce_baseline small_loss_baseline
"""

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from dpc.config import load_spec
from dpc.experiment import prepare_data
from dpc.training import RandomStreams, fit

ROOT = Path(__file__).resolve().parents[1]


def run(config, method, seed, overrides):
    spec = load_spec(config, [f'method="{method}"', f"train.seed={seed}", *overrides])
    streams = RandomStreams(seed)
    train, test = prepare_data(spec, streams)
    start = time.perf_counter()
    last = fit(train, spec.train, method, test=test, streams=streams).history[-1]
    return {
        "method": method,
        "seed": seed,
        "test_acc": last.test_acc,
        "ece": last.ece,
        "selection_auc": last.selection_auc,
        "seconds": time.perf_counter() - start,
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=ROOT / "configs" / "symm50.toml")
    p.add_argument("--methods", nargs="+", default=["dpc", "ce_baseline"])
    p.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2, 3, 4])
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--out", help="optional CSV with one row per run")
    args = p.parse_args(argv)

    rows = []
    for seed in args.seeds:
        for method in args.methods:
            row = run(args.config, method, seed, args.set)
            rows.append(row)
            print(
                f"{method:<20} seed={seed} acc={row['test_acc']:.4f} ece={row['ece']:.4f} "
                f"auc={row['selection_auc']:.4f} ({row['seconds']:.0f}s)",
                flush=True,
            )
    print()
    print(f"{'method':<20} {'acc':>15} {'ece':>15} {'auc':>15}")
    for method in args.methods:
        sel = [r for r in rows if r["method"] == method]
        cells = []
        for key in ("test_acc", "ece", "selection_auc"):
            v = np.array([r[key] for r in sel])
            cells.append(f"{v.mean():.4f}+-{v.std():.4f}")
        print(f"{method:<20} " + " ".join(f"{c:>15}" for c in cells))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
