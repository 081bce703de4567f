"""Sweep the verification harness over N, L, p and targets, then summarize.

Thin wrapper over the CLI sweep that also prints the worst error/bound ratio
per (target, p).  Exit status is nonzero when any level fails.

    python3 scripts/acceptance_sweep.py --Ns 2,3 --Ls 2,4 --ps 1,2 --targets ramp,sine
"""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

from layerwise.cli import ExperimentConfig, sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--Ns", default="2,3")
    parser.add_argument("--Ls", default="2,4")
    parser.add_argument("--ps", default="1,2")
    parser.add_argument("--targets", default="ramp,average,sine,indicator")
    parser.add_argument("--d", type=int, default=1)
    parser.add_argument("--out", default="runs/sweep.csv")
    args = parser.parse_args()
    ints = lambda s: [int(v) for v in s.split(",") if v]
    text, ok = sweep(
        ExperimentConfig(d=args.d),
        ints(args.Ns),
        ints(args.Ls),
        [float(v) for v in args.ps.split(",") if v],
        [t for t in args.targets.split(",") if t],
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    worst = defaultdict(float)
    for row in csv.DictReader(text.splitlines()[1:]):
        if row["error"]:
            print(f"{row['target']} N={row['N']} L={row['L']} p={row['p']}: {row['error']}")
            continue
        bound = float(row["bound"])
        if bound > 0:
            key = (row["target"], row["p"])
            worst[key] = max(worst[key], float(row["measured_error"]) / bound)
    for (target, p), ratio in sorted(worst.items()):
        print(f"{target:>10} p={p:<4} worst error/bound {ratio:.3f}")
    print(f"all levels passed: {ok}  ({out})")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
