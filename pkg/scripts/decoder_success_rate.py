"""Two-sine fit success rate and cost as a function of the number of cells K.

Writes a CSV with one row per K: trials, successes, median achieved eps and
median wall time.  Values are drawn uniformly from [-1, 1] with a fixed seed.

    python3 scripts/decoder_success_rate.py --Ks 1,2,4,6,8 --trials 10
"""

import argparse
import csv
import sys
import time

import numpy as np

from layerwise.decoder import FitBudget, FitFailure, fit_two_sine


def run(Ks, trials, eps, budget, seed):
    rng = np.random.default_rng(seed)
    rows = []
    for K in Ks:
        achieved, times, ok = [], [], 0
        for _ in range(trials):
            y = rng.uniform(-1.0, 1.0, K)
            start = time.perf_counter()
            try:
                dec = fit_two_sine(y, eps, budget)
                ok += 1
            except FitFailure as exc:
                dec = exc.best
            times.append(time.perf_counter() - start)
            achieved.append(dec.achieved_eps)
        rows.append({
            "K": K,
            "trials": trials,
            "successes": ok,
            "rate": ok / trials,
            "median_achieved_eps": float(np.median(achieved)),
            "median_seconds": float(np.median(times)),
        })
        print(f"K={K:2d}  success {ok}/{trials}  median eps {rows[-1]['median_achieved_eps']:.2e}", file=sys.stderr)
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--Ks", default="1,2,3,4,5,6,8,12,16")
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--eps", type=float, default=1e-2)
    parser.add_argument("--n-max", type=int, default=10**7)
    parser.add_argument("--w-candidates", type=int, default=256)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    args = parser.parse_args()
    Ks = [int(k) for k in args.Ks.split(",") if k]
    budget = FitBudget(n_max=args.n_max, w_candidates=args.w_candidates)
    rows = run(Ks, args.trials, args.eps, budget, args.seed)
    handle = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.DictWriter(handle, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if handle is not sys.stdout:
        handle.close()


if __name__ == "__main__":
    main()
