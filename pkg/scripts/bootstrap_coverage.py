#!/usr/bin/env python3
"""Coverage of percentile bands for a conditional quantile curve.

Each outer trial draws fresh synthetic years from a truth fixture, builds a
year-block bootstrap band and records the fraction of grid angles where the
band contains the exact quantile curve.

    python3 scripts/bootstrap_coverage.py --trials 200 --replicates 200
"""
import argparse
import json

import numpy as np

from windcond.resample import QuantileCurve, bootstrap_band
from windcond.synth import load_fixture, truth_curves, truth_sample


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--fixture", default="plains-unimodal")
    p.add_argument("--tau", type=float, default=0.95)
    p.add_argument("--method", choices=("bwhr", "bpqr"), default="bwhr")
    p.add_argument("--n", type=int, default=7360)
    p.add_argument("--years", type=int, default=10)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    truth = load_fixture(args.fixture)
    target = truth_curves(truth, (args.tau,)).quantiles[args.tau]
    stat = QuantileCurve(args.tau, args.method)
    rates = []
    for trial in range(args.trials):
        data = truth_sample(truth, args.n, args.years, seed=[args.seed, trial])
        band = bootstrap_band(data, stat, args.replicates, args.level, seed=1000 * trial + args.seed, n_jobs=args.jobs)
        rates.append(float(band.covers(target).mean()))
        print("trial %3d  coverage %.3f  running mean %.4f" % (trial, rates[-1], np.mean(rates)), flush=True)
    print(json.dumps({"fixture": args.fixture, "tau": args.tau, "method": args.method, "trials": args.trials,
                      "replicates": args.replicates, "coverage": float(np.mean(rates)),
                      "coverage_sd": float(np.std(rates, ddof=1)) if len(rates) > 1 else 0.0}))


if __name__ == "__main__":
    main()
