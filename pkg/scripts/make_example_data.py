#!/usr/bin/env python3
"""Write a synthetic (u, v, year) CSV drawn from a truth fixture, for trying the CLI."""
import argparse
import csv

from windcond.data import to_cartesian
from windcond.synth import FIXTURES, load_fixture, truth_sample


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("fixture", choices=[f + s for f in FIXTURES for s in ("", "-future")])
    p.add_argument("output")
    p.add_argument("--n", type=int, default=7360)
    p.add_argument("--years", type=int, default=10)
    p.add_argument("--first-year", type=int, default=1995)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    data = truth_sample(load_fixture(args.fixture), args.n, args.years, args.seed, first_year=args.first_year)
    u, v = to_cartesian(data.speed, data.direction)
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "year"])
        for row in zip(u, v, data.year):
            w.writerow([repr(float(row[0])), repr(float(row[1])), int(row[2])])


if __name__ == "__main__":
    main()
