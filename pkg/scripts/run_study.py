#!/usr/bin/env python3
"""Simulation study on the shipped truth fixtures; prints a WIMRE table.

    python3 scripts/run_study.py --replicates 100 --out out/study
"""
import argparse
import logging
from pathlib import Path

from windcond.study import StudyConfig, run_study, summarize, write_records, write_summary, write_wimse
from windcond.synth import FIXTURES, load_fixture


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--fixtures", nargs="+", default=list(FIXTURES))
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--n", type=int, default=7360)
    p.add_argument("--taus", type=float, nargs="+", default=[0.5, 0.75, 0.95])
    p.add_argument("--no-future", action="store_true", help="skip the present/future difference metrics")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("out/study"))
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = StudyConfig(n=args.n, taus=tuple(args.taus))
    results = []
    for name in args.fixtures:
        future = None if args.no_future else load_fixture(name + "-future")
        logging.info("%s: %d replicates", name, args.replicates)
        results.append(run_study(load_fixture(name), future, args.replicates, cfg, args.seed,
                                 location=name, n_jobs=args.jobs))

    args.out.mkdir(parents=True, exist_ok=True)
    write_records(args.out / "study.csv", results)
    write_summary(args.out / "summary.csv", results)
    write_wimse(args.out / "wimse.csv", results)

    rows = summarize(results)
    cols = sorted({c for row in rows for c in row if c.endswith("_mean")})
    print("%-12s %-5s " % ("metric", "tau") + " ".join("%22s" % c for c in cols))
    for row in rows:
        cells = ["%22s" % ("%.4f" % float(row[c]) if row.get(c) not in ("", None) else "-") for c in cols]
        print("%-12s %-5s " % (row["metric"], row["tau"] or "") + " ".join(cells))


if __name__ == "__main__":
    main()
