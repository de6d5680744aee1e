"""Monte Carlo comparison of the direction and directional-speed estimators.

Each replicate samples present and future datasets from Gaussian-mixture
truths, fits the von Mises mixture, BWHR and BPQR, and scores the fitted
curves against the truths' numerically exact curves.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bpqr import PeriodicSplineBasis, bpqr_fit
from .bwhr import BinningSpec, bwhr_fit, conditional_quantile
from .circstats import select_components
from .errors import WindcondError
from .metrics import DirectionGrid, signed_relative_error, weighted_mean, wimre, wimse
from .synth import GaussianMixtureTruth, truth_curves, truth_sample

FAILURE_FLAG_RATE = 0.05


@dataclass(frozen=True)
class StudyConfig:
    n: int = 7360
    years: int = 10
    taus: tuple = (0.5, 0.75, 0.95)
    estimators: tuple = ("bwhr", "bpqr")
    binning: BinningSpec = BinningSpec()
    K_alpha: int = 8
    K_beta: int = 8
    df: int = 18
    candidate_counts: tuple = (1, 2, 3, 4, 5, 6)
    grid_size: int = 629
    direction: bool = True


@dataclass
class StudyResult:
    location: str
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    # (kind, estimator, tau) -> list of curves, kind in {"q", "qdiff", "f"}
    curves: dict = field(default_factory=dict)
    truth: dict = field(default_factory=dict)
    weight: np.ndarray = None
    replicates: int = 0

    @property
    def failure_rate(self) -> float:
        failed = {f[0] for f in self.failures}
        return len(failed) / self.replicates if self.replicates else 0.0

    @property
    def flagged(self) -> bool:
        return self.failure_rate > FAILURE_FLAG_RATE

    def values(self, metric, estimator, tau=None) -> np.ndarray:
        return np.array([
            r["value"] for r in self.records
            if r["metric"] == metric and r["estimator"] == estimator
            and (tau is None or r["tau"] == tau)
        ])

    def wimse(self, kind, estimator, tau) -> float:
        return wimse(self.curves[(kind, estimator, tau)], self.truth[(kind, tau)], self.weight)


def _fit_curves(data, cfg: StudyConfig, phi):
    out = {}
    if "bwhr" in cfg.estimators:
        model = bwhr_fit(data, cfg.binning, cfg.K_alpha, cfg.K_beta)
        for tau in cfg.taus:
            out[("bwhr", tau)] = conditional_quantile(model, phi, tau)
    if "bpqr" in cfg.estimators:
        basis = PeriodicSplineBasis(cfg.df)
        for tau in cfg.taus:
            out[("bpqr", tau)] = bpqr_fit(data, tau, basis).predict(phi)
    return out


def _replicate(job):
    i, seed, present, future, cfg, truth_p, truth_diff, weight = job
    ss = np.random.SeedSequence([seed, i])
    s_present, s_future, s_em = ss.spawn(3)
    grid = DirectionGrid(cfg.grid_size)
    phi = grid.angles
    records, failures, curves = [], [], {}

    def rec(metric, estimator, tau, value):
        records.append(dict(replicate=i, metric=metric, estimator=estimator, tau=tau, value=value))

    data_p = truth_sample(present, cfg.n, cfg.years, np.random.default_rng(s_present))
    if cfg.direction:
        try:
            em_seed = int(s_em.generate_state(1)[0])
            model = select_components(data_p.direction, cfg.candidate_counts, seed=em_seed)
            dens = model.pdf(phi)
            curves[("f", "vm", None)] = dens
            rec("wimre_f", "vm", None, wimre(dens, truth_p["f"], weight))
            rec("n_components", "vm", None, float(model.n_components))
        except WindcondError as err:
            failures.append((i, "vm", "%s: %s" % (err.code, err)))

    try:
        fitted_p = _fit_curves(data_p, cfg, phi)
    except WindcondError as err:
        failures.append((i, "present", "%s: %s" % (err.code, err)))
        return records, failures, curves
    for (est, tau), q in fitted_p.items():
        curves[("q", est, tau)] = q
        rec("wimre_q", est, tau, wimre(q, truth_p[tau], weight))

    if future is None:
        return records, failures, curves
    data_f = truth_sample(future, cfg.n, cfg.years, np.random.default_rng(s_future))
    try:
        fitted_f = _fit_curves(data_f, cfg, phi)
    except WindcondError as err:
        failures.append((i, "future", "%s: %s" % (err.code, err)))
        return records, failures, curves
    for key, qf in fitted_f.items():
        est, tau = key
        diff = qf - fitted_p[key]
        curves[("qdiff", est, tau)] = diff
        rec("mean_qdiff", est, tau, weighted_mean(diff, weight))
        g = truth_diff[tau]
        if np.all(g != 0):
            rec("wimre_qdiff", est, tau, wimre(diff, g, weight))
            rec("signed_qdiff", est, tau, signed_relative_error(diff, g, weight))
    return records, failures, curves


def run_study(
    truth_present: GaussianMixtureTruth,
    truth_future: GaussianMixtureTruth | None,
    replicates: int,
    config: StudyConfig = StudyConfig(),
    seed: int = 0,
    *,
    location: str = "",
    n_jobs: int = 1,
) -> StudyResult:
    """Run ``replicates`` seeded replicates and collect metric records.

    Replicate ``i`` draws from ``SeedSequence([seed, i])``, so results do
    not depend on ``n_jobs``. Estimator errors are logged in ``failures``
    and the study carries on.

    Metrics per replicate: ``wimre_f`` (von Mises mixture), ``wimre_q`` per
    estimator and level, and with a future truth ``wimre_qdiff``,
    ``signed_qdiff`` (both skipped where the true difference vanishes) and
    ``mean_qdiff``, the direction-weighted mean estimated difference.
    """
    location = location or truth_present.name
    grid = DirectionGrid(config.grid_size)
    tp = truth_curves(truth_present, config.taus, grid)
    truth_p = {"f": tp.density, **tp.quantiles}
    truth_diff = {}
    result = StudyResult(location, weight=tp.density, replicates=replicates)
    result.truth[("f", None)] = tp.density
    for tau in config.taus:
        result.truth[("q", tau)] = tp.quantiles[tau]
    if truth_future is not None:
        tf = truth_curves(truth_future, config.taus, grid)
        for tau in config.taus:
            truth_diff[tau] = tf.quantiles[tau] - tp.quantiles[tau]
            result.truth[("qdiff", tau)] = truth_diff[tau]

    jobs = [
        (i, seed, truth_present, truth_future, config, truth_p, truth_diff, tp.density)
        for i in range(replicates)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            outputs = list(pool.map(_replicate, jobs))
    else:
        outputs = [_replicate(j) for j in jobs]

    for records, failures, curves in outputs:
        for r in records:
            r["location"] = location
        result.records.extend(records)
        result.failures.extend(failures)
        for key, c in curves.items():
            kind, est, tau = key
            result.curves.setdefault((kind, est, tau), []).append(c)
    return result


RECORD_FIELDS = ("replicate", "location", "metric", "estimator", "tau", "value")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_records(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for res in results:
            for r in res.records:
                w.writerow([_fmt(r[k]) for k in RECORD_FIELDS])


def summarize(results) -> list[dict]:
    """Table-1 style summary: one row per (metric, tau) and estimator
    column pairs ``<location>/<estimator>_mean`` and ``..._sd`` per location."""
    rows = {}
    for res in results:
        groups = {}
        for r in res.records:
            groups.setdefault((r["metric"], r["tau"], r["estimator"]), []).append(r["value"])
        for (metric, tau, est), vals in groups.items():
            row = rows.setdefault((metric, tau), {"metric": metric, "tau": tau})
            v = np.asarray(vals, dtype=float)
            row["%s/%s_mean" % (res.location, est)] = float(v.mean())
            row["%s/%s_sd" % (res.location, est)] = float(v.std(ddof=1)) if v.size > 1 else float("nan")
    order = sorted(rows, key=lambda k: (k[0], -1.0 if k[1] is None else k[1]))
    return [rows[k] for k in order]


def write_summary(path, results):
    rows = summarize(results)
    cols = ["metric", "tau"]
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in cols])


def write_wimse(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "kind", "estimator", "tau", "wimse"])
        for res in results:
            for (kind, est, tau), curves in sorted(res.curves.items(), key=lambda kv: str(kv[0])):
                truth = res.truth.get((kind, tau))
                if truth is None:
                    continue
                w.writerow([res.location, kind, est, _fmt(tau), _fmt(wimse(curves, truth, res.weight))])
