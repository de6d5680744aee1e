"""Command-line entry point: ``windcond {fit,bootstrap,study,simulate,metrics}``.

Settings resolve as CLI flags > ``WINDCOND_SEED`` (seed only) > JSON config
file > defaults. Errors go to stderr as one JSON object per line and the
process exits nonzero.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bpqr import PeriodicSplineBasis, bpqr_fit
from .bwhr import (
    BinningSpec,
    DirectionalWeibullModel,
    bwhr_fit,
    density_grid,
    joint_density_estimate,
    joint_simulate,
)
from .circstats import VonMisesMixture, normalize_angle, select_components
from .data import WindData, to_polar
from .errors import InsufficientDataError, WindcondError
from .metrics import DirectionGrid, wimre
from .resample import DirectionDensity, QuantileCurve, bootstrap_band, quantile_difference_band
from .study import StudyConfig, run_study, write_records, write_summary, write_wimse
from .synth import FIXTURES, load_truth

log = logging.getLogger("windcond")

EXIT_ERROR = 2


@dataclass
class RunConfig:
    input: str | None = None
    input_future: str | None = None
    format: str = "uv"
    unit: str | None = None
    year_column: str = "year"
    season_column: str | None = None
    season: str | None = None
    n_bins: int | str = 36
    scheme: str = "equal-width"
    summary: str = "median"
    K_alpha: int = 8
    K_beta: int = 8
    df: int = 18
    taus: tuple = (0.5, 0.75, 0.95)
    method: str = "bwhr"
    candidate_counts: tuple = (1, 2, 3, 4, 5, 6)
    n_replicates: int = 500
    level: float = 0.95
    seed: int = 0
    grid_size: int = 629
    output: str = "out"
    n_jobs: int = 1
    # study
    fixtures: tuple = FIXTURES
    future: bool = True
    n: int = 7360
    years: int = 10
    # simulate
    models: str | None = None
    count: int = 7360
    kde_size: int = 101
    # metrics
    estimate: str | None = None
    truth: str | None = None
    weight: str | None = None

    @property
    def binning(self) -> BinningSpec:
        return BinningSpec(self.n_bins, self.scheme, self.summary)

    @property
    def grid(self) -> DirectionGrid:
        return DirectionGrid(self.grid_size)


_TUPLE_FIELDS = {"taus": float, "candidate_counts": int, "fixtures": str}


def _coerce(name, value):
    if name in _TUPLE_FIELDS and value is not None:
        if isinstance(value, str):
            value = value.split(",")
        return tuple(_TUPLE_FIELDS[name](v) for v in value)
    if name == "n_bins" and value != "auto":
        return int(value)
    return value


def resolve_config(cli: dict, config_path: str | None = None, env=None) -> RunConfig:
    """Merge defaults, config file, ``WINDCOND_SEED`` and CLI values."""
    env = os.environ if env is None else env
    names = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    if config_path:
        with open(config_path) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - names
        if unknown:
            raise ValueError("unknown config keys: %s" % ", ".join(sorted(unknown)))
        values.update(loaded)
    if env.get("WINDCOND_SEED"):
        values["seed"] = int(env["WINDCOND_SEED"])
    values.update({k: v for k, v in cli.items() if k in names and v is not None})
    return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})


# ---------------------------------------------------------------- ingestion

def read_wind_csv(path, format="uv", unit=None, year_column="year",
                  season_column=None, season=None) -> tuple[WindData, int]:
    """Parse a wind CSV; returns the dataset and the number of skipped rows."""
    if format not in ("uv", "polar"):
        raise ValueError("format must be 'uv' or 'polar'")
    if format == "polar" and unit not in ("rad", "deg"):
        raise ValueError("polar input needs an explicit angle unit (rad or deg)")
    cols = ("u", "v") if format == "uv" else ("r", "phi")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = list(cols) + [year_column] + ([season_column] if season_column else [])
        missing = [c for c in required if c not in header]
        if missing:
            raise ValueError("%s: missing columns %s" % (path, ", ".join(missing)))
        a, b, years, skipped = [], [], [], 0
        for row in reader:
            if season_column and season is not None and row[season_column] != str(season):
                continue
            try:
                x, y = float(row[cols[0]]), float(row[cols[1]])
                yr = int(float(row[year_column]))
            except (TypeError, ValueError):
                skipped += 1
                continue
            if not (math.isfinite(x) and math.isfinite(y)) or (format == "polar" and x < 0):
                skipped += 1
                continue
            a.append(x)
            b.append(y)
            years.append(yr)
    if not a:
        raise InsufficientDataError("%s: no valid rows" % path)
    a, b = np.array(a), np.array(b)
    if format == "uv":
        r, phi = to_polar(a, b)
    else:
        r, phi = a, normalize_angle(np.deg2rad(b) if unit == "deg" else b)
    return WindData(r, phi, np.array(years)), skipped


def ingest(path, format="uv", unit=None, year_column="year", season_column=None, season=None) -> WindData:
    data, skipped = read_wind_csv(path, format, unit, year_column, season_column, season)
    if skipped:
        log.warning("%s: skipped %d row(s) with missing or non-finite values", path, skipped)
    return data


def _ingest_cfg(cfg: RunConfig, path: str) -> WindData:
    if not path:
        raise ValueError("an input CSV is required (--input)")
    return ingest(path, cfg.format, cfg.unit, cfg.year_column, cfg.season_column, cfg.season)


# ------------------------------------------------------------------ writers

def _fmt(x) -> str:
    return repr(float(x))


def _tau_label(tau: float) -> str:
    return "q%g" % (100 * tau)


def write_curves(path, phi, columns: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi_rad", "phi_deg", *columns])
        vals = list(columns.values())
        for i, p in enumerate(phi):
            w.writerow([_fmt(p), _fmt(math.degrees(p)), *(_fmt(v[i]) for v in vals)])


def read_curves(path) -> tuple[np.ndarray, dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError("%s: empty curve file" % path)
    phi = np.array([float(r["phi_rad"]) for r in rows])
    cols = [c for c in rows[0] if c not in ("phi_rad", "phi_deg")]
    return phi, {c: np.array([float(r[c]) for r in rows]) for c in cols}


def write_band(path, band):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi_rad", "phi_deg", "estimate", "lower", "upper", "level"])
        for phi, e, lo, hi, level in band.rows():
            w.writerow([_fmt(phi), _fmt(math.degrees(phi)), _fmt(e), _fmt(lo), _fmt(hi), _fmt(level)])


def _write_text(path: Path, text: str):
    path.write_text(text if text.endswith("\n") else text + "\n")


# ----------------------------------------------------------------- commands

def _fit_direction(cfg: RunConfig, data: WindData) -> VonMisesMixture:
    return select_components(data.direction, cfg.candidate_counts, seed=cfg.seed)


def cmd_fit(cfg: RunConfig) -> dict:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    data = _ingest_cfg(cfg, cfg.input)
    phi = cfg.grid.angles

    vm = _fit_direction(cfg, data)
    model = bwhr_fit(data, cfg.binning, cfg.K_alpha, cfg.K_beta)
    model.validate(cfg.grid)
    basis = PeriodicSplineBasis(cfg.df)
    bpqr = {t: bpqr_fit(data, t, basis).predict(phi) for t in cfg.taus}

    _write_text(out / "vonmises.json", vm.to_json())
    _write_text(out / "bwhr.json", model.to_json())
    write_curves(out / "curves_bwhr.csv", phi, {_tau_label(t): model.quantile(phi, t) for t in cfg.taus})
    write_curves(out / "curves_bpqr.csv", phi, {_tau_label(t): bpqr[t] for t in cfg.taus})
    write_curves(out / "direction_density.csv", phi, {"density": vm.pdf(phi)})
    return {"n": len(data), "n_components": vm.n_components, "excluded_bins": list(model.excluded)}


def cmd_bootstrap(cfg: RunConfig) -> dict:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    data = _ingest_cfg(cfg, cfg.input)
    grid = cfg.grid
    fit_opts = dict(binning=cfg.binning, K_alpha=cfg.K_alpha, K_beta=cfg.K_beta, df=cfg.df)
    common = dict(n_replicates=cfg.n_replicates, level=cfg.level, seed=cfg.seed, grid=grid, n_jobs=cfg.n_jobs)
    summary = {"level": cfg.level, "n_replicates": cfg.n_replicates, "method": cfg.method, "seed": cfg.seed}

    vm = _fit_direction(cfg, data)
    band = bootstrap_band(data, DirectionDensity(vm.n_components, grid, cfg.seed), **common)
    write_band(out / "band_density.csv", band)
    summary["density"] = {"n_components": vm.n_components, "failures": len(band.failures)}

    summary["quantiles"] = {}
    for tau in cfg.taus:
        band = bootstrap_band(data, QuantileCurve(tau, cfg.method, grid, **fit_opts), **common)
        write_band(out / ("band_%s_%s.csv" % (_tau_label(tau), cfg.method)), band)
        summary["quantiles"][_tau_label(tau)] = {"failures": len(band.failures)}

    if cfg.input_future:
        future = _ingest_cfg(cfg, cfg.input_future)
        summary["differences"] = {}
        for tau in cfg.taus:
            diff = quantile_difference_band(data, future, tau, cfg.method, **common, **fit_opts)
            write_band(out / ("band_diff_%s_%s.csv" % (_tau_label(tau), cfg.method)), diff.band)
            summary["differences"][_tau_label(tau)] = {
                "mean_difference": diff.mean_difference,
                "mean_lower": diff.mean_lower,
                "mean_upper": diff.mean_upper,
                "marginal_difference": diff.marginal_difference,
                "marginal_lower": diff.marginal_lower,
                "marginal_upper": diff.marginal_upper,
                "failures": len(diff.band.failures),
            }
    _write_text(out / "bootstrap_summary.json", json.dumps(summary, indent=2, sort_keys=True))
    return summary


def cmd_study(cfg: RunConfig) -> dict:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    scfg = StudyConfig(
        n=cfg.n, years=cfg.years, taus=tuple(cfg.taus), binning=cfg.binning,
        K_alpha=cfg.K_alpha, K_beta=cfg.K_beta, df=cfg.df,
        candidate_counts=tuple(cfg.candidate_counts), grid_size=cfg.grid_size,
    )
    results = []
    for name in cfg.fixtures:
        present = load_truth(name)
        future = None
        if cfg.future and not name.endswith(".json"):
            future = load_truth(name + "-future")
        res = run_study(present, future, cfg.n_replicates, scfg, cfg.seed, location=name, n_jobs=cfg.n_jobs)
        if res.flagged:
            log.warning("%s: %.1f%% of replicates failed", name, 100 * res.failure_rate)
        results.append(res)
    write_records(out / "study.csv", results)
    write_summary(out / "summary.csv", results)
    write_wimse(out / "wimse.csv", results)
    failures = {r.location: [list(map(str, f)) for f in r.failures] for r in results}
    _write_text(out / "failures.json", json.dumps(failures, indent=2, sort_keys=True))
    return {r.location: {"failure_rate": r.failure_rate} for r in results}


def cmd_simulate(cfg: RunConfig) -> dict:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.models:
        src = Path(cfg.models)
        vm = VonMisesMixture.from_json((src / "vonmises.json").read_text())
        model = DirectionalWeibullModel.from_json((src / "bwhr.json").read_text())
    else:
        data = _ingest_cfg(cfg, cfg.input)
        vm = _fit_direction(cfg, data)
        model = bwhr_fit(data, cfg.binning, cfg.K_alpha, cfg.K_beta)
    uv = joint_simulate(vm, model, cfg.count, cfg.seed)
    r, phi = to_polar(uv[:, 0], uv[:, 1])
    with open(out / "samples.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "r", "phi_rad"])
        for row in zip(uv[:, 0], uv[:, 1], r, phi):
            w.writerow([_fmt(x) for x in row])
    u_grid, v_grid = density_grid(uv, cfg.kde_size)
    dens = joint_density_estimate(uv, u_grid, v_grid)
    with open(out / "kde.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "density"])
        for i, u in enumerate(u_grid):
            for j, v in enumerate(v_grid):
                w.writerow([_fmt(u), _fmt(v), _fmt(dens[i, j])])
    return {"count": cfg.count}


def cmd_metrics(cfg: RunConfig) -> dict:
    if not (cfg.estimate and cfg.truth and cfg.weight):
        raise ValueError("metrics needs --estimate, --truth and --weight curve files")
    phi_e, est = read_curves(cfg.estimate)
    phi_t, truth = read_curves(cfg.truth)
    phi_w, weight = read_curves(cfg.weight)
    if not (np.array_equal(phi_e, phi_t) and np.array_equal(phi_e, phi_w)):
        raise ValueError("curve files use different direction grids")
    w = weight.get("density", next(iter(weight.values())))
    result = {c: wimre(est[c], truth[c], w) for c in est if c in truth}
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "metrics.json", json.dumps(result, indent=2, sort_keys=True))
    return result


COMMANDS = {
    "fit": cmd_fit,
    "bootstrap": cmd_bootstrap,
    "study": cmd_study,
    "simulate": cmd_simulate,
    "metrics": cmd_metrics,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="windcond", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON file of RunConfig fields")
    a = p.add_argument
    a("--input")
    a("--input-future", dest="input_future")
    a("--format", choices=("uv", "polar"))
    a("--unit", choices=("rad", "deg"))
    a("--year-column", dest="year_column")
    a("--season-column", dest="season_column")
    a("--season")
    a("--n-bins", dest="n_bins")
    a("--scheme", choices=("equal-width", "equal-frequency"))
    a("--summary", choices=("median", "midpoint"))
    a("--K-alpha", dest="K_alpha", type=int)
    a("--K-beta", dest="K_beta", type=int)
    a("--df", type=int)
    a("--taus", help="comma-separated levels")
    a("--method", choices=("bwhr", "bpqr"))
    a("--candidate-counts", dest="candidate_counts")
    a("--n-replicates", dest="n_replicates", type=int)
    a("--level", type=float)
    a("--seed", type=int)
    a("--grid-size", dest="grid_size", type=int)
    a("--output", "-o")
    a("--n-jobs", dest="n_jobs", type=int)
    a("--fixtures", help="comma-separated fixture names or truth JSON paths")
    a("--no-future", dest="future", action="store_const", const=False)
    a("--n", type=int)
    a("--years", type=int)
    a("--models", help="directory holding vonmises.json and bwhr.json")
    a("--count", type=int)
    a("--kde-size", dest="kde_size", type=int)
    a("--estimate")
    a("--truth")
    a("--weight")
    return p


def _emit_error(err: BaseException):
    if isinstance(err, WindcondError):
        payload = err.to_dict()
    else:
        payload = {"error": type(err).__name__, "message": str(err)}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    try:
        cfg = resolve_config(args, config_path)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            result = COMMANDS[command](cfg)
    except (WindcondError, ValueError, OSError, ArithmeticError) as err:
        _emit_error(err)
        return EXIT_ERROR
    log.info("%s done: %s", command, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
