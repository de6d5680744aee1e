import csv
import json
import math
import warnings

import numpy as np
import pytest

from windcond.cli import RunConfig, ingest, main, read_curves, read_wind_csv, resolve_config, write_curves
from windcond.data import to_cartesian
from windcond.errors import InsufficientDataError
from windcond.metrics import DirectionGrid
from windcond.synth import load_fixture, truth_sample


def write_uv(path, data):
    u, v = to_cartesian(data.speed, data.direction)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "year"])
        for row in zip(u, v, data.year):
            w.writerow([repr(float(row[0])), repr(float(row[1])), int(row[2])])


@pytest.fixture(scope="module")
def fixture_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "plains.csv"
    write_uv(path, truth_sample(load_fixture("plains-unimodal"), 7360, 10, seed=21))
    return path


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "small.csv"
    write_uv(path, truth_sample(load_fixture("plains-unimodal"), 2000, 10, seed=22))
    return path


def run(*argv):
    return main([str(a) for a in argv])


# ---------------------------------------------------------------- ingest

def test_ingest_axis_row(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("u,v,year\n0,1,1995\n")
    d = ingest(p)
    assert d.speed[0] == 1.0 and d.direction[0] == 0.0 and d.year[0] == 1995


def test_ingest_polar_degrees(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("r,phi,year\n5,90,2001\n")
    d = ingest(p, format="polar", unit="deg")
    assert d.speed[0] == 5.0 and d.direction[0] == pytest.approx(math.pi / 2, abs=1e-15)


def test_ingest_errors(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("u,v,year\n")
    with pytest.raises(InsufficientDataError):
        ingest(p)
    p.write_text("u,year\n1,2000\n")
    with pytest.raises(ValueError, match="missing columns"):
        ingest(p)
    p.write_text("r,phi,year\n1,0.5,2000\n")
    with pytest.raises(ValueError, match="unit"):
        ingest(p, format="polar")


def test_ingest_skips_bad_rows(tmp_path, caplog):
    p = tmp_path / "a.csv"
    p.write_text("u,v,year\n1,0,2000\n,1,2000\nnan,1,2000\n0,inf,2001\n0,2,2001\n")
    data, skipped = read_wind_csv(p)
    assert len(data) == 2 and skipped == 3
    with caplog.at_level("WARNING"):
        ingest(p)
    assert "skipped 3" in caplog.text


def test_ingest_season_filter(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("u,v,year,season\n1,0,2000,DJF\n0,1,2000,JJA\n0,2,2001,DJF\n")
    d = ingest(p, season_column="season", season="DJF")
    np.testing.assert_array_equal(d.speed, [1.0, 2.0])


def test_ingest_roundtrip(tmp_path):
    src = truth_sample(load_fixture("plains-bimodal"), 500, 5, seed=23)
    p = tmp_path / "rt.csv"
    write_uv(p, src)
    back = ingest(p)
    np.testing.assert_allclose(back.speed, src.speed, rtol=0, atol=1e-12)
    gap = np.abs(back.direction - src.direction)
    assert np.all(np.minimum(gap, 2 * math.pi - gap) <= 1e-12)
    np.testing.assert_array_equal(back.year, src.year)


def test_curve_csv_roundtrip(tmp_path):
    phi = DirectionGrid().angles
    cols = {"q95": np.exp(np.sin(phi)) * math.pi, "q50": 1 / (1 + phi)}
    write_curves(tmp_path / "c.csv", phi, cols)
    phi2, back = read_curves(tmp_path / "c.csv")
    np.testing.assert_allclose(phi2, phi, rtol=0, atol=1e-12)
    for k in cols:
        np.testing.assert_allclose(back[k], cols[k], rtol=0, atol=1e-12)


# ---------------------------------------------------------------- configuration

def test_defaults():
    cfg = RunConfig()
    assert (cfg.n_bins, cfg.K_alpha, cfg.K_beta, cfg.df) == (36, 8, 8, 18)
    assert tuple(cfg.taus) == (0.5, 0.75, 0.95)
    assert (cfg.n_replicates, cfg.level) == (500, 0.95)


def test_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"seed": 5, "K_alpha": 6, "level": 0.9}))
    cfg = resolve_config({}, conf, env={})
    assert (cfg.seed, cfg.K_alpha, cfg.level) == (5, 6, 0.9)
    cfg = resolve_config({}, conf, env={"WINDCOND_SEED": "11"})
    assert cfg.seed == 11 and cfg.K_alpha == 6
    cfg = resolve_config({"seed": 3, "K_alpha": 4, "taus": "0.25,0.9"}, conf, env={"WINDCOND_SEED": "11"})
    assert (cfg.seed, cfg.K_alpha, cfg.level, cfg.taus) == (3, 4, 0.9, (0.25, 0.9))


def test_unknown_config_key(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"sede": 5}))
    with pytest.raises(ValueError, match="sede"):
        resolve_config({}, conf, env={})


# ---------------------------------------------------------------- fit

FIT_FILES = ("vonmises.json", "bwhr.json", "curves_bwhr.csv", "curves_bpqr.csv", "direction_density.csv")


def test_fit_smoke_periodic_deterministic(fixture_csv, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("fit", "--input", fixture_csv, "-o", a) == 0
    assert run("fit", "--input", fixture_csv, "-o", b) == 0
    for name in FIT_FILES:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    for name in ("curves_bwhr.csv", "curves_bpqr.csv", "direction_density.csv"):
        phi, cols = read_curves(a / name)
        assert phi.size == 629
        for vals in cols.values():
            # one grid step across the seam is comparable to one step anywhere else
            assert abs(vals[-1] - vals[0]) <= 2 * np.max(np.abs(np.diff(vals))) + 1e-12
    _, q = read_curves(a / "curves_bwhr.csv")
    assert set(q) == {"q50", "q75", "q95"} and np.all(q["q95"] > q["q50"])


def test_fit_insufficient_bins(small_csv, tmp_path, capsys):
    code = run("fit", "--input", small_csv, "--n-bins", 10, "-o", tmp_path)
    assert code != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "insufficient_bins"
    assert "18" in err["message"]


def test_missing_input_reports_json(tmp_path, capsys):
    assert run("fit", "--input", tmp_path / "nope.csv", "-o", tmp_path) != 0
    assert "error" in json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_seed_env_override(small_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("WINDCOND_SEED", "9")
    assert run("simulate", "--input", small_csv, "--count", 200, "--kde-size", 11,
               "--candidate-counts", "1,2", "-o", tmp_path / "env") == 0
    monkeypatch.delenv("WINDCOND_SEED")
    assert run("simulate", "--input", small_csv, "--count", 200, "--kde-size", 11,
               "--candidate-counts", "1,2", "--seed", 9, "-o", tmp_path / "flag") == 0
    assert run("simulate", "--input", small_csv, "--count", 200, "--kde-size", 11,
               "--candidate-counts", "1,2", "--seed", 10, "-o", tmp_path / "other") == 0
    env, flag, other = ((tmp_path / d / "samples.csv").read_bytes() for d in ("env", "flag", "other"))
    assert env == flag and env != other


def test_simulate_outputs(small_csv, tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--input", small_csv, "--count", 300, "--kde-size", 21,
               "--candidate-counts", "1,2", "-o", out) == 0
    with open(out / "samples.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 300
    r = np.array([float(x["r"]) for x in rows])
    assert np.all(r >= 0)
    with open(out / "kde.csv") as fh:
        dens = np.array([float(x["density"]) for x in csv.DictReader(fh)])
    assert dens.size == 21 * 21 and np.all(dens >= 0)


# ---------------------------------------------------------------- bootstrap

def read_band(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_bootstrap_same_file_null(small_csv, tmp_path):
    out = tmp_path / "boot"
    assert run("bootstrap", "--input", small_csv, "--input-future", small_csv, "--taus", "0.95",
               "--n-replicates", 60, "--candidate-counts", "1,2", "--grid-size", 64, "-o", out) == 0
    band = read_band(out / "band_diff_q95_bwhr.csv")
    assert np.all(band["estimate"] == 0)
    assert np.all((band["lower"] <= 0) & (band["upper"] >= 0))
    for name in ("band_density.csv", "band_q95_bwhr.csv"):
        b = read_band(out / name)
        assert b["phi_rad"].size == 64 and np.all(b["lower"] <= b["upper"])
    summary = json.loads((out / "bootstrap_summary.json").read_text())
    d = summary["differences"]["q95"]
    assert d["mean_lower"] <= 0 <= d["mean_upper"]
    assert d["marginal_lower"] <= 0 <= d["marginal_upper"]


def test_bootstrap_small_replicates_warns(small_csv, tmp_path):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert run("bootstrap", "--input", small_csv, "--taus", "0.5", "--n-replicates", 50, "--level", 0.99,
                   "--candidate-counts", "1", "--grid-size", 16, "-o", tmp_path) == 0
    assert any("clamp" in str(w.message) for w in caught)
    assert read_band(tmp_path / "band_q50_bwhr.csv")["level"][0] == 0.99


# ---------------------------------------------------------------- study and metrics

def test_study_smoke(tmp_path):
    out = tmp_path / "study"
    assert run("study", "--fixtures", "plains-unimodal", "--n-replicates", 5, "--n", 1500, "--taus", "0.95",
               "--candidate-counts", "1,2", "-o", out) == 0
    with open(out / "study.csv") as fh:
        rows = list(csv.DictReader(fh))
    for metric, est in (("wimre_q", "bwhr"), ("wimre_q", "bpqr"), ("wimre_f", "vm"), ("mean_qdiff", "bwhr")):
        assert sum(r["metric"] == metric and r["estimator"] == est for r in rows) == 5
    with open(out / "summary.csv") as fh:
        summary = list(csv.DictReader(fh))
    by_metric = {row["metric"]: row for row in summary}
    for est in ("bwhr", "bpqr"):
        assert float(by_metric["wimre_q"]["plains-unimodal/%s_mean" % est]) > 0
    assert float(by_metric["wimre_f"]["plains-unimodal/vm_mean"]) > 0
    assert json.loads((out / "failures.json").read_text()) == {"plains-unimodal": []}


def test_metrics_verb(tmp_path):
    phi = DirectionGrid().angles
    truth = 8 + 2 * np.sin(phi)
    write_curves(tmp_path / "t.csv", phi, {"q95": truth})
    write_curves(tmp_path / "e.csv", phi, {"q95": 1.1 * truth})
    write_curves(tmp_path / "w.csv", phi, {"density": np.exp(np.cos(phi))})
    assert run("metrics", "--estimate", tmp_path / "e.csv", "--truth", tmp_path / "t.csv",
               "--weight", tmp_path / "w.csv", "-o", tmp_path) == 0
    result = json.loads((tmp_path / "metrics.json").read_text())
    assert result["q95"] == pytest.approx(0.1, abs=1e-12)
