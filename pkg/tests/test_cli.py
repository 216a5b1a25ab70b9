"""End-to-end CLI pipeline on a small simulated data set, plus file formats."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from coxmap.cli import cli
from coxmap.estimation import SecondOrderSummary, contrast_value
from coxmap.geometry import PolygonWindow, build_grid, build_pattern
from coxmap.intensity import SpatialIntensity, TemporalIntensity, kernel_lambda
from coxmap.io import (
    load_lambda,
    load_mu,
    load_pattern,
    read_curve_csv,
    read_points_csv,
    read_window_geojson,
    save_lambda,
    save_mu,
    save_pattern,
    write_curve_csv,
    write_points_csv,
)
from coxmap.errors import FileFormatError


@pytest.fixture()
def runner():
    return CliRunner()


def write_window(path, coords=((0, 0), (30, 0), (30, 20), (0, 20), (0, 0))):
    path.write_text(json.dumps({
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [list(map(list, coords))]},
    }))
    return path


def run(runner, project, args, expect=0):
    result = runner.invoke(cli, ["--project", str(project)] + args,
                           catch_exceptions=False)
    assert result.exit_code == expect, result.output
    return result


# ---------------------------------------------------------------------------
# file formats


def test_points_csv_round_trip(tmp_path):
    pts = np.array([[0.1, 0.2, 0.3], [1.5, 2.5, 3.5], [1e-17, 7.0, 19.999999999999996]])
    path = tmp_path / "pts.csv"
    write_points_csv(pts, path)
    np.testing.assert_array_equal(read_points_csv(path), pts)


def test_points_csv_accepts_any_column_order(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("id,t,y,x\n7,3.0,2.0,1.0\n")
    np.testing.assert_array_equal(read_points_csv(path), [[1.0, 2.0, 3.0]])


def test_points_csv_errors_name_the_line(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("x,y,t\n1,2,3\n1,nope,3\n")
    with pytest.raises(FileFormatError, match="line 3"):
        read_points_csv(path)
    (tmp_path / "h.csv").write_text("a,b,c\n1,2,3\n")
    with pytest.raises(FileFormatError, match="x, y, t"):
        read_points_csv(tmp_path / "h.csv")


def test_window_geojson_variants(tmp_path):
    geom = {"type": "Polygon", "coordinates": [[[0, 0], [4, 0], [4, 3], [0, 3], [0, 0]]]}
    for obj in (
        geom,
        {"type": "Feature", "geometry": geom},
        {"type": "FeatureCollection", "features": [{"type": "Feature", "geometry": geom}]},
    ):
        path = tmp_path / "w.geojson"
        path.write_text(json.dumps(obj))
        assert read_window_geojson(path).area == pytest.approx(12.0)
    path.write_text(json.dumps({"type": "Point", "coordinates": [0, 0]}))
    with pytest.raises(FileFormatError):
        read_window_geojson(path)


def test_pattern_round_trip(tmp_path):
    win = PolygonWindow([[(0, 0), (5, 0), (5, 5), (0, 5)]])
    pts = np.array([[1.0, 2.0, 0.5], [3.0, 4.0, 1.5]])
    pattern = build_pattern(pts, win, (0.0, 2.0))
    save_pattern(pattern, tmp_path / "p.json")
    back = load_pattern(tmp_path / "p.json")
    np.testing.assert_array_equal(back.points, pattern.points)
    assert back.tlim == pattern.tlim
    assert back.window.area == pytest.approx(pattern.window.area)


def test_lambda_round_trip_and_grid_guard(tmp_path):
    win = PolygonWindow([[(0, 0), (8, 0), (8, 4), (0, 4)]])
    grid = build_grid(win, cellwidth=1.0)
    pattern = build_pattern(np.array([[1.0, 1.0, 0.5], [6.0, 3.0, 0.7]]), win, (0, 1))
    lam = kernel_lambda(pattern, grid, bandwidth=1.5)
    save_lambda(lam, tmp_path / "lam.json")
    back = load_lambda(tmp_path / "lam.json", grid)
    np.testing.assert_array_equal(back.values, lam.values)
    other = build_grid(win, cellwidth=0.5)
    with pytest.raises(FileFormatError, match="re-estimate"):
        load_lambda(tmp_path / "lam.json", other)


def test_mu_round_trip(tmp_path):
    tab = TemporalIntensity((0.0, 3.0), values=np.array([1.0, 2.0, 3.0]))
    save_mu(tab, tmp_path / "mu.json")
    back = load_mu(tmp_path / "mu.json")
    np.testing.assert_array_equal(back.values, tab.values)
    const = TemporalIntensity((0.0, 3.0), constant=4.5)
    save_mu(const, tmp_path / "mu2.json")
    assert load_mu(tmp_path / "mu2.json").constant == 4.5


def test_curve_csv_full_precision(tmp_path):
    x = np.array([0.1, 0.2, 0.30000000000000004])
    y = np.array([1.0 / 3.0, math.pi, 2.0 ** -40])
    write_curve_csv(tmp_path / "c.csv", {"r": x, "empirical": y})
    cols = read_curve_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(cols["r"], x)
    np.testing.assert_array_equal(cols["empirical"], y)


# ---------------------------------------------------------------------------
# the pipeline, stage by stage


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Simulate, then run every stage against one project file."""
    base = tmp_path_factory.mktemp("pipeline")
    project = base / "proj.json"
    win = write_window(base / "win.geojson")
    runner = CliRunner()

    run(runner, project, [
        "simulate", "--window", str(win), "--tlim", "0,20", "--mu", "60",
        "--cellwidth", "1", "--sigma", "1.2", "--phi", "2.0", "--theta", "1.0",
        "--seed", "11", "--out", str(base / "pts.csv"),
        "--manifest", str(base / "man.json"),
    ])
    run(runner, project, [
        "ingest", "--points", str(base / "pts.csv"), "--window", str(win),
        "--tlim", "0,20",
    ])
    run(runner, project, ["lambda", "--cellwidth", "1", "--bandwidth", "2"])
    run(runner, project, ["mu", "--method", "lowess"])
    run(runner, project, ["summaries", "--kind", "g"])
    run(runner, project, ["summaries", "--kind", "acf", "--maxlag", "6"])
    fit1 = run(runner, project, ["fit-spatial"])
    fit2 = run(runner, project, ["fit-theta"])
    return {
        "base": base,
        "project": project,
        "runner": runner,
        "fit_spatial": json.loads(fit1.output.strip().splitlines()[-1]),
        "fit_theta": json.loads(fit2.output.strip().splitlines()[-1]),
    }


def test_simulate_writes_manifest(pipeline):
    man = json.loads((pipeline["base"] / "man.json").read_text())
    assert man["sigma"] == 1.2 and man["seed"] == 11
    assert man["events"] == len(read_points_csv(pipeline["base"] / "pts.csv"))


def test_ingest_records_pattern(pipeline):
    proj = json.loads(pipeline["project"].read_text())
    pattern = load_pattern(proj["pattern"])
    assert pattern.n == json.loads((pipeline["base"] / "man.json").read_text())["events"]


def test_fit_outputs_recorded(pipeline):
    proj = json.loads(pipeline["project"].read_text())
    fs = pipeline["fit_spatial"]
    assert proj["params"]["sigma"] == fs["sigma"]
    assert proj["params"]["theta"] == pipeline["fit_theta"]["theta"]
    # the reported contrast is reproducible from the recorded curve
    cols = read_curve_csv(proj["summary_g"])
    summary = SecondOrderSummary("pcf", cols["r"], cols["empirical"], cols["weight"])
    again = contrast_value(summary, fs["family"], fs["sigma"], fs["phi"], fs["nu"])
    assert again == fs["contrast"]


def test_predict_and_store_commands(pipeline):
    runner, project, base = pipeline["runner"], pipeline["project"], pipeline["base"]
    result = run(runner, project, [
        "predict", "--T", "20", "--laglength", "1", "--mala-length", "400",
        "--burnin", "100", "--retain", "10", "--mcmc-diag", "2",
        "--exceed", "1.5,2", "--dump", str(base / "dump"), "--seed", "5", "--force",
    ])
    assert "fft grid: 32 x 32" in result.output
    assert "retained: 30" in result.output

    summ = json.loads((base / "run" / "summary.json").read_text())
    assert np.asarray(summ["mean_y"]).shape == (2, 32, 32)
    assert (base / "run" / "diag_traces.csv").exists()

    out = run(runner, project, [
        "extract", "--store", str(base / "dump" / "samples.lgd"),
        "--x", "3,4", "--y", "2,2", "--t", "1", "--s", "all",
    ]).output.splitlines()
    assert out[0] == "x,y,t,s,value"
    assert len(out) == 1 + 2 * 1 * 1 * 30

    run(runner, project, [
        "expectation", "--store", str(base / "dump" / "samples.lgd"),
        "--what", "exp", "--out", str(base / "exp.json"),
    ])
    vals = json.loads((base / "exp.json").read_text())["values"]
    assert np.asarray(vals).shape == (2, 32, 32)

    # with --store omitted the dump recorded by predict is used
    implicit = run(runner, project, ["expectation", "--what", "exp"]).output
    assert json.loads(implicit.strip().splitlines()[-1])["values"] == vals

    qres = run(runner, project, [
        "quantile", "--store", str(base / "dump" / "samples.lgd"),
        "--probs", "0.25,0.75",
    ]).output
    payload = json.loads(qres.strip().splitlines()[-1])
    arr = np.asarray(payload["values"])
    assert arr.shape == (2, 32, 32, 2)
    assert np.all(arr[..., 0] <= arr[..., 1])


def test_seeded_predict_is_reproducible(pipeline):
    runner, project, base = pipeline["runner"], pipeline["project"], pipeline["base"]
    outs = []
    for name in ("rep1", "rep2"):
        run(runner, project, [
            "predict", "--T", "20", "--laglength", "0", "--mala-length", "200",
            "--burnin", "50", "--retain", "5", "--seed", "77",
            "--out", str(base / name),
        ])
        outs.append(json.loads((base / name / "summary.json").read_text()))
    assert outs[0]["mean_y"] == outs[1]["mean_y"]
    assert outs[0]["final_h"] == outs[1]["final_h"]


def test_plots_render(pipeline):
    runner, project, base = pipeline["runner"], pipeline["project"], pipeline["base"]
    for what in ("rr", "serr", "intensity", "exceed", "htrace", "trace"):
        run(runner, project, ["plot", "--what", what, "--run", str(base / "run")])
        assert (base / "run" / f"{what}.png").stat().st_size > 0
    run(runner, project, ["plot", "--what", "quantile", "--probs", "0.5",
                          "--store", str(base / "dump" / "samples.lgd")])
    assert (base / "dump" / "quantile.png").stat().st_size > 0


def test_rotate_check_reports(pipeline):
    result = run(pipeline["runner"], pipeline["project"],
                 ["rotate-check", "--cellwidth", "1"])
    rep = json.loads(result.output.strip().splitlines()[-1])
    assert rep["gain_percent"] == 0.0 and rep["worthwhile"] is False


# ---------------------------------------------------------------------------
# error behaviour through the real process boundary


def invoke_process(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "coxmap.cli"] + args,
        capture_output=True, text=True, cwd=cwd,
    )


def test_errors_are_json_on_stderr(tmp_path):
    win = write_window(tmp_path / "win.geojson")
    (tmp_path / "bad.csv").write_text("x,y,t\n45.0,5.0,1.0\n")
    proc = invoke_process(
        ["--project", str(tmp_path / "p.json"), "ingest",
         "--points", str(tmp_path / "bad.csv"), "--window", str(win),
         "--tlim", "0,20"],
        tmp_path,
    )
    assert proc.returncode == 1
    err = json.loads(proc.stderr.strip().splitlines()[-1])
    assert err["error"] == "PointOutsideWindowError"
    assert "line 2" in err["message"]


def test_predict_time_errors_are_typed(pipeline):
    runner, project = pipeline["runner"], pipeline["project"]
    result = runner.invoke(cli, [
        "--project", str(project), "predict", "--T", "20", "--laglength", "25",
        "--mala-length", "100", "--burnin", "10",
    ])
    assert result.exit_code == 1
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "TimeIndexError"


def test_missing_stage_is_reported(tmp_path, runner):
    result = runner.invoke(cli, ["--project", str(tmp_path / "p.json"), "mu"])
    assert result.exit_code == 1
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"
    assert "ingest" in err["message"]
