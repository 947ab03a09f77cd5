import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sdwb import cli, io
from sdwb.fields import CompoundPoissonMA, FactorModel, GaussianMatern, simulate
from sdwb.kernels import ExpKernelSum, MaternSpec
from sdwb.sampling import PiecewiseConstant, SamplingDesign, generate_sites


def write_panel(path, rows):
    lines = ["station_id,x,y,t,value"] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def grid_panel(n_st=3, times=(2000, 2001, 2002), value=lambda i, t: 0.0):
    return [(f"s{i}", float(i), float(-i), t, value(i, t)) for i in range(n_st) for t in times]


# -- panels ---------------------------------------------------------------------------


def test_log1p_examples(tmp_path):
    p = tmp_path / "zero.csv"
    write_panel(p, grid_panel())
    panel = io.ingest_panel(p, transform="log1p")
    assert np.array_equal(panel.values, np.zeros((3, 3)))
    write_panel(p, grid_panel(value=lambda i, t: math.e - 1))
    assert np.allclose(io.ingest_panel(p, transform="log1p").values, 1.0, rtol=1e-15)


def test_incomplete_station_dropped(tmp_path):
    rows = [r for r in grid_panel(n_st=4) if not (r[0] == "s2" and r[3] == 2001)]
    p = tmp_path / "gap.csv"
    write_panel(p, rows)
    panel = io.ingest_panel(p)
    assert panel.dropped == ("s2",)
    assert panel.station_ids == ("s0", "s1", "s3")
    # outside the window the gap does not matter
    assert io.ingest_panel(p, window=(2002, 2002)).dropped == ()


def test_missing_value_marker_drops(tmp_path):
    rows = grid_panel()
    rows[4] = (*rows[4][:4], "NA")
    p = tmp_path / "na.csv"
    write_panel(p, rows)
    assert io.ingest_panel(p).dropped == ("s1",)


def test_panel_errors(tmp_path):
    p = tmp_path / "bad.csv"
    write_panel(p, grid_panel(value=lambda i, t: -1.0 if (i, t) == (1, 2001) else 1.0))
    with pytest.raises(io.PanelError, match=r"rows \[6\]"):
        io.ingest_panel(p, transform="log1p")
    p.write_text("station_id,x,y,t,value\ns0,0,0,2000\n")
    with pytest.raises(io.PanelError, match=":2:"):
        io.ingest_panel(p)
    p.write_text("station_id,x,y,t,value\ns0,0,0,2000,oops\n")
    with pytest.raises(io.PanelError):
        io.ingest_panel(p)
    p.write_text("s,x,y,t,v\n")
    with pytest.raises(io.PanelError):
        io.ingest_panel(p)
    p.write_text("station_id,x,y,t,value\ns0,0,0,2000,1\ns0,0,0,2000,2\n")
    with pytest.raises(io.PanelError, match="duplicate"):
        io.ingest_panel(p)
    write_panel(p, [("a", 0, 0, 2000, 1), ("a", 0, 0, 2001, 1), ("b", 1, 1, 2000, 1), ("c", 2, 2, 2001, 1)])
    io.ingest_panel(p)  # station a is complete
    write_panel(p, [("b", 1, 1, 2000, 1), ("c", 2, 2, 2001, 1)])
    with pytest.raises(io.PanelError, match="no station"):
        io.ingest_panel(p)


def test_panel_to_field(tmp_path):
    p = tmp_path / "one.csv"
    write_panel(p, [("a", 3.0, 4.0, t, v) for t, v in [(2002, 3.0), (2000, 1.0), (2001, 2.0)]])
    panel = io.ingest_panel(p)
    y = io.panel_to_field(panel, 15.0)
    assert y.values.shape == (1, 3)
    assert np.array_equal(y.values[0], [1.0, 2.0, 3.0])
    assert np.array_equal(panel.times, [2000, 2001, 2002])


def test_panel_coordinates_must_fit(tmp_path):
    p = tmp_path / "wide.csv"
    write_panel(p, [("a", 0.0, 0.0, 1, 1.0), ("b", 40.0, 0.0, 1, 1.0)])
    with pytest.raises(io.PanelError, match="lambda_n"):
        io.panel_to_field(io.ingest_panel(p), 15.0)
    y = io.panel_to_field(io.ingest_panel(p), 40.0)
    assert np.allclose(y.sites.sites[:, 0], [-20.0, 20.0])


def test_panel_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    xy = rng.uniform(-5, 5, size=(6, 2))
    rows = [(f"s{i}", *xy[i], t, rng.exponential(2)) for i in range(6) for t in (1.5, 2.5, 4.0)]
    p = tmp_path / "p.csv"
    write_panel(p, rows)
    panel = io.ingest_panel(p)
    out = tmp_path / "q.csv"
    io.write_panel_csv(panel, out)
    back = io.ingest_panel(out)
    assert np.allclose(back.values, panel.values, rtol=1e-12)
    assert np.allclose(back.coords, panel.coords, rtol=1e-12)
    y = io.panel_to_field(back, 15.0)
    assert np.allclose(y.values, panel.values, rtol=1e-12)


# -- fields and configs --------------------------------------------------------------------


@pytest.mark.parametrize("long", [False, True])
def test_field_csv_round_trip(tmp_path, long):
    s = generate_sites(SamplingDesign(10.0), 15, seed=1)
    y = simulate(s, GaussianMatern(3), seed=2)
    path = tmp_path / "y.csv"
    io.write_field_csv(y, path, long=long)
    header = path.read_text().splitlines()[0]
    assert header == ("site_id,j,value" if long else "0,1,2")
    assert io.read_field_csv(path, s) == y


def test_model_and_design_round_trip():
    models = [
        GaussianMatern(3, MaternSpec(2.5, 0.4, 2.0), mean_shift=np.array([1.0, 0.0, -1.0])),
        CompoundPoissonMA(2, ExpKernelSum(((0.5, 2.0), (0.5, 4.0))), 1.5, truncation_scale=40.0),
        CompoundPoissonMA(1, MaternSpec(0.5, 1.0, 1.0)),
        FactorModel.random(4, k=2, seed=1, noise_sd=0.3),
    ]
    for m in models:
        d = json.loads(json.dumps(io.model_to_dict(m)))
        assert io.model_to_dict(io.model_from_dict(d)) == io.model_to_dict(m)
    designs = [
        SamplingDesign(25.0, kappa_inv=6.25),
        SamplingDesign(3.0, d=3, region=((0, 0, 0), (0.5, 0.5, 0.5))),
        SamplingDesign(5.0, density=PiecewiseConstant(np.array([[1.0, 2.0], [3.0, 4.0]]))),
    ]
    for design in designs:
        d = json.loads(json.dumps(io.design_to_dict(design)))
        assert io.design_from_dict(d) == design


def test_run_config_round_trip(tmp_path):
    cfg = io.RunConfig("ci", {"b": 5.0, "B": 1000, "tau": 0.05, "in": "y.csv", "seed": 7, "levels": [0.95, 0.99]})
    assert io.RunConfig.parse(cfg.render()) == cfg
    cfg.save(tmp_path / "c.json")
    assert io.RunConfig.load(tmp_path / "c.json") == cfg


# -- command line -------------------------------------------------------------------------


def run(argv, cwd):
    return subprocess.run([sys.executable, "-m", "sdwb", *argv], cwd=cwd, capture_output=True, text=True)


def test_cli_simulate_ci_byte_identical(tmp_path):
    for sub in ("a", "b"):
        d = tmp_path / sub
        d.mkdir()
        assert cli.main(["simulate", "--dgp", "matern", "--n", "100", "--p", "10", "--lambda", "25",
                         "--seed", "7", "--out", str(d / "y.csv")]) == 0
        assert cli.main(["ci", "--in", str(d / "y.csv"), "--sites", str(d / "y_sites.csv"), "--lambda", "25",
                         "--kernel", "bartlett", "--b", "5", "--B", "1000", "--tau", "0.05", "--seed", "7",
                         "--out", str(d / "ci.csv")]) == 0
    for name in ("y.csv", "y_sites.csv", "ci.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    lines = (tmp_path / "a" / "ci.csv").read_text().splitlines()
    assert lines[0] == "j,lower,estimate,upper" and len(lines) == 11


def test_cli_changepoint_and_config(tmp_path):
    rng = np.random.default_rng(0)
    rows = []
    for i in range(40):
        x, yc = rng.uniform(-7, 7, 2)
        for t in range(10):
            if i == 3 and t == 5:
                continue
            rows.append((f"st{i}", x, yc, 1990 + t, rng.exponential(2.0) + (20.0 if t >= 6 else 0.0)))
    write_panel(tmp_path / "panel.csv", rows)
    argv = ["changepoint", "--in", "panel.csv", "--transform", "log1p", "--kernel", "bartlett", "--b", "4",
            "--B", "1500", "--tau", "0.01", "--seed", "2", "--out", "cp.json", "--save-config", "conf/cp.json"]
    (tmp_path / "conf").mkdir()
    res = run(argv, tmp_path)
    assert res.returncode == 0, res.stderr
    assert "st3" in res.stderr
    out = json.loads((tmp_path / "cp.json").read_text())
    assert 6 in out["rejected"]
    assert out["dropped_stations"] == ["st3"]
    assert out["segments"][0][0] == 1 and out["segments"][-1][1] == 10
    first = (tmp_path / "cp.json").read_bytes()
    (tmp_path / "cp.json").unlink()
    # the saved config resolves paths against its own directory
    res = run(["changepoint", "--config", str(tmp_path / "conf" / "cp.json")], "/")
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "cp.json").read_bytes() == first


def test_cli_other_commands(tmp_path, capsys):
    assert cli.main(["limit-cov", "--dgp", "matern", "--n", "100", "--lambda", "25"]) == 0
    value = float(capsys.readouterr().out.strip().split(",")[1])
    assert value == pytest.approx(2 * math.pi / 3 + 6.25)
    assert cli.main(["psd-check", "--n", "20", "--lambda", "15", "--bandwidths", "0.01"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == "0.01,1,true"
    out = tmp_path / "cov.csv"
    assert cli.main(["coverage-study", "--R", "3", "--B", "100", "--bandwidths", "2", "--n", "30",
                     "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == ",".join(
        ["dgp", "n", "p", "lambda_n", "b", "level", "empirical_coverage", "mc_standard_error", "replications"]
    )
    manifest = json.loads(out.with_suffix(".json").read_text())
    assert manifest["replications"] == 3 and manifest["dgp"]["type"]
    fw = tmp_path / "fw.csv"
    assert cli.main(["fwer-study", "--R", "2", "--B", "100", "--bandwidths", "2", "--n", "30", "--levels", "0.95",
                     "--out", str(fw)]) == 0
    assert fw.read_text().splitlines()[1].split(",")[5] == "0.05"


def test_cli_errors_single_line(tmp_path):
    res = run(["ci", "--in", "missing.csv", "--sites", "missing.csv"], tmp_path)
    assert res.returncode != 0
    assert len(res.stderr.strip().splitlines()) == 1 and res.stderr.startswith("sdwb: error:")
    res = run(["coverage-study", "--p", "400", "--R", "1", "--out", "x.csv"], tmp_path)
    assert res.returncode != 0 and "allow_large_p" in res.stderr
    conf = tmp_path / "c.json"
    io.RunConfig("ci", {}).save(conf)
    assert cli.main(["simulate", "--config", str(conf), "--out", str(tmp_path / "z.csv")]) != 0
