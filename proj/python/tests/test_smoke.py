import math
import os
import subprocess
import sys

import pytest

import m3r


def test_quantize_table():
    assert m3r.quantize(float("nan")) == 255
    assert m3r.quantize(-5.0) == 0
    assert m3r.quantize(7.9) == 0
    assert m3r.quantize(8.0) == 8
    assert m3r.quantize(15.9) == 8
    assert m3r.quantize(16.0) == 16
    assert m3r.quantize(19.9) == 16
    assert m3r.quantize(20.0) == 20
    assert m3r.quantize(42.7) == 42
    assert m3r.quantize(69.9) == 69
    assert m3r.quantize(70.0) == 70
    assert m3r.quantize(95.0) == 70


def test_dequantize():
    value, ok = m3r.dequantize(35)
    assert ok and abs(value - 0.5) < 1e-7
    value, ok = m3r.dequantize(255)
    assert not ok and value == 0.0
    with pytest.raises(m3r.PipelineError):
        m3r.dequantize(12)


def test_zr_rainfall_monotone():
    rates = [m3r.zr_rainfall(z) for z in (0.0, 20.0, 40.0, 55.0)]
    assert all(b > a for a, b in zip(rates, rates[1:]))
    # dBZ 23.01.. corresponds to Z=200, i.e. 1 mm/hr with the defaults
    assert abs(m3r.zr_rainfall(10.0 * math.log10(200.0)) - 1.0) < 1e-9


def test_spline_fill_keeps_knots():
    ts = [0, 60, 120, 180, 240]
    vals = [1.0, float("nan"), 3.0, float("nan"), 0.5]
    out = m3r.spline_fill(ts, vals)
    assert out[0] == 1.0 and out[2] == 3.0 and out[4] == 0.5
    assert all(math.isfinite(v) for v in out)


def test_wind_round_trip():
    speed, direction = 12.5, 247.0
    u, v = m3r.wind_decompose(speed, direction)
    s2, d2 = m3r.wind_reconstitute(u, v)
    assert abs(s2 - speed) < 1e-9 and abs(d2 - direction) < 1e-9


def test_fill_precip_dry_is_zero():
    ts = [i * 300 for i in range(10)]
    vals = [0.0, 0.0, float("nan"), 0.0, 0.0, 0.0, float("nan"), 0.0, 0.0, 0.0]
    out = m3r.fill_precip(ts, vals)
    assert out == [0.0] * 10


def test_metrics_perfect_prediction():
    pred = [0.0, 1.0, 2.0, 5.0]
    rep = m3r.compute_metrics(pred, pred)
    assert rep["rmse"] == 0.0 and rep["mae"] == 0.0
    assert rep["r2"] == 1.0 and rep["cc"] == 1.0


@pytest.mark.skipif("M3R_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_pipeline(tmp_path):
    cli = os.environ["M3R_CLI"]
    scene = tmp_path / "scene"
    run = subprocess.run(
        [cli, "synth", "--out-dir", str(scene), "--steps", "60", "--seed", "7"],
        capture_output=True, text=True,
    )
    assert run.returncode == 0, run.stderr
    station = run.stdout.split("station_lat=")[1].split()[0]
    lon = run.stdout.split("station_lon=")[1].split()[0]

    frames = tmp_path / "frames.m3rf"
    out = subprocess.run(
        [cli, "ingest", "--in-dir", str(scene), "--out", str(frames),
         "--lat", station, "--lon", lon, "--roi", "16"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr

    filled = tmp_path / "filled.csv"
    out = subprocess.run(
        [cli, "fill", "--in", str(scene / "pws.csv"), "--out", str(filled)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr

    data = tmp_path / "events.m3rd"
    out = subprocess.run(
        [cli, "align", "--frames", str(frames), "--pws", str(filled),
         "--out", str(data)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr

    out = subprocess.run([cli, "audit", "--data", str(data)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "audit OK" in out.stdout

    summary = m3r.dataset_summary(str(data))
    assert summary["train"] + summary["test"] >= 1
    assert summary["frame_ny"] == 16 and summary["frame_nx"] == 16


def test_cli_rejects_unknown_config_key(tmp_path):
    if "M3R_CLI" not in os.environ:
        pytest.skip("CLI path not provided")
    cli = os.environ["M3R_CLI"]
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no.such.key=1\n")
    run = subprocess.run(
        [cli, "audit", "--data", "missing.m3rd", "--config", str(cfg)],
        capture_output=True, text=True,
    )
    assert run.returncode == 2, (run.returncode, run.stderr)
