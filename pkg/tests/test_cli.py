import csv
import io
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from tfwater import cli, heat

GOLDEN = Path(__file__).parent / "golden"


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def assert_csv_matches(text, golden, rtol=1e-9):
    head, rows = read_csv(text)
    ghead, grows = read_csv(golden.read_text())
    assert head == ghead
    assert len(rows) == len(grows)
    for row, grow in zip(rows, grows):
        for v, g in zip(row, grow):
            try:
                fv, fg = float(v), float(g)
            except ValueError:
                assert v == g
                continue
            assert fv == pytest.approx(fg, rel=rtol, abs=1e-12)


@pytest.mark.parametrize("argv, name", [
    (["capacity", "--r", "1,2", "--snr", "1,100"], "capacity.csv"),
    (["rate", "--r", "1,2", "--sdr", "1,10"], "rate.csv"),
    (["eoc", "--gamma", "0.1,1", "--r", "2", "--format", "csv"], "eoc.csv"),
    (["szego", "--r", "1,2", "--format", "csv"], "szego.csv"),
])
def test_golden_csv(argv, name, capsys):
    code, out, err = run(argv, capsys)
    assert code == 0 and err == ""
    assert_csv_matches(out, GOLDEN / name)


def test_golden_simulate(capsys):
    argv = ["simulate", "--gamma", "0.1", "--r", "2", "--snr", "0.5", "--L", "4", "--trials", "100"]
    code, out, _ = run(argv, capsys)
    assert code == 0
    doc = json.loads(out)
    gold = json.loads((GOLDEN / "simulate.json").read_text())
    assert doc["config"] == gold["config"]
    assert set(doc["report"]) == set(gold["report"])
    for key in ("trials", "L", "K", "codebook_bits", "error_rates", "message_error_rate"):
        assert doc["report"][key] == gold["report"][key]
    np.testing.assert_allclose(doc["report"]["noise_vars"], gold["report"]["noise_vars"], rtol=1e-9)


def test_capacity_values(capsys):
    _, out, _ = run(["capacity", "--r", "2", "--snr", "100", "--gamma", "0.1"], capsys)
    _, rows = read_csv(out)
    assert float(rows[0][1]) == pytest.approx(15.72, rel=0.01)
    assert float(rows[0][3]) == pytest.approx(heat.closed_form_capacity(100, 2), rel=1e-15)


def test_capacity_small_snr(capsys):
    _, out, _ = run(["capacity", "--r", "1", "--snr", "1e-8"], capsys)
    _, rows = read_csv(out)
    assert all(abs(float(v)) < 1e-6 for v in rows[0][1:4])


def test_rate_sdr_one_is_zero(capsys):
    _, out, _ = run(["rate", "--r", "1,2,4", "--sdr", "1"], capsys)
    _, rows = read_csv(out)
    assert all(float(v) == 0.0 for row in rows for v in row[1:4])


def test_rate_reference(capsys):
    _, out, _ = run(["rate", "--r", "2", "--sdr", "10"], capsys)
    _, rows = read_csv(out)
    assert float(rows[0][1]) == pytest.approx(7.56, rel=0.05)


def test_seventeen_digits(capsys):
    _, out, _ = run(["eoc", "--format", "csv"], capsys)
    _, rows = read_csv(out)
    value = rows[0][2]
    assert float(value) == math.sqrt(2) * 2 * 0.1
    assert len(value.replace(".", "").lstrip("0")) == 17


def test_wvs_grid(capsys, tmp_path):
    out = tmp_path / "wvs.csv"
    code, _, _ = run(["wvs", "--r", "1", "--grid-n", "256", "--out", str(out)], capsys)
    assert code == 0
    head, rows = read_csv(out.read_text())
    assert head == ["t", "omega", "phi", "principal"]
    assert len(rows) == 256 * 512
    vals = np.array(rows, dtype=float)
    dt = vals[512, 0] - vals[0, 0]
    dw = vals[1, 1] - vals[0, 1]
    assert vals[:, 2].sum() * dt * dw == pytest.approx(0.5, rel=1e-4)


def test_json_echo(capsys):
    _, out, _ = run(["capacity", "--r", "1", "--format", "json", "--theta2", "0.5"], capsys)
    doc = json.loads(out)
    assert doc["schema_version"] == cli.SCHEMA_VERSION
    assert doc["command"] == "capacity"
    assert doc["config"]["theta2"] == 0.5
    assert doc["columns"][0] == "r" and len(doc["rows"]) == 1


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"r": [1, 2], "snr": 10, "theta2": 0.1}))
    _, out, _ = run(["capacity", "--config", str(cfg), "--r", "4", "--format", "json"], capsys)
    doc = json.loads(out)
    assert doc["config"]["r"] == [4.0]
    assert doc["config"]["snr"] == [10]
    assert doc["config"]["theta2"] == 0.1


def error_of(err):
    doc = json.loads(err)
    assert doc["schema_version"] == cli.SCHEMA_VERSION
    return doc["error"]


def test_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"r": [1], "bogus": 3}))
    code, out, err = run(["capacity", "--config", str(cfg)], capsys)
    assert code == 2 and out == ""
    assert "bogus" in error_of(err)["message"]


@pytest.mark.parametrize("argv", [
    ["capacity", "--r", "0.5"],
    ["capacity", "--L", "4"],
    ["rate", "--sdr", "0.5"],
    ["nonsense"],
    ["capacity", "--r", "x,y"],
    ["simulate", "--format", "csv"],
    ["capacity", "--config", "/nonexistent/c.json"],
])
def test_errors_are_json(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2 and out == ""
    assert error_of(err)["message"]


def test_atomic_write(tmp_path, capsys, monkeypatch):
    target = tmp_path / "out.csv"
    target.write_text("old\n")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", boom)
    code, _, _ = run(["eoc", "--format", "csv", "--out", str(target)], capsys)
    assert code == 2
    assert target.read_text() == "old\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["out.csv"]


def test_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["simulate", "--snr", "0.5", "--L", "4", "--trials", "50", "--seed", "3"]
    run(argv + ["--out", str(a)], capsys)
    run(argv + ["--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_pulse_train(tmp_path, capsys):
    pt = tmp_path / "train.csv"
    code, _, _ = run(["simulate", "--snr", "0.5", "--trials", "10", "--pulse-train-out", str(pt)], capsys)
    assert code == 0
    head, rows = read_csv(pt.read_text())
    assert head == ["t", "u", "P_r_u"]
    assert len(rows) == 4 * 256


def test_threads_env(monkeypatch, capsys):
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    assert run(["eoc"], capsys)[0] == 0
    monkeypatch.setenv(cli.THREADS_ENV, "zero")
    code, _, err = run(["eoc"], capsys)
    assert code == 2 and cli.THREADS_ENV in error_of(err)["message"]


def test_entry_point():
    env = dict(os.environ, TFWATER_THREADS="1")
    res = subprocess.run([sys.executable, "-m", "tfwater.cli", "eoc", "--format", "csv"],
                         capture_output=True, text=True, env=env, check=False)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "gamma,r,a,b,a_x,b_x,area_exact,r_lower_bound"
    res = subprocess.run([sys.executable, "-m", "tfwater.cli", "eoc", "--r", "0.1"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 2 and json.loads(res.stderr)["error"]
