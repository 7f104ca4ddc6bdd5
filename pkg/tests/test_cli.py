import csv
import io
import json
import shutil
import subprocess

import numpy as np
import pytest

from relunet import realize
from relunet.calculus import identity_network, linear_network
from relunet.cli import main
from relunet.codec import code_length
from relunet.network import load_json, save_json, validate
from relunet.primitives import heaviside_network, sawtooth_network


def run(capsys, *args):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out.strip(), err.strip()


def fields(line):
    return dict(kv.split("=") for kv in line.split())


@pytest.fixture
def spec(tmp_path):
    def write(obj, name="spec.json"):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return path
    return write


def test_build_half_cube(capsys, spec, tmp_path):
    out = tmp_path / "net.json"
    code, line, _ = run(capsys, "build", spec({"kind": "half_cube", "dim": 2}), "--eps", 0.1,
                        "--out", out)
    assert code == 0
    assert validate(load_json(out)) == []
    assert set(fields(line)) == {"depth", "M", "N", "s"}


def test_build_multiplication_depth(capsys, spec):
    code, line, _ = run(capsys, "build", spec({"kind": "multiplication", "M": 2}), "--eps", 0.01,
                        "--depth-param", 2)
    assert code == 0 and fields(line)["depth"] == "12"


def test_build_rejects_eps(capsys, spec):
    code, out, err = run(capsys, "build", spec({"kind": "half_cube"}), "--eps", 0.9)
    assert code != 0 and out == ""
    assert "eps must be in (0, 0.5)" in err and err.startswith("error: ")
    assert len(err.splitlines()) == 1
    code, _, err = run(capsys, "build", spec({"kind": "bogus"}), "--eps", 0.1)
    assert code != 0 and "unknown target kind" in err


def test_eval(capsys, tmp_path):
    path = tmp_path / "id.json"
    save_json(identity_network(2, 3), path)
    code, out, _ = run(capsys, "eval", path, "1,2")
    assert code == 0 and [float(v) for v in out.split(",")] == [1.0, 2.0]
    save_json(heaviside_network(2, 0.5), path)
    code, out, _ = run(capsys, "eval", path, "0.25,0")
    assert float(out) == 0.5
    code, _, err = run(capsys, "eval", path, "0.25")
    assert code != 0 and "dimension" in err


def test_sweep(capsys, spec, tmp_path):
    s = spec({"kind": "trigonometric", "dim": 1, "amplitude": 0.101321183642338, "beta": 2.0})
    out = tmp_path / "sweep.csv"
    eps = ",".join(str(2.0 ** -k) for k in range(2, 7))
    code, _, _ = run(capsys, "sweep", s, "--eps-list", eps, "--resolution", 1024, "--out", out)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 6 and rows[-1]["target_name"] == "fit"
    assert len({r["depth"] for r in rows[:-1]}) == 1
    for r in rows[:-1]:
        assert float(r["measured_error"]) <= float(r["eps"])
    assert float(rows[-1]["fitted_slope"]) <= 0.5 + 0.25


def test_sweep_horizon_slope(capsys, spec):
    s = spec({"kind": "horizon_sinusoidal", "dim": 2, "amplitude": 0.2, "beta": 2.0})
    code, out, _ = run(capsys, "sweep", s, "--eps-list", "0.2,0.1,0.05", "--resolution", 64)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[-1]["fitted_slope"]) <= 2 * (2 - 1) / 2.0 + 0.25


def test_sweep_needs_three_points(capsys, spec):
    code, _, err = run(capsys, "sweep", spec({"kind": "half_cube"}), "--eps-list", "0.1")
    assert code != 0 and err == "error: need ≥3 points"


def test_encode_decode_roundtrip(capsys, spec, tmp_path):
    net_path, nnc, back = tmp_path / "n.json", tmp_path / "n.nnc", tmp_path / "b.json"
    run(capsys, "build", spec({"kind": "multiplication", "M": 1}), "--eps", 0.1, "--out", net_path)
    code, line, _ = run(capsys, "encode", net_path, "--out", nnc)
    assert code == 0
    f = {k: int(v) for k, v in fields(line).items()}
    assert f["length"] <= f["C"] * f["M"] * (f["K"] + (f["M"] - 1).bit_length())
    assert f["length"] == code_length(f["M"], f["K"], f["d"])
    code, _, _ = run(capsys, "decode", nnc, "--out", back)
    assert code == 0
    X = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
    assert np.array_equal(realize(load_json(back), X), realize(load_json(net_path), X))
    code, _, err = run(capsys, "encode", net_path, "--out", nnc, "--K", 3)
    assert code != 0 and ("range" in err or "grid" in err)


def test_pieces(capsys, tmp_path):
    path = tmp_path / "saw.json"
    save_json(sawtooth_network(4), path)
    code, line, _ = run(capsys, "pieces", path, "--domain", "0,1", "--num-slices", 3)
    f = fields(line)
    assert code == 0 and f["counted"] == "16" and float(f["bound"]) >= 16
    save_json(linear_network(np.array([[1.0, -1.0]]), np.array([0.2])), path)
    code, line, _ = run(capsys, "pieces", path)
    assert fields(line)["counted"] == "1"
    save_json(identity_network(2, 2), path)
    code, _, err = run(capsys, "pieces", path)
    assert code != 0 and "scalar" in err


def test_console_script():
    exe = shutil.which("relunet")
    if exe is None:
        pytest.skip("console script not installed")
    res = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "build" in res.stdout
