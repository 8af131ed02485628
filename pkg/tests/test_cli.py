import json
import subprocess
import sys

import pytest

from compresslearn.cli import main


def _config(tmp_path, **kw):
    obj = {"family": {"name": "Gaussian1D"}, "n": 800, "epsilon": 0.3, "trials": 2, "seed": 5}
    obj.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(obj))
    return str(path)


def test_simulate_json(tmp_path, capsys):
    assert main(["simulate", "--config", _config(tmp_path)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert len(rep["rows"]) == 2 and rep["config"]["seed"] == 5


def test_simulate_flags_override(tmp_path):
    out = tmp_path / "r.csv"
    code = main(["simulate", "--config", _config(tmp_path), "--trials", "1", "--seed", "9", "--format", "csv", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[1].split(",")[1] == "9"


def test_simulate_is_byte_stable(tmp_path, capsys):
    cfg = _config(tmp_path)
    main(["simulate", "--config", cfg, "--format", "csv"])
    first = capsys.readouterr().out
    main(["simulate", "--config", cfg, "--format", "csv"])
    assert capsys.readouterr().out == first


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["simulate"]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["simulate", "--config", _config(tmp_path, epsilon=3.0)]) == 2
    assert "config error" in capsys.readouterr().err


def test_sweep_json(tmp_path, capsys):
    assert main(["sweep", "--config", _config(tmp_path, trials=1), "--vary", "n", "--values", "400,800"]) == 0
    reps = json.loads(capsys.readouterr().out)
    assert [r["config"]["n"] for r in reps] == [400, 800]


def test_sweep_inapplicable_field(tmp_path):
    assert main(["sweep", "--config", _config(tmp_path), "--vary", "s", "--values", "1"]) == 2


def test_certify(capsys):
    code = main(["certify", "--family", "gaussian", "--alpha", "3", "--noise", "gaussian", "--bound-eps", "0.1"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["certificates"][0]["xi"] == pytest.approx(0.06284197427495214)
    assert out["l2_error_bound"] > 0


def test_certify_invalid_alpha():
    assert main(["certify", "--family", "gaussian", "--alpha", "1"]) == 2
    assert main(["certify", "--family", "kmix1d", "--alpha", "1"]) == 2


def test_waterfill(capsys):
    assert main(["waterfill", "--envelope", "constant", "--epsilon", "0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["l1_bound"] == pytest.approx(0.5)
    assert main(["waterfill", "--envelope", "constant", "--epsilon", "5"]) == 2


def test_selftest_passes(capsys):
    assert main(["selftest", "--trials", "3"]) == 0
    assert "guarantee failures" in capsys.readouterr().out


def test_selftest_exit_3_on_excess_failures(tmp_path):
    # an unattainable epsilon makes every trial miss
    cfg = _config(tmp_path, n=200, epsilon=0.001, trials=2)
    assert main(["selftest", "--config", cfg]) == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "compresslearn.cli", "waterfill", "--envelope", "constant", "--epsilon", "0.5"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["level"] == pytest.approx(0.5)
