import csv
import json

import numpy as np
import pytest

from unravel.cli import main


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_json_output(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = _run(["run", "--model", "two-level", "--trajectories", "500", "--times", "0,0.5",
                       "--seed", "3", "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["resolved_rate"] == 2.0 and doc["rate_setting"] == "auto"
    assert doc["config"]["seed"] == 3 and doc["config"]["engine"] == "two-process"
    assert doc["version"].startswith("unravel v")
    assert [r["t"] for r in doc["results"]] == [0.0, 0.5]
    rho0 = np.array(doc["results"][0]["rho"])
    np.testing.assert_array_equal(rho0[..., 0], [[1, 0], [0, 0]])
    assert doc["audit"]["failures"] == 0


def test_run_csv_output(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, _, _ = _run(["run", "--model", "epr-decay", "--g", "0.5", "--trajectories", "300",
                       "--times", "0.5", "--format", "csv", "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    meta = json.loads(lines[0][2:])
    assert meta["config"]["model"]["preset"] == "epr-decay"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 9
    assert set(rows[0]) == {"t", "row", "col", "re", "im", "se_re", "se_im"}


def test_run_is_byte_reproducible(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["run", "--trajectories", "2000", "--seed", "42", "--workers", "1", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"preset": "two-level", "eps": 0.5, "delta": 1.0},
                               "initial": {"pure": [[0.6, 0], [0, 0.8]]}, "rate": 3.0,
                               "sample_times": [0.1, 0.2], "trajectories": 100, "seed": 1}))
    out = tmp_path / "o.json"
    assert main(["run", "--config", str(cfg), "--seed", "7", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["seed"] == 7
    assert doc["resolved_rate"] == 3.0
    assert doc["config"]["model"]["eps"] == 0.5


def test_model_file_run(tmp_path, capsys):
    model = tmp_path / "m.json"
    model.write_text(json.dumps({"dim": 2, "hbar": 1.0, "free_energies": [0, 1],
                                 "interaction": [[0, 1, 0.5, 0.0], [1, 0, 0.5, 0.0]]}))
    code, out, err = _run(["compare", "--model-file", str(model), "--initial", '{"basis": 0}',
                           "--trajectories", "20000", "--times", "0.5,1.0"], capsys)
    assert code == 0, err
    assert "frobenius_error" in out


def test_invalid_model_file_reports_position(tmp_path, capsys):
    model = tmp_path / "broken.json"
    model.write_text('{"dim": 2,\n "free_energies": [0, 1],\n "interaction": [[0, 1, 1, 0]\n}')
    code, _, err = _run(["run", "--model-file", str(model), "--initial", '{"basis": 0}'], capsys)
    assert code == 1
    assert "broken.json:4:1" in err


def test_non_hermitian_model_file_is_config_error(tmp_path, capsys):
    model = tmp_path / "nh.json"
    model.write_text(json.dumps({"dim": 2, "free_energies": [0, 0], "interaction": [[0, 1, 1.0, 0.0]]}))
    code, _, err = _run(["run", "--model-file", str(model), "--initial", '{"basis": 0}'], capsys)
    assert code == 1 and "Hermitian" in err


def test_bad_initial_is_config_error(capsys):
    code, _, err = _run(["run", "--initial", '{"pure": [[1, 0], [1, 0]]}'], capsys)
    assert code == 1 and "normalized" in err


def test_compare_free_dynamics_passes(capsys):
    code, out, err = _run(["compare", "--model", "random", "--dim", "3", "--model-seed", "4",
                           "--int-scale", "0", "--trajectories", "5", "--times", "0.5,2"], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()[1:]))
    assert all(float(r["frobenius_error"]) <= 1e-12 for r in rows)


def test_compare_two_level_passes(capsys):
    code, out, err = _run(["compare", "--model", "two-level", "--trajectories", "100000",
                           "--times", "0.25,0.5,1.0", "--seed", "5"], capsys)
    assert code == 0, err
    assert "PASS" in err


def test_compare_corrupted_jump_factor_fails(capsys):
    code, _, err = _run(["compare", "--model", "two-level", "--trajectories", "50000",
                         "--times", "0.5,1.0", "--debug-jump-scale", "0.8"], capsys)
    assert code == 2 and "FAIL" in err


def test_enumerate_t0(capsys):
    r = 1 / np.sqrt(2)
    code, out, _ = _run(["enumerate-t0", "--initial", json.dumps({"pure": [[r, 0], [r, 0]]})], capsys)
    assert code == 0
    doc = json.loads(out)
    np.testing.assert_allclose(np.array(doc["expected_dyad"])[..., 0], 0.5, atol=1e-15)
    assert doc["residual"] <= 1e-14
    code, out, _ = _run(["enumerate-t0", "--model", "epr-decay",
                         "--initial", json.dumps({"pure": [[0.6, 0], [0, 0.48], [0.64, 0]]})], capsys)
    assert code == 0 and json.loads(out)["residual"] <= 1e-14


def test_scan_markdown(capsys):
    code, out, _ = _run(["scan", "--model", "two-level", "--times", "0.5", "--m-list", "200,800"], capsys)
    assert code == 0
    assert out.count("| 200 |") == 1 and "slope" in out


def test_triplet_engine_output(tmp_path, capsys):
    out = tmp_path / "t.json"
    assert main(["run", "--engine", "triplet", "--trajectories", "1000", "--times", "0.5",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    ens = doc["compressed_ensembles"][0]
    assert ens["M"] == 1000 and len(ens["entries"]) <= 4


def test_workers_env_default(monkeypatch, tmp_path):
    monkeypatch.setenv("UNRAVEL_WORKERS", "2")
    out = tmp_path / "w.json"
    assert main(["run", "--trajectories", "100", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["config"]["workers"] == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"trajectoriez": 5}')
    code, _, err = _run(["run", "--config", str(cfg)], capsys)
    assert code == 1 and "trajectoriez" in err
