import csv
import io
import json

import numpy as np
import pytest

from calogero.cli import RunConfig, main
from calogero.errors import ConfigError


def _write(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def _config(tmp_path, **kw):
    cfg = {"model": "A1-split", "initial": {"seed": 1}, "t_end": 0.2, "samples": 5,
           "dt": 0.01, "output_dir": str(tmp_path / "out"), "prefix": "run"}
    cfg.update(kw)
    return cfg


def test_simulate_writes_outputs_and_is_reproducible(tmp_path, capsys):
    path = _write(tmp_path, _config(tmp_path))
    assert main(["simulate", "-c", path]) == 0
    out = tmp_path / "out"
    first = {f.name: f.read_bytes() for f in out.iterdir()}
    assert set(first) == {"run_geodesic.csv", "run_rk4.csv", "run_report.json"}
    report = json.loads(first["run_report.json"])
    assert report["comparison"]["passed"] and report["exit_code"] == 0
    assert main(["simulate", "-c", path]) == 0
    assert first == {f.name: f.read_bytes() for f in out.iterdir()}
    rows = list(csv.DictReader(io.StringIO(first["run_rk4.csv"].decode())))
    assert len(rows) == 5 and rows[0]["solver"] == "rk4"
    capsys.readouterr()


def test_simulate_single_solver_with_descriptor(tmp_path):
    cfg = _config(tmp_path, model={"family": "A", "rank": 2, "form": "compact",
                                   "automorphism": "diagram"}, solver="geodesic")
    assert main(["simulate", "-c", _write(tmp_path, cfg)]) == 0
    assert sorted(f.name for f in (tmp_path / "out").iterdir()) == [
        "run_geodesic.csv", "run_report.json"]


def test_singular_initial_point_exits_3_without_files(tmp_path):
    cfg = _config(tmp_path, initial={"q": [0.0], "p": [1.0], "xi": [0.0, 1.0, 1.0]})
    assert main(["simulate", "-c", _write(tmp_path, cfg)]) == 3
    assert not (tmp_path / "out").exists()


def test_truncated_run_exits_3(tmp_path):
    cfg = _config(tmp_path, initial={"q": [1.0], "p": [-2.0], "xi": [0.0, 0.0, 0.0]},
                  t_end=1.0, samples=11, solver="rk4")
    assert main(["simulate", "-c", _write(tmp_path, cfg)]) == 3
    report = json.loads((tmp_path / "out" / "run_report.json").read_text())
    assert report["runs"]["rk4"]["truncated"]


@pytest.mark.parametrize("patch", [{"model": "Z9-split"}, {"bogus": 1}, {"solver": "euler"},
                                   {"dt": -1.0}, {"initial": {"q": [1.0]}},
                                   {"initial": {"q": [1.0], "p": [0.0], "xi": [1.0, 0, 0]}}])
def test_configuration_errors_exit_4(tmp_path, patch):
    assert main(["simulate", "-c", _write(tmp_path, _config(tmp_path, **patch))]) == 4


def test_missing_config_file(tmp_path):
    assert main(["simulate", "-c", str(tmp_path / "nope.json")]) == 4


def test_run_config_round_trip(tmp_path):
    cfg = RunConfig.from_dict(_config(tmp_path))
    assert RunConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ConfigError):
        RunConfig.from_json("{not json")


def test_verify_folding_suite(tmp_path, capsys):
    out = tmp_path / "verify.json"
    assert main(["verify", "--suite", "folding", "-o", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"] and report["failures"] == 0
    capsys.readouterr()


def test_verify_detects_corrupted_r(capsys):
    assert main(["verify", "--suite", "dynamics", "--samples", "2", "--corrupt-r"]) == 2
    report = json.loads(capsys.readouterr().out)
    assert any(c["check"] == "anomaly" and not c["passed"] for c in report["checks"])


def test_describe_operator_csv(tmp_path, capsys):
    path = tmp_path / "r.csv"
    assert main(["describe", "--model", "A2-split", "--q", "1.0,0.3",
                 "--operator-csv", str(path)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["R_K_block_max"] == 0.0
    rows = list(csv.reader(path.open()))
    assert len(rows) == 9 and len(rows[0]) == 8
    op = np.array(rows[1:], dtype=float)
    assert np.allclose(op[:, :2], 0.0)


def test_describe_bad_input(capsys):
    assert main(["describe", "--model", "A2-split", "--q", "a,b"]) == 4
    assert main(["describe", "--model", "nope"]) == 4
    assert main(["describe", "--model", "A2-split", "--q", "0,0"]) == 3
    capsys.readouterr()


def test_free_motion_config_has_zero_deviation(tmp_path, capsys):
    cfg = _config(tmp_path, initial={"q": [1.0], "p": [0.5], "xi": [0.0, 0.0, 0.0]})
    assert main(["simulate", "-c", _write(tmp_path, cfg)]) == 0
    report = json.loads((tmp_path / "out" / "run_report.json").read_text())
    assert max(report["comparison"]["deviations"].values()) < 1e-12
    capsys.readouterr()


def test_sl3_compact_diagram_config(tmp_path, capsys):
    cfg = _config(tmp_path, model="A2-compact-folded", t_end=1.0, samples=11, dt=1e-3)
    assert main(["simulate", "-c", _write(tmp_path, cfg)]) == 0
    report = json.loads((tmp_path / "out" / "run_report.json").read_text())
    assert report["comparison"]["deviations"]["eigenvalues"] < 1e-6
    capsys.readouterr()


def test_describe_reports_root_data(capsys):
    assert main(["describe", "--model", "A1-split"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["dim"] == 3 and info["positive_roots"] == [[1, -1]]
    assert main(["describe", "--model", "A3-split-folded"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert sorted(map(tuple, info["delta_plus"])) == [(0, 2), (1, -1), (1, 1), (2, 0)]
    assert sorted(map(tuple, info["gamma_plus"])) == [(1, -1), (1, 1)]
