import json

import pytest

from simonscone.cli import (ConfigError, Table, csv_text, emit_files, format_cell, main,
                            validate_config)


def write(tmp_path, obj):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(obj))
    return p


# -- config -----------------------------------------------------------------

def test_defaults_only():
    cfg = validate_config("{}", "sweep")
    assert cfg.params.K == 8
    assert cfg.params.upsilon == 0.1
    assert cfg.solver.Z == 100
    assert cfg.solver.step == 0.005
    assert cfg.K_values == [float(k) for k in range(1, 11)]
    assert cfg.seeds == list(range(20))


def test_upsilon_zero():
    with pytest.raises(ConfigError) as info:
        validate_config('{"params": {"upsilon": 0}}', "sweep")
    assert "params.upsilon must be positive" in info.value.violations


def test_step_too_coarse():
    with pytest.raises(ConfigError) as info:
        validate_config('{"solver": {"step": 0.2}}', "sweep")
    assert info.value.violations == ["solver.step must be at most 0.1"]


def test_grid_not_integral():
    with pytest.raises(ConfigError) as info:
        validate_config('{"solver": {"Z": 10, "step": 0.003}}', "sweep")
    assert any("Z/step" in v for v in info.value.violations)


def test_several_violations():
    with pytest.raises(ConfigError) as info:
        validate_config('{"params": {"upsilon": -1}, "K_values": [], "colour": 3}', "sweep")
    assert len(info.value.violations) == 3


def test_bad_json():
    with pytest.raises(ConfigError):
        validate_config("{nope", "sweep")


def test_command_mismatch():
    with pytest.raises(ConfigError):
        validate_config('{"command": "compare"}', "sweep")


# -- CSV --------------------------------------------------------------------

def test_cells():
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell(True) == "true"
    assert format_cell(3) == "3"
    assert format_cell(None) == ""


def test_csv_text():
    text = csv_text(Table("t", ["a", "b"], [[1, 2.5], [2, 1 / 3]]))
    assert text == "a,b\n1,2.5\n2,0.33333333333333331\n"


def test_emit_atomic(tmp_path):
    from simonscone.cli import Report
    rep = Report("sweep", {}, [Table("sweep", ["K"], [[1.0]])])
    written = emit_files(rep, tmp_path)
    assert sorted(p.name for p in written) == ["report.json", "sweep.csv"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["report.json", "sweep.csv"]
    assert (tmp_path / "sweep.csv").read_bytes() == b"K\n1\n"


# -- end to end -------------------------------------------------------------

def test_sweep_run(tmp_path):
    cfg = write(tmp_path, {"K_values": [3, 1, 8]})
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("K,delta1_closed,delta1_fd,mu1")
    assert [l.split(",")[0] for l in lines[1:]] == ["1", "3", "8"]
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and rep["command"] == "sweep"
    assert b"\r" not in (out / "sweep.csv").read_bytes()


def test_deterministic(tmp_path):
    cfg = write(tmp_path, {"K_values": [2, 7]})
    main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "a")])
    main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_empty_k_list(tmp_path, capsys):
    cfg = write(tmp_path, {"K_values": []})
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    assert "K_values must not be empty" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_config(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "nope.json")]) == 3


def test_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write(tmp_path, {"K_values": [2]})
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(blocker / "sub")]) == 3


def test_check_failure_exit(tmp_path):
    # a shallow truncation lifts the K=1 eigenvalue far above 0
    cfg = write(tmp_path, {"K_values": [1], "solver": {"Z": 1, "step": 0.1}})
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 1


def test_compact_analog(tmp_path):
    cfg = write(tmp_path, {"kappa_values": [100]})
    out = tmp_path / "o"
    assert main(["compact-analog", "--config", str(cfg), "--out-dir", str(out)]) == 0
    header, row = (out / "compact_analog.csv").read_text().splitlines()
    assert header.startswith("kappa,delta1,asymptotic,deviation")
    assert row.startswith("100,10.06992910426")


def test_spectrum(tmp_path):
    out = tmp_path / "o"
    assert main(["spectrum", "--out-dir", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["summary"]["mu1"] == pytest.approx(0.25, abs=2e-3)


@pytest.mark.slow
def test_calibrate_and_compare(tmp_path):
    cfg = write(tmp_path, {"seeds": [0, 1, 2], "samples": 200})
    assert main(["calibrate", "--config", str(cfg), "--out-dir", str(tmp_path / "c")]) == 0
    assert main(["compare", "--config", str(cfg), "--out-dir", str(tmp_path / "m")]) == 0
    rows = (tmp_path / "m" / "minimality.csv").read_text().splitlines()
    assert len(rows) == 1 + 4
    assert len((tmp_path / "c" / "signband.csv").read_text().splitlines()) == 201
