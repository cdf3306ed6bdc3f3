import csv
import json
import logging

import pytest

import polariton_lab
from app.core.errors import FitError
from app.services.run_service import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, run_service


def _read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header = [line for line in lines if line.startswith("#")]
    rows = list(csv.reader(line for line in lines if not line.startswith("#")))
    return header, rows[0], rows[1:]


def test_eigs_sigma_sweep(tmp_path):
    out = tmp_path / "eigs.csv"
    status = polariton_lab.main(
        ["eigs", "--EC", "1", "--EM", "1", "--g", "0.001", "--N", "2000",
         "--sweep", "sigma", "0.001:0.2:200log", "--output", str(out)]
    )
    assert status == EXIT_OK
    header, columns, rows = _read_csv(out)
    assert columns == ["sigma", "re_eps1", "im_eps1", "re_eps2", "im_eps2", "regime"]
    assert len(rows) == 200
    assert rows[0][-1] == "Underdamped"
    assert rows[-1][-1] == "Overdamped"
    assert any(line.startswith("# config: ") for line in header)
    assert any(line.startswith("# seed: ") for line in header)


def test_reproduce_single_panel(tmp_path):
    out = tmp_path / "fig.csv"
    assert polariton_lab.main(["reproduce-fig", "3", "--panel", "a", "--output", str(out)]) == EXIT_OK
    _, columns, rows = _read_csv(out)
    assert columns == ["omega", "nu_C"]
    assert len(rows) == 2001


def test_unknown_figure_is_a_config_error(tmp_path):
    assert polariton_lab.main(["reproduce-fig", "9", "--output", str(tmp_path / "x.csv")]) == EXIT_INVALID


def test_malformed_config_file(tmp_path):
    config = tmp_path / "run.json"
    config.write_text('{"sigma": 0.04,,}', encoding="utf-8")
    out = tmp_path / "out.csv"
    assert polariton_lab.main(["spectra", "--config", str(config), "--output", str(out)]) == EXIT_INVALID
    assert not out.exists()


def test_unknown_config_key(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"sigmaa": 0.04}), encoding="utf-8")
    assert polariton_lab.main(["eigs", "--config", str(config), "--output", str(tmp_path / "o.csv")]) == EXIT_INVALID


def test_flag_overrides_config_file(tmp_path, caplog):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"sigma": 0.15}), encoding="utf-8")
    out = tmp_path / "eigs.csv"
    with caplog.at_level(logging.WARNING, logger="app.services.run_service"):
        status = polariton_lab.main(["eigs", "--config", str(config), "--sigma", "0.04", "--output", str(out)])
    assert status == EXIT_OK
    assert "overrides config file value" in caplog.text
    _, _, rows = _read_csv(out)
    assert float(rows[0][0]) == 0.04
    assert float(rows[0][1]) == pytest.approx(0.96)


def test_invalid_parameters_exit_two(tmp_path):
    out = tmp_path / "eigs.csv"
    assert polariton_lab.main(["eigs", "--N", "0", "--output", str(out)]) == EXIT_INVALID
    assert not out.exists()


def test_numerical_failure_exits_three(tmp_path, monkeypatch):
    def fail(config):
        raise FitError("singular fit", "ensemble.run_relaxation_ensemble")

    monkeypatch.setattr(run_service, "compute", fail)
    assert polariton_lab.main(["relax", "--output", str(tmp_path / "r.csv")]) == EXIT_NUMERIC


def test_flatten_round_trip():
    config = run_service.load_config(
        None, {"mode": "relax", "sigma": 0.15, "E1": 0.9375, "MS": 50, "sweep": {"axis": "N", "grid": "1:1000000:61log"}}
    )
    assert run_service.build(run_service.merge(run_service.flatten(config), {})) == config
    assert config.seed == run_service.settings.DEFAULT_SEED


def test_reruns_write_identical_data(tmp_path):
    outputs = []
    for name in ("first.csv", "second.csv"):
        out = tmp_path / name
        args = ["spectra", "--ensemble", "--N", "10", "--g", "0.01", "--MS", "8", "--seed", "3", "--output", str(out)]
        assert polariton_lab.main(args) == EXIT_OK
        outputs.append(_read_csv(out)[1:])
    assert outputs[0] == outputs[1]
    assert outputs[0][0] == ["omega", "ldos_ensemble", "ldos_stderr", "ldos_analytic"]


def test_json_output(tmp_path):
    out = tmp_path / "relax.json"
    status = polariton_lab.main(["relax", "--E1", "0.97", "--format", "json", "--output", str(out)])
    assert status == EXIT_OK
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["columns"] == ["sigma", "E1", "gamma", "tau", "gamma_avg"]
    assert document["header"]["config"]["E1"] == 0.97
    assert len(document["rows"]) == 1


def test_reproduce_panel_with_ensemble_columns(tmp_path):
    out = tmp_path / "fig.csv"
    argv = ["reproduce-fig", "3", "--panel", "a", "--ensemble", "--MS", "3", "--seed", "4", "--output", str(out)]
    assert polariton_lab.main(argv) == EXIT_OK
    _, columns, rows = _read_csv(out)
    assert columns == ["omega", "nu_C", "nu_C_ensemble", "nu_C_ensemble_stderr"]
    assert len(rows) == 2001


def test_transport_reports_root_shift_rate(tmp_path):
    out = tmp_path / "transport.csv"
    assert polariton_lab.main(["transport", "--E1", "0.98", "--gR", "0.2", "--output", str(out)]) == EXIT_OK
    _, columns, rows = _read_csv(out)
    assert "Gamma_ppt" in columns
    gamma = float(rows[0][columns.index("Gamma")])
    assert float(rows[0][columns.index("Gamma_ppt")]) == pytest.approx(gamma, rel=1e-9)
