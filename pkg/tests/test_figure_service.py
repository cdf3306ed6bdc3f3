import numpy as np
import pytest

from app.core.errors import ConfigError
from app.services import figure_service as figures
from app.services.figure_service import figure_service
from app.services.rate_service import rate_service


def _column(table, name):
    return np.array([row[table.columns.index(name)] for row in table.rows], dtype=np.float64)


def test_analytic_tables_have_no_ensemble_columns():
    (table,) = figure_service.reproduce("5", "a")
    assert not any(name.endswith("_ensemble") for name in table.columns)


def test_relaxation_vs_count_ensemble_columns(monkeypatch):
    monkeypatch.setattr(figures, "COUNT_GRID", (10, 1000, 3))
    (table,) = figure_service.reproduce("5", "a", threads=1, sample_count=4, seed=3)
    assert list(_column(table, "N")) == [10, 100, 1000]
    for energy in figures.DONOR_ENERGIES:
        values = _column(table, f"gamma_E1_{energy:g}_ensemble")
        assert values.shape == (3,)
        assert np.all(np.isfinite(values))
        assert np.all(_column(table, f"gamma_E1_{energy:g}_ensemble_stderr") >= 0.0)


def test_averaged_relaxation_ensemble_columns(monkeypatch):
    monkeypatch.setattr(figures, "SIGMA_GRID", (0.04, 0.15, 2))
    monkeypatch.setattr(figures, "EMITTER_COUNTS", (100,))
    (table,) = figure_service.reproduce("4", "c", threads=1, sample_count=200, seed=5)
    analytic = _column(table, "gamma_avg_N_100")
    ensemble = _column(table, "gamma_avg_N_100_ensemble")
    stderr = _column(table, "gamma_avg_N_100_ensemble_stderr")
    assert np.all(np.abs(ensemble - analytic) < 4 * stderr + 0.1 * analytic)
    assert analytic[0] == pytest.approx(
        rate_service.avg_relaxation_rate(figures.figure_params(False, 0.04, 100)).value
    )


def test_total_density_panel_uses_eigenvalue_histogram():
    (table,) = figure_service.reproduce("3", "c", sample_count=2, seed=1)
    assert table.columns == ["omega", "nu_total", "nu_total_ensemble", "nu_total_ensemble_stderr"]
    assert table.metadata["sample_count"] == 2
    omega = _column(table, "omega")
    counts = _column(table, "nu_total_ensemble") * 2 * (omega[1] - omega[0])
    assert np.allclose(counts, np.round(counts))
    assert np.sum(counts) <= 2 * 2001


def test_unknown_panel_is_a_config_error():
    with pytest.raises(ConfigError):
        figure_service.reproduce("6", "z")
