import logging
import math

import pytest

from app.core.errors import InvalidParameterError
from app.core.validation import ensure_valid, require_disorder, validate, validate_reservoir
from app.models import ReservoirParams, SystemParams


def test_valid_params_have_no_errors(resonant_params):
    assert validate(resonant_params) == []


def test_every_violation_is_collected():
    params = SystemParams(cavity_energy=1.0, emitter_center=1.0, coupling=-0.1, emitter_count=0, disorder_width=-1.0)
    errors = validate(params)
    assert "coupling must be ≥ 0" in errors
    assert "emitter_count must be ≥ 1" in errors
    assert "disorder_width must be ≥ 0" in errors
    assert len(errors) == 3


def test_non_finite_values_are_reported():
    params = SystemParams(cavity_energy=math.nan, emitter_center=1.0, coupling=0.001, emitter_count=10, disorder_width=0.1)
    assert validate(params) == ["cavity_energy must be finite"]


def test_strong_collective_coupling_warns(caplog):
    params = SystemParams(cavity_energy=1.0, emitter_center=1.0, coupling=0.01, emitter_count=1_000_000, disorder_width=0.1)
    with caplog.at_level(logging.WARNING, logger="app.core.validation"):
        assert validate(params) == []
    assert "weak-coupling" in caplog.text


def test_ensure_valid_raises_with_list():
    params = SystemParams(cavity_energy=1.0, emitter_center=1.0, coupling=-1.0, emitter_count=0, disorder_width=0.1)
    with pytest.raises(InvalidParameterError) as info:
        ensure_valid(params, "spectra.cavity_ldos")
    assert len(info.value.errors) == 2
    assert info.value.operation == "spectra.cavity_ldos"
    assert isinstance(info.value, ValueError)


def test_require_disorder_rejects_zero_width(resonant_params):
    with pytest.raises(InvalidParameterError, match="disorder_width must be > 0"):
        require_disorder(resonant_params.with_updates(disorder_width=0.0), "rates.relaxation_rate")


def test_reservoir_validation():
    reservoir = ReservoirParams(
        acceptor_energy=1.0, reservoir_center=1.0, reservoir_width=0.0, reservoir_coupling=-0.1, reservoir_mode_count=0
    )
    errors = validate_reservoir(reservoir)
    assert errors == [
        "reservoir_width must be > 0",
        "reservoir_coupling must be ≥ 0",
        "reservoir_mode_count must be ≥ 1",
    ]
