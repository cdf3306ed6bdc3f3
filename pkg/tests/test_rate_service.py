import logging
import math

import numpy as np
import pytest

from app.core.errors import InvalidParameterError
from app.models import RateKind, RateResult
from app.services.rate_service import rate_service
from app.services.spectra_service import spectra_service


def test_relaxation_rate_is_coupled_cavity_ldos(resonant_params):
    rate = rate_service.relaxation_rate(0.97, resonant_params)
    assert rate.value == pytest.approx(1e-6 * spectra_service.cavity_ldos(0.97, resonant_params))
    assert rate.kind == RateKind.RELAX_ENERGY_RESOLVED
    assert rate.inverse == pytest.approx(1.0 / rate.value)


@pytest.mark.parametrize("sigma", [0.01, 0.04, 0.15, 0.6])
def test_averaged_rate_matches_quadrature(off_resonant_params, sigma):
    params = off_resonant_params.with_updates(disorder_width=sigma)
    closed = rate_service.avg_relaxation_rate(params).value
    assert rate_service.quadrature_avg_relaxation_rate(params) == pytest.approx(closed, rel=1e-6)


def test_averaged_rate_closed_form(resonant_params):
    s = 0.04 + 0.002 / 0.08
    expected = 1e-6 / math.pi / s
    assert rate_service.avg_relaxation_rate(resonant_params).value == pytest.approx(expected)


def test_resonant_transport_scales_as_inverse_square_at_large_n(resonant_params):
    def rate(n):
        return rate_service.resonant_transport_rate(1.0, resonant_params.with_updates(emitter_count=int(n)), 1.0).value

    assert rate_service.scaling_exponent(rate, np.geomspace(1e4, 1e5, 5)) == pytest.approx(-2.0, abs=0.01)
    assert abs(rate_service.scaling_exponent(rate, [1, 2, 4, 7, 10])) < 0.05


@pytest.mark.parametrize("sigmas", [np.geomspace(1e-4, 1e-3, 5), np.geomspace(1.0, 10.0, 5)])
def test_resonant_transport_sigma_plateaus(resonant_params, sigmas):
    def rate(sigma):
        return rate_service.resonant_transport_rate(0.9375, resonant_params.with_updates(disorder_width=sigma), 1.0).value

    assert abs(rate_service.scaling_exponent(rate, sigmas)) < 0.05


def test_transport_rate_uses_acceptor_ldos(resonant_params, reservoir):
    energy = 0.98
    expected = (
        1e-6
        * spectra_service.cavity_ldos(energy, resonant_params)
        * rate_service.acceptor_ldos(energy, reservoir)
        / spectra_service.total_dos(energy, resonant_params)
    )
    assert rate_service.transport_rate(energy, resonant_params, reservoir).value == pytest.approx(expected)
    thermodynamic = rate_service.transport_rate(energy, resonant_params, reservoir, thermodynamic=True)
    assert thermodynamic.metadata["thermodynamic_density"] is True


def test_decoupled_acceptor_is_reservoir_lorentzian(reservoir):
    decoupled = reservoir.model_copy(update={"reservoir_coupling": 0.0})
    expected = 1.0 / (math.pi * (0.5 ** 2 + 1.0))
    assert rate_service.acceptor_ldos(1.5, decoupled) == pytest.approx(expected)


def test_averaged_transport_rate_and_warning(resonant_params, caplog):
    gamma_bar = rate_service.avg_relaxation_rate(resonant_params).value
    assert rate_service.avg_transport_rate(resonant_params, 1).value == pytest.approx(gamma_bar / 2000)
    with caplog.at_level(logging.WARNING, logger="app.services.rate_service"):
        rate_service.avg_transport_rate(resonant_params, 300)
    assert "validity" in caplog.text
    with pytest.raises(InvalidParameterError):
        rate_service.avg_transport_rate(resonant_params, 0)


def test_zero_rate_has_infinite_inverse():
    assert RateResult(value=0.0, kind=RateKind.RELAX_AVERAGED).inverse == math.inf


def test_resonant_rate_rejects_negative_acceptor_density(resonant_params):
    with pytest.raises(InvalidParameterError):
        rate_service.resonant_transport_rate(1.0, resonant_params, -1.0)


@pytest.mark.parametrize("sigmas,slope", [(np.geomspace(1e-3, 1e-2, 6), 1.0), (np.geomspace(0.5, 5.0, 6), -1.0)])
def test_averaged_rate_sigma_scaling(resonant_params, sigmas, slope):
    def rate(sigma):
        return rate_service.avg_relaxation_rate(resonant_params.with_updates(disorder_width=sigma)).value

    assert rate_service.scaling_exponent(rate, sigmas) == pytest.approx(slope, abs=0.1)


@pytest.mark.parametrize("donor", [0.9375, 1.025])
@pytest.mark.parametrize("counts,slope", [(np.geomspace(1, 10, 5), 1.0), (np.geomspace(1e5, 1e6, 5), -1.0)])
def test_relaxation_rate_emitter_count_scaling(resonant_params, donor, counts, slope):
    def rate(n):
        return rate_service.relaxation_rate(donor, resonant_params.with_updates(emitter_count=int(round(n)))).value

    assert rate_service.scaling_exponent(rate, counts) == pytest.approx(slope, abs=0.1)
