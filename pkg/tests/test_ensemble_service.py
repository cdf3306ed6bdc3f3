import numpy as np
import pytest
from scipy.integrate import trapezoid

from app.core.errors import ContractError, InvalidParameterError
from app.models import (
    DonorMode,
    EnsembleConfig,
    Provenance,
    RateKind,
    RateResult,
    ReservoirParams,
    SiteIndex,
    SystemParams,
    TransportSelection,
)
from app.services.ensemble_service import ensemble_service
from app.services.numerics_service import numerics_service
from app.services.rate_service import rate_service
from app.services.spectra_service import spectra_service


def test_auto_sample_count():
    assert ensemble_service.auto_sample_count(2000) == 500
    assert ensemble_service.auto_sample_count(10_000_000) == 2


def test_draw_sample_is_reproducible(small_params):
    cfg = EnsembleConfig(params=small_params, sample_count=4, base_seed=11)
    first = ensemble_service.draw_sample(cfg, 2)
    assert np.array_equal(first.energies, ensemble_service.draw_sample(cfg, 2).energies)
    assert not np.array_equal(first.energies, ensemble_service.draw_sample(cfg, 3).energies)


def test_spectrum_ensemble_matches_broadened_average():
    params = SystemParams(cavity_energy=1.0, emitter_center=1.0, coupling=0.01, emitter_count=10, disorder_width=0.05)
    cfg = EnsembleConfig(params=params, sample_count=400, base_seed=3)
    grid = np.linspace(0.85, 1.15, 41)
    spectrum = ensemble_service.run_spectrum_ensemble(cfg, SiteIndex.cavity(), grid, 0.02)
    expected = spectra_service.broadened_ldos(SiteIndex.cavity(), grid, params, 0.02)
    deviation = np.abs(spectrum["ldos"] - expected)
    assert np.all(deviation <= 5 * spectrum["ldos_stderr"] + 0.05)
    assert spectrum.metadata["sample_count"] == 400


def test_results_do_not_depend_on_thread_count(small_params):
    grid = np.linspace(0.9, 1.1, 21)
    runs = [
        ensemble_service.run_spectrum_ensemble(
            EnsembleConfig(params=small_params, sample_count=16, base_seed=5, threads=threads),
            SiteIndex.cavity(), grid, 0.01,
        )
        for threads in (1, 4)
    ]
    assert np.array_equal(runs[0]["ldos"], runs[1]["ldos"])
    assert np.array_equal(runs[0]["ldos_stderr"], runs[1]["ldos_stderr"])


def test_eigenvalue_histogram_follows_total_density(resonant_params):
    params = resonant_params.with_updates(emitter_count=1000)
    cfg = EnsembleConfig(params=params, sample_count=40, base_seed=1)
    edges = np.linspace(0.96, 1.04, 5)
    histogram = ensemble_service.run_eigenvalue_histogram(cfg, edges)
    expected = []
    for lower, upper in zip(edges[:-1], edges[1:]):
        fine = np.linspace(lower, upper, 401)
        expected.append(trapezoid(spectra_service.total_dos(fine, params), fine) / (upper - lower))
    np.testing.assert_allclose(histogram["density"], expected, rtol=0.06)
    assert histogram["counts"].sum() == pytest.approx(np.sum(histogram["density"] * 40 * 0.02))


@pytest.mark.slow
def test_pinned_relaxation_ensemble_matches_analytic_rate(resonant_params):
    params = resonant_params.with_updates(disorder_width=0.15)
    cfg = EnsembleConfig(params=params, sample_count=500, base_seed=2)
    result = ensemble_service.run_relaxation_ensemble(cfg, donor_energy=1.0)
    assert result.kind == RateKind.RELAX_ENERGY_RESOLVED
    assert result.provenance.sample_count + result.provenance.dropped == 500
    assert result.value == pytest.approx(rate_service.relaxation_rate(1.0, params).value, rel=0.1)


def test_transport_ensemble_smoke(resonant_params, reservoir):
    params = resonant_params.with_updates(emitter_count=20)
    cfg = EnsembleConfig(params=params, reservoir=reservoir, sample_count=4, base_seed=9, fit_offset=0.01)
    result = ensemble_service.run_transport_ensemble(cfg, donor_energy=1.0)
    assert result.kind == RateKind.TRANSPORT_ENERGY_RESOLVED
    assert np.isfinite(result.value)
    assert result.metadata["negative_mean"] == result.flagged == (result.value < 0)
    assert result.metadata["window"] == 0.01
    assert result.metadata["selection"] == "window"


def test_transport_matrix_layout(small_sample, small_params, reservoir):
    matrix = ensemble_service.transport_matrix(small_sample, small_params, reservoir)
    n = small_params.emitter_count
    assert matrix.shape == (n + 2, n + 2)
    assert matrix[n + 1, n + 1] == complex(1.0, -1.0)
    assert matrix[n, n + 1] == pytest.approx(0.2)
    assert matrix[0, n + 1] == 0.0
    np.testing.assert_array_equal(np.diag(matrix)[1:n + 1].real, small_sample.energies)


def test_ensemble_contract_errors(resonant_params, reservoir):
    cfg = EnsembleConfig(params=resonant_params, sample_count=4)
    with pytest.raises(ContractError):
        ensemble_service.run_relaxation_ensemble(cfg)
    with pytest.raises(ContractError):
        ensemble_service.run_transport_ensemble(cfg, donor_energy=1.0)
    with pytest.raises(ContractError):
        ensemble_service.run_transport_ensemble(cfg.model_copy(update={"reservoir": reservoir}))
    clean = cfg.model_copy(update={"params": resonant_params.with_updates(disorder_width=0.0)})
    with pytest.raises(InvalidParameterError):
        ensemble_service.run_relaxation_ensemble(clean, donor_energy=1.0)
    sampled = cfg.model_copy(update={"donor_mode": DonorMode.SAMPLED})
    assert sampled.donor_mode == DonorMode.SAMPLED


def test_config_rejects_single_sample(resonant_params):
    with pytest.raises(ValueError):
        EnsembleConfig(params=resonant_params, sample_count=1)


def test_compare_report():
    analytic = RateResult(value=1.0, kind=RateKind.RELAX_AVERAGED)
    ensemble = RateResult(
        value=1.05, kind=RateKind.RELAX_AVERAGED, provenance=Provenance.ensemble(100, 0.01, 0)
    )
    report = ensemble_service.compare(lambda: analytic, lambda: ensemble, 0.1)
    assert report.passed
    assert report.max_rel_dev == pytest.approx(0.05)
    failing = ensemble_service.compare(lambda x: x, lambda x: 2 * x, 0.5, points=[1.0, 2.0])
    assert not failing.passed
    assert failing.details["deviations"] == pytest.approx([1.0, 1.0])


@pytest.mark.slow
@pytest.mark.parametrize("sigma", [0.02, 0.04, 0.15, 0.3])
@pytest.mark.parametrize("donor", [0.9375, 1.025])
def test_relaxation_ensemble_over_sigma(resonant_params, donor, sigma):
    params = resonant_params.with_updates(disorder_width=sigma)
    cfg = EnsembleConfig(params=params, sample_count=500, base_seed=6)
    result = ensemble_service.run_relaxation_ensemble(cfg, donor_energy=donor)
    analytic = rate_service.relaxation_rate(donor, params).value
    assert result.value == pytest.approx(analytic, rel=0.1)
    assert result.metadata["fit_offset"] == pytest.approx(numerics_service.default_fit_offset(params, donor))
    assert result.metadata["expected_fit"] == pytest.approx(analytic, rel=0.02)


def test_negative_ensemble_mean_is_kept(small_params):
    cfg = EnsembleConfig(params=small_params, sample_count=3)
    mean, stderr, kept, dropped = ensemble_service._summarise([-1.0, -2.0, None, -3.0], cfg, "ensemble.test")
    assert mean == pytest.approx(-2.0)
    assert (kept, dropped) == (3, 1)
    flagged = RateResult(value=mean, kind=RateKind.RELAX_AVERAGED, provenance=Provenance.ensemble(kept, stderr, dropped))
    assert flagged.flagged
    assert flagged.inverse == float("inf")
    with pytest.raises(ValueError):
        RateResult(value=-1.0, kind=RateKind.RELAX_AVERAGED)


def test_transport_nearest_selection(resonant_params, reservoir):
    params = resonant_params.with_updates(emitter_count=20)
    cfg = EnsembleConfig(
        params=params, reservoir=reservoir, sample_count=4, base_seed=9, selection=TransportSelection.NEAREST
    )
    result = ensemble_service.run_transport_ensemble(cfg, donor_energy=1.0)
    assert result.value > 0.0
    assert result.metadata["selection"] == "nearest"


def test_sampled_transport_targets_are_reproducible(resonant_params, reservoir):
    params = resonant_params.with_updates(emitter_count=20)
    cfg = EnsembleConfig(
        params=params, reservoir=reservoir, sample_count=6, base_seed=13,
        donor_mode=DonorMode.SAMPLED, acceptor_mode=DonorMode.SAMPLED,
    )
    first = ensemble_service.run_transport_ensemble(cfg)
    assert first.kind == RateKind.TRANSPORT_AVERAGED
    assert first.value == ensemble_service.run_transport_ensemble(cfg).value
    assert first.value != ensemble_service.run_transport_ensemble(cfg.model_copy(update={"base_seed": 14})).value


@pytest.mark.slow
def test_resonant_transport_ensemble_matches_transport_rate(reservoir):
    params = SystemParams(cavity_energy=1.0, emitter_center=1.0, coupling=0.001, emitter_count=200, disorder_width=0.04)
    cfg = EnsembleConfig(params=params, reservoir=reservoir, sample_count=3000, base_seed=21)
    result = ensemble_service.run_transport_ensemble(cfg, donor_energy=1.0)
    analytic = rate_service.transport_rate(1.0, params, reservoir).value
    assert abs(result.value / analytic - 1.0) < 0.15
    assert result.metadata["window"] == pytest.approx(numerics_service.default_fit_offset(params, 1.0, reservoir))


@pytest.mark.slow
def test_sampled_transport_ensemble_matches_averaged_rate():
    params = SystemParams(cavity_energy=1.0, emitter_center=1.0, coupling=0.001, emitter_count=200, disorder_width=0.04)
    narrow = ReservoirParams(
        acceptor_energy=1.0, reservoir_center=1.0, reservoir_width=1.0, reservoir_coupling=0.03, reservoir_mode_count=1,
    )
    cfg = EnsembleConfig(
        params=params, reservoir=narrow, sample_count=4000, base_seed=22,
        donor_mode=DonorMode.SAMPLED, acceptor_mode=DonorMode.SAMPLED,
    )
    result = ensemble_service.run_transport_ensemble(cfg)
    expected = rate_service.avg_transport_rate(params).value
    # the acceptor LDOS is ~1e-3 eV wide, which widens the sampled acceptor line by a few percent of sigma
    assert abs(result.value - expected) < 3 * result.stderr + 0.06 * expected
