import math

import numpy as np
import pytest

from app.core.config import settings
from app.core.errors import DegenerateBreakdownError, FitError, InvalidParameterError
from app.models import PptProblem, SystemParams
from app.models.numerics import contour_derivative
from app.services.effham_service import effham_service
from app.services.numerics_service import numerics_service
from app.services.rate_service import rate_service
from app.services.spectra_service import spectra_service

ROOTS = np.array([0.0, 1.0 + 0.5j, -1.0 - 0.2j])
QUADRATIC = np.array([1.0, 0.3, 0.7])


def _ppt_error(eps: float) -> float:
    problem = PptProblem(
        unperturbed_roots=ROOTS,
        perturbation=lambda z: eps * np.polyval(QUADRATIC, z),
        derivative=lambda z: eps * np.polyval(np.polyder(QUADRATIC), z),
    )
    corrected = ROOTS + numerics_service.ppt_corrections(problem)
    exact = np.roots(np.poly(ROOTS) + eps * np.concatenate([[0.0], QUADRATIC]))
    return float(sum(np.min(np.abs(exact - root)) for root in corrected))


def test_contour_derivative_of_cubic():
    assert contour_derivative(lambda z: z ** 3 - 2 * z, 0.5 + 0.1j, 1e-3) == pytest.approx(3 * (0.5 + 0.1j) ** 2 - 2)


def test_ppt_error_is_second_order():
    assert _ppt_error(1e-3) / _ppt_error(5e-4) == pytest.approx(4.0, rel=0.2)


def _random_cubic(rng, min_separation: float = 0.1):
    while True:
        roots = rng.uniform(-1.0, 1.0, 3) + 1j * rng.uniform(-1.0, 1.0, 3)
        gaps = [abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1:]]
        if min(gaps) > min_separation:
            return roots, rng.normal(size=3) + 1j * rng.normal(size=3)


def _random_ppt_error(roots, quadratic, eps: float) -> float:
    problem = PptProblem(
        unperturbed_roots=roots,
        perturbation=lambda z: eps * np.polyval(quadratic, z),
        derivative=lambda z: eps * np.polyval(np.polyder(quadratic), z),
    )
    corrected = roots + numerics_service.ppt_corrections(problem)
    exact = np.roots(np.poly(roots) + eps * np.concatenate([[0.0], quadratic]))
    return float(sum(np.min(np.abs(exact - root)) for root in corrected))


def test_ppt_error_is_second_order_on_random_cubics():
    rng = np.random.default_rng(20240517)
    for _ in range(100):
        roots, quadratic = _random_cubic(rng)
        ratio = _random_ppt_error(roots, quadratic, 1e-5) / _random_ppt_error(roots, quadratic, 5e-6)
        assert ratio == pytest.approx(4.0, rel=0.2)


def test_ppt_contour_fallback_matches_analytic_derivative():
    analytic = PptProblem(
        unperturbed_roots=ROOTS,
        perturbation=lambda z: 1e-3 * np.polyval(QUADRATIC, z),
        derivative=lambda z: 1e-3 * np.polyval(np.polyder(QUADRATIC), z),
    )
    numeric = PptProblem(unperturbed_roots=ROOTS, perturbation=analytic.perturbation)
    np.testing.assert_allclose(
        numerics_service.ppt_corrections(numeric), numerics_service.ppt_corrections(analytic), rtol=1e-9
    )


def test_inconsistent_derivative_rejected():
    with pytest.raises(ValueError):
        PptProblem(unperturbed_roots=ROOTS, perturbation=lambda z: z, derivative=lambda z: 2.0)


def test_degenerate_roots_break_down():
    problem = PptProblem(unperturbed_roots=[1.0, 1.0], perturbation=lambda z: 1e-3, derivative=lambda z: 0.0)
    with pytest.raises(DegenerateBreakdownError) as info:
        numerics_service.ppt_corrections(problem)
    assert info.value.root_index == 0


def test_ppt_relaxation_rate_in_thermodynamic_limit():
    count = 1_000_000_000_000
    params = SystemParams(
        cavity_energy=1.0, emitter_center=1.0, coupling=math.sqrt(0.002 / count), emitter_count=count, disorder_width=0.04
    )
    for energy in (0.9375, 0.97, 1.025):
        assert numerics_service.ppt_relaxation_rate(energy, params) == pytest.approx(
            rate_service.relaxation_rate(energy, params).value, rel=1e-8
        )


def _esm_error(count: int, include_tail: bool = True) -> float:
    spacing = 10.0 / count
    positions = -5.0 + (np.arange(count) + 0.5) * spacing

    def target(z):
        return 1.0 / (z + 0.1)

    expansion = numerics_service.esm_expand(target, positions, lambda e: np.full_like(e, 1.0 / spacing))
    # 1.75e-3 eV off the imaginary axis the pole sum is smooth at either pole count; on-axis values are
    # checked between poles in test_esm_reconstruction_on_axis
    z = 1j * np.linspace(-1.0, 1.0, 41) + 1.75e-3
    reconstructed = numerics_service.esm_reconstruct(expansion, z, include_tail=include_tail)
    return float(np.max(np.abs(reconstructed - target(z))))


def test_esm_reconstruction():
    error = _esm_error(10_000)
    assert error < 2e-3
    assert _esm_error(10_000, include_tail=False) > error
    assert _esm_error(100_000) <= error


def test_fit_recovers_single_pole_rate():
    gamma = 3e-5

    def greens(z):
        return 1.0 / (z + 1j * 0.97 + gamma / 2)

    assert numerics_service.fit_rate_from_greens(greens, 0.97, 1e-4) == pytest.approx(gamma, rel=1e-9)
    with pytest.raises(InvalidParameterError):
        numerics_service.fit_rate_from_greens(greens, 0.97, 0.0)
    with pytest.raises(FitError):
        numerics_service.fit_rate_from_greens(lambda z: 0.0, 0.97, 1e-4)


def test_default_fit_offset(resonant_params):
    density = spectra_service.total_dos(0.97, resonant_params)
    natural = math.sqrt(resonant_params.rabi_frequency / density)
    cap = settings.FIT_OFFSET_POLE_FRACTION * numerics_service.pole_distance(resonant_params, 0.97)
    assert numerics_service.default_fit_offset(resonant_params, 0.97) == pytest.approx(min(natural, cap))


def test_default_fit_offset_capped_by_narrow_pole():
    params = SystemParams(cavity_energy=1.0, emitter_center=1.0, coupling=0.001, emitter_count=2000, disorder_width=0.15)
    pair = effham_service.eigenenergies(params)
    cap = settings.FIT_OFFSET_POLE_FRACTION * min(abs(1.0 - pair.eps1), abs(1.0 - pair.eps2))
    density = spectra_service.total_dos(1.0, params)
    assert math.sqrt(params.rabi_frequency / density) > cap
    assert numerics_service.default_fit_offset(params, 1.0) == pytest.approx(cap)


def test_acceptor_pole(reservoir):
    # [[E_N, g_R], [g_R, E_R - i Sigma]] with E_N = E_R = 1: 1 - iy with y (1 - y) = g_R^2
    narrow = 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * 0.04))
    assert numerics_service.acceptor_pole(reservoir) == pytest.approx(1.0 - 1j * narrow, abs=1e-12)
    decoupled = reservoir.model_copy(update={"reservoir_coupling": 0.0})
    assert numerics_service.acceptor_pole(decoupled) == pytest.approx(1.0 - 1.0j)


def test_pole_distance_includes_acceptor(resonant_params, reservoir):
    polaritons = numerics_service.pole_distance(resonant_params, 1.0)
    assert polaritons == pytest.approx(abs(1.0 - (0.96 - 0.02j)), rel=1e-6)
    assert numerics_service.pole_distance(resonant_params, 1.0, reservoir) < polaritons


@pytest.mark.parametrize("sigma,energy", [(0.15, 1.0), (0.04, 0.9375), (0.3, 1.025)])
def test_fit_plateau_around_default_offset(sigma, energy):
    params = SystemParams(cavity_energy=1.0, emitter_center=1.0, coupling=0.001, emitter_count=2000, disorder_width=sigma)
    offset = numerics_service.default_fit_offset(params, energy)
    fits = [numerics_service.expected_fit_rate(params, energy, scale * offset) for scale in (0.5, 1.0, 2.0)]
    assert max(fits) / min(fits) - 1.0 < 0.02
    assert fits[1] == pytest.approx(rate_service.relaxation_rate(energy, params).value, rel=0.02)


def test_expected_fit_rate_without_extrapolation_is_smoothed(resonant_params):
    exact = rate_service.relaxation_rate(0.96, resonant_params).value
    raw = numerics_service.expected_fit_rate(resonant_params, 0.96, 5e-3, extrapolate=False)
    combined = numerics_service.expected_fit_rate(resonant_params, 0.96, 5e-3)
    assert abs(combined - exact) < abs(raw - exact)


def test_default_fit_offset_needs_disorder(resonant_params):
    with pytest.raises(InvalidParameterError):
        numerics_service.default_fit_offset(resonant_params.model_copy(update={"disorder_width": 0.0}), 1.0)


def test_esm_reconstruction_on_axis():
    count = 10_000
    spacing = 10.0 / count
    positions = -5.0 + (np.arange(count) + 0.5) * spacing

    def target(z):
        return 1.0 / (z + 0.1)

    expansion = numerics_service.esm_expand(target, positions, lambda e: np.full_like(e, 1.0 / spacing))
    # midpoints between poles; E = 0 is skipped because the tail term divides by iz
    steps = np.arange(4000, 6001, 50)
    energies = -5.0 + steps[steps != 5000] * spacing
    assert numerics_service.kramers_kronig_residual(expansion, target, energies, 0.0) < 2e-3


def test_transport_esm_weights_are_cavity_fractions(resonant_params):
    energies = np.array([0.95, 0.99, 1.0, 1.03])
    expansion = numerics_service.transport_esm_expansion(resonant_params, energies)
    weights = expansion.coefficients[::-1]
    expected = spectra_service.cavity_ldos(energies, resonant_params) / spectra_service.total_dos(energies, resonant_params)
    np.testing.assert_allclose(weights, expected, rtol=1e-9)


@pytest.mark.parametrize("coupling", [0.2, 0.0])
def test_transport_ppt_rates_match_transport_rate(resonant_params, reservoir, coupling):
    reservoir = reservoir.model_copy(update={"reservoir_coupling": coupling})
    energies = [1.03, 0.95, 1.0, 0.99]
    rates = numerics_service.transport_ppt_rates(resonant_params, reservoir, energies)
    np.testing.assert_allclose(rates.grid, sorted(energies))
    expected = [rate_service.transport_rate(e, resonant_params, reservoir).value for e in sorted(energies)]
    np.testing.assert_allclose(rates["Gamma"], expected, rtol=1e-9)
