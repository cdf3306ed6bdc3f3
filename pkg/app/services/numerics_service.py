"""Polynomial perturbation theory, exact stochastic mapping and the single-pole rate fit."""

import logging
import math
from typing import Callable, Optional

import numpy as np

from app.core.config import Settings, settings as default_settings
from app.core.errors import DegenerateBreakdownError, DomainError, FitError, InvalidParameterError
from app.core.validation import ensure_valid_reservoir, require_disorder
from app.models import EsmExpansion, PptProblem, ReservoirParams, Spectrum, SystemParams
from app.models.numerics import contour_derivative
from app.services.effham_service import EffectiveHamiltonianService, effham_service
from app.services.greens_service import GreensService, greens_service
from app.services.spectra_service import SpectraService, spectra_service

logger = logging.getLogger(__name__)

_TINY = np.finfo(np.float64).tiny


class NumericsService:
    def __init__(
        self,
        greens: Optional[GreensService] = None,
        spectra: Optional[SpectraService] = None,
        effham: Optional[EffectiveHamiltonianService] = None,
        config: Optional[Settings] = None,
    ):
        self.greens = greens or greens_service
        self.spectra = spectra or spectra_service
        self.effham = effham or effham_service
        self.settings = config or default_settings

    # ==================== PPT ====================

    def ppt_corrections(self, problem: PptProblem) -> np.ndarray:
        """delta_mu' = -P1(z') / (prod_{mu != mu'} (z' - z_mu) + P1'(z')) for every unperturbed root z'."""
        roots = problem.unperturbed_roots
        corrections = np.empty(roots.shape, dtype=np.complex128)
        for index, root in enumerate(roots):
            others = np.delete(roots, index)
            product = complex(np.prod(root - others)) if others.size else 1.0 + 0j
            if problem.derivative is not None:
                slope = complex(problem.derivative(root))
            else:
                slope = contour_derivative(problem.perturbation, complex(root), problem.contour_radius(root))
            denominator = product + slope
            if not np.isfinite(denominator) or abs(denominator) <= _TINY:
                raise DegenerateBreakdownError(index, "numerics.ppt_corrections")
            corrections[index] = -complex(problem.perturbation(complex(root))) / denominator
        return corrections

    def relaxation_ppt_problem(self, donor_energy: float, params: SystemParams) -> PptProblem:
        """Donor + cavity + averaged bright state: P0 = (z + iE1)(z + i eps1)(z + i eps2), P1 = g^2 (z + iE_M + sigma)."""
        require_disorder(params, "numerics.relaxation_ppt_problem")
        pair = self.effham.eigenenergies(params)
        g2 = params.coupling ** 2
        shift = 1j * params.emitter_center + params.disorder_width
        return PptProblem(
            unperturbed_roots=[-1j * pair.eps1, -1j * pair.eps2, -1j * donor_energy],
            perturbation=lambda z: g2 * (z + shift),
            derivative=lambda z: g2 + 0j,
        )

    def ppt_relaxation_rate(self, donor_energy: float, params: SystemParams) -> float:
        """-Re delta_3 / pi of the donor root."""
        corrections = self.ppt_corrections(self.relaxation_ppt_problem(donor_energy, params))
        return float(-corrections[2].real / math.pi)

    # ==================== ESM ====================

    def esm_expand(
        self,
        target: Callable[[complex], complex],
        pole_positions,
        density: Callable[[np.ndarray], np.ndarray],
        window: Optional[tuple] = None,
    ) -> EsmExpansion:
        """r_j = (1/pi) Im F(i E_j) / nu(E_j), with 1/E tail constants taken at the window edges."""
        positions = np.asarray(pole_positions, dtype=np.float64).reshape(-1)
        nu = np.asarray(density(positions), dtype=np.float64) * np.ones_like(positions)
        if np.any(~(nu > 0)):
            raise DomainError("pole density must be positive at every pole", "numerics.esm_expand")

        def imag_part(energy: float) -> float:
            return complex(target(1j * energy)).imag

        spectral = np.array([imag_part(e) for e in positions]) / np.pi
        coefficients = spectral / nu

        if window is None:
            first, last = int(np.argmin(positions)), int(np.argmax(positions))
            lower = positions[first] - 0.5 / nu[first]
            upper = positions[last] + 0.5 / nu[last]
        else:
            lower, upper = window
        lower_tail = lower * imag_part(lower) / np.pi if lower < 0 else 0.0
        upper_tail = upper * imag_part(upper) / np.pi if upper > 0 else 0.0
        logger.debug("ESM expansion: %d poles on [%.4g, %.4g]", positions.size, lower, upper)
        return EsmExpansion(
            pole_positions=positions,
            coefficients=coefficients,
            density=density,
            lower_edge=float(lower),
            upper_edge=float(upper),
            lower_tail=float(lower_tail),
            upper_tail=float(upper_tail),
        )

    def esm_reconstruct(self, expansion: EsmExpansion, z, include_tail: bool = True):
        """sum_j i r_j / (z - i E_j) plus the analytic contribution of the c/E tails outside the window."""
        z_array = np.asarray(z, dtype=np.complex128)
        a = (1j * z_array).reshape(-1)
        total = np.empty(a.shape, dtype=np.complex128)
        for start in range(0, a.size, 64):
            block = a[start:start + 64]
            total[start:start + 64] = -(1.0 / (expansion.pole_positions[None, :] + block[:, None])) @ expansion.coefficients
        if include_tail:
            upper, lower = expansion.upper_edge, expansion.lower_edge
            if expansion.upper_tail:
                total += -expansion.upper_tail / a * np.log((upper + a) / upper)
            if expansion.lower_tail:
                total += -expansion.lower_tail / a * np.log(lower / (lower + a))
        total = total.reshape(z_array.shape)
        return complex(total) if z_array.ndim == 0 else total

    def kramers_kronig_residual(self, expansion: EsmExpansion, target: Callable[[complex], complex],
                                energies, offset: float) -> float:
        """Largest |Re F - Re reconstruction| at z = i E + offset."""
        z = 1j * np.asarray(energies, dtype=np.float64) + offset
        exact = np.array([complex(target(v)) for v in z])
        return float(np.max(np.abs(exact.real - np.asarray(self.esm_reconstruct(expansion, z)).real)))

    def transport_esm_expansion(self, params: SystemParams, energies) -> EsmExpansion:
        """Expansion of i R_CC over poles at -E_mu with density nu; coefficients s_mu = nu_C(E_mu) / nu(E_mu)."""
        require_disorder(params, "numerics.transport_esm_expansion")
        mirrored = -np.sort(np.asarray(energies, dtype=np.float64))[::-1]

        def target(z: complex) -> complex:
            return 1j * self.greens.averaged_cavity_element(z, params)

        def density(positions: np.ndarray) -> np.ndarray:
            return np.asarray(self.spectra.total_dos(-np.asarray(positions), params))

        return self.esm_expand(target, mirrored, density)

    def transport_ppt_rates(self, params: SystemParams, reservoir: ReservoirParams, energies) -> Spectrum:
        """Gamma(E_mu) = -Re delta_mu / pi from the first-order shifts of the effective polynomial roots.

        delta_mu = -g^2 s_mu / (-iE_mu + iE_N + N_R g_R^2 / (-iE_mu + iE_R + Sigma)), with s_mu the ESM
        weights of the averaged cavity resolvent. A decoupled acceptor keeps the reservoir width Sigma.
        """
        operation = "numerics.transport_ppt_rates"
        reservoir = ensure_valid_reservoir(reservoir, operation)
        expansion = self.transport_esm_expansion(params, energies)
        levels = -expansion.pole_positions[::-1]
        weights = expansion.coefficients[::-1]
        z = -1j * levels
        if reservoir.reservoir_strength == 0:
            self_energy = reservoir.reservoir_width
        else:
            self_energy = reservoir.reservoir_strength / (z + 1j * reservoir.reservoir_center + reservoir.reservoir_width)
        shifts = -params.coupling ** 2 * weights / (z + 1j * reservoir.acceptor_energy + self_energy)
        return Spectrum(
            grid=levels,
            channels={"Gamma": -shifts.real / np.pi, "s": weights},
            metadata={"acceptor_energy": reservoir.acceptor_energy, "reservoir_strength": reservoir.reservoir_strength},
        )

    # ==================== RATE FIT ====================

    @staticmethod
    def fit_rate_from_greens(greens: Callable[[complex], complex], donor_energy: float, offset: float) -> float:
        """Re 2 (1 - (z + iE1) G(z)) / G(z) at z = -iE1 + delta: the occupation decay constant of a single pole."""
        if not offset > 0:
            raise InvalidParameterError("fit offset delta must be > 0", "numerics.fit_rate_from_greens")
        z = -1j * donor_energy + offset
        value = complex(greens(z))
        if value == 0 or not np.isfinite(value):
            raise FitError(f"G(z) = {value} at z = {z}", "numerics.fit_rate_from_greens")
        return float((2.0 * (1.0 / value - (z + 1j * donor_energy))).real)

    def expected_fit_rate(self, params: SystemParams, donor_energy: float, offset: float,
                          extrapolate: bool = True) -> float:
        """Disorder mean of the ensemble fit at `offset`, in the LDOS convention.

        Lorentzian averaging is exact for Re z > 0, so the mean per-sample fit equals the fit of the
        averaged donor element; it differs from relaxation_rate only by the smoothing of the window.
        """
        require_disorder(params, "numerics.expected_fit_rate")

        def greens(z: complex) -> complex:
            return self.greens.averaged_donor_element(z, donor_energy, params)

        near = self.fit_rate_from_greens(greens, donor_energy, offset)
        if not extrapolate:
            return near / (2.0 * math.pi)
        far = self.fit_rate_from_greens(greens, donor_energy, 2.0 * offset)
        return (2.0 * near - far) / (2.0 * math.pi)

    # ==================== OFFSETS ====================

    @staticmethod
    def acceptor_pole(reservoir: ReservoirParams) -> complex:
        """Narrower complex eigenvalue of the acceptor + effective reservoir mode block."""
        if reservoir.reservoir_strength == 0:
            return complex(reservoir.acceptor_energy, -reservoir.reservoir_width)
        mode = complex(reservoir.reservoir_center, -reservoir.reservoir_width)
        mean = 0.5 * (reservoir.acceptor_energy + mode)
        root = np.sqrt((0.5 * (reservoir.acceptor_energy - mode)) ** 2 + reservoir.reservoir_strength)
        return complex(min((mean + root, mean - root), key=lambda e: abs(e.imag)))

    def pole_distance(self, params: SystemParams, energy: float, reservoir: Optional[ReservoirParams] = None) -> float:
        """|E - eps| to the nearest polariton pole (and acceptor pole when a reservoir is given)."""
        pair = self.effham.eigenenergies(params)
        poles = [pair.eps1, pair.eps2]
        if reservoir is not None:
            poles.append(self.acceptor_pole(reservoir))
        return float(min(abs(energy - pole) for pole in poles))

    def default_fit_offset(self, params: SystemParams, donor_energy: float,
                           reservoir: Optional[ReservoirParams] = None) -> float:
        """sqrt(Omega / nu(E1)) capped at FIT_OFFSET_POLE_FRACTION of the distance to the nearest pole.

        The cap keeps the window smoothing of second order small; sqrt(Omega / nu) alone can exceed
        the linewidth of an overdamped polariton.
        """
        operation = "numerics.default_fit_offset"
        require_disorder(params, operation)
        density = float(self.spectra.total_dos(donor_energy, params))
        if not density > 0:
            raise DomainError(f"total density of states vanishes at E={donor_energy}", operation)
        offset = math.sqrt(params.rabi_frequency / density)
        cap = self.settings.FIT_OFFSET_POLE_FRACTION * self.pole_distance(params, donor_energy, reservoir)
        if cap < offset:
            logger.debug("Fit offset %.3g capped at %.3g by the nearest pole", offset, cap)
        return min(offset, cap)


numerics_service = NumericsService()
