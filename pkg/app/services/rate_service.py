"""Analytic relaxation and transport rates (eV, hbar = 1).

Rates use the LDOS convention gamma = g^2 nu_C. A finite-size pole decays in amplitude
with pi times this rate; the occupation decays with 2 pi times it.
"""

import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from app.core.config import Settings, settings as default_settings
from app.core.disorder import lorentz_pdf
from app.core.errors import DomainError, InvalidParameterError
from app.core.validation import ensure_valid_reservoir, require_disorder
from app.models import RateKind, RateResult, ReservoirParams, SystemParams
from app.services.effham_service import EffectiveHamiltonianService, effham_service
from app.services.spectra_service import SpectraService, spectra_service

logger = logging.getLogger(__name__)


class RateService:
    def __init__(
        self,
        spectra: Optional[SpectraService] = None,
        effham: Optional[EffectiveHamiltonianService] = None,
        config: Optional[Settings] = None,
    ):
        self.spectra = spectra or spectra_service
        self.effham = effham or effham_service
        self.settings = config or default_settings

    # ==================== RELAXATION ====================

    def relaxation_rate(self, donor_energy: float, params: SystemParams) -> RateResult:
        """gamma(E1) = g^2 nu_C(E1)."""
        require_disorder(params, "rates.relaxation_rate")
        value = params.coupling ** 2 * self.spectra.cavity_ldos(donor_energy, params)
        return RateResult(
            value=value,
            kind=RateKind.RELAX_ENERGY_RESOLVED,
            metadata={"donor_energy": donor_energy},
        )

    def avg_relaxation_rate(self, params: SystemParams) -> RateResult:
        """(g^2/pi) S / ((E_M - E_C)^2 + S^2) with S = sigma + g^2 N / (2 sigma)."""
        require_disorder(params, "rates.avg_relaxation_rate")
        sigma = params.disorder_width
        s = sigma + params.coupling_strength / (2.0 * sigma)
        detuning = params.emitter_center - params.cavity_energy
        value = params.coupling ** 2 / math.pi * s / (detuning ** 2 + s ** 2)
        return RateResult(value=value, kind=RateKind.RELAX_AVERAGED, metadata={"effective_width": s})

    def quadrature_avg_relaxation_rate(self, params: SystemParams) -> float:
        """Adaptive quadrature of gamma(E) P(E) over the real line."""
        require_disorder(params, "rates.quadrature_avg_relaxation_rate")
        pair = self.effham.eigenenergies(params)
        centre, sigma = params.emitter_center, params.disorder_width
        reach = 50.0 * max(sigma, params.rabi_frequency, abs(params.cavity_energy - centre))
        lower, upper = centre - reach, centre + reach
        g2 = params.coupling ** 2

        def integrand(energy: float) -> float:
            return g2 * self.spectra.cavity_ldos(energy, params) * lorentz_pdf(energy, centre, sigma)

        marks = sorted({centre, params.cavity_energy, pair.eps1.real, pair.eps2.real})
        options = dict(epsabs=0.0, epsrel=1e-11, limit=500)
        body, _ = integrate.quad(integrand, lower, upper, points=marks, **options)
        left, _ = integrate.quad(integrand, -np.inf, lower, **options)
        right, _ = integrate.quad(integrand, upper, np.inf, **options)
        return body + left + right

    # ==================== TRANSPORT ====================

    def acceptor_ldos(self, energy, reservoir: ReservoirParams, broadening: float = 0.0):
        """LDOS of the acceptor dressed by N_R g_R^2 / (z + i E_R + Sigma), at z = -iE + broadening."""
        ensure_valid_reservoir(reservoir, "rates.acceptor_ldos")
        e = np.asarray(energy, dtype=np.float64)
        if reservoir.reservoir_strength == 0 and broadening == 0:
            # decoupled acceptor: Lorentzian of the reservoir width in place of the delta peak
            width = reservoir.reservoir_width
            value = width / (np.pi * ((e - reservoir.acceptor_energy) ** 2 + width ** 2))
        else:
            z = -1j * e + broadening
            self_energy = reservoir.reservoir_strength / (
                z + 1j * reservoir.reservoir_center + reservoir.reservoir_width
            )
            value = (1.0 / (z + 1j * reservoir.acceptor_energy + self_energy)).real / np.pi
        return float(value) if np.ndim(value) == 0 else value

    def _density(self, energy: float, params: SystemParams, thermodynamic: bool, operation: str) -> float:
        density = float(self.spectra.total_dos(energy, params, thermodynamic=thermodynamic))
        if not density > 0:
            raise DomainError(f"total density of states vanishes at E={energy}", operation)
        return density

    def transport_rate(self, energy: float, params: SystemParams, reservoir: ReservoirParams,
                       thermodynamic: bool = False) -> RateResult:
        """Gamma(E) = g^2 nu_N(E) nu_C(E) / nu(E)."""
        operation = "rates.transport_rate"
        require_disorder(params, operation)
        density = self._density(energy, params, thermodynamic, operation)
        value = (
            params.coupling ** 2
            * self.spectra.cavity_ldos(energy, params)
            * self.acceptor_ldos(energy, reservoir)
            / density
        )
        return RateResult(
            value=value,
            kind=RateKind.TRANSPORT_ENERGY_RESOLVED,
            metadata={"energy": energy, "thermodynamic_density": thermodynamic},
        )

    def resonant_transport_rate(self, donor_energy: float, params: SystemParams,
                                acceptor_ldos_const: float, thermodynamic: bool = False) -> RateResult:
        """Gamma_r = g^2 nu_0 nu_C(E1) / nu(E1)."""
        operation = "rates.resonant_transport_rate"
        require_disorder(params, operation)
        if acceptor_ldos_const < 0:
            raise InvalidParameterError("acceptor_ldos_const must be ≥ 0", operation)
        density = self._density(donor_energy, params, thermodynamic, operation)
        value = params.coupling ** 2 * acceptor_ldos_const * self.spectra.cavity_ldos(donor_energy, params) / density
        return RateResult(
            value=value,
            kind=RateKind.TRANSPORT_RESONANT,
            metadata={"donor_energy": donor_energy, "acceptor_ldos_const": acceptor_ldos_const},
        )

    def avg_transport_rate(self, params: SystemParams, n_acceptors: int = 1) -> RateResult:
        """(n_acceptors / N) * gamma_bar."""
        operation = "rates.avg_transport_rate"
        if n_acceptors < 1:
            raise InvalidParameterError("n_acceptors must be ≥ 1", operation)
        relaxation = self.avg_relaxation_rate(params)
        if n_acceptors >= self.settings.ACCEPTOR_VALIDITY_FRACTION * params.emitter_count:
            logger.warning(
                "n_acceptors=%d is not small against N=%d; the N_A/N scaling is outside its validity",
                n_acceptors, params.emitter_count,
            )
        value = n_acceptors / params.emitter_count * relaxation.value
        return RateResult(value=value, kind=RateKind.TRANSPORT_AVERAGED, metadata={"n_acceptors": n_acceptors})

    # ==================== SCALING ====================

    @staticmethod
    def scaling_exponent(rate: Callable[[float], float], values: Sequence[float]) -> float:
        """Least-squares slope of log(rate) against log(value)."""
        x = np.log(np.asarray(values, dtype=np.float64))
        y = np.log(np.asarray([rate(v) for v in values], dtype=np.float64))
        slope, _ = np.polyfit(x, y, 1)
        return float(slope)


rate_service = RateService()
