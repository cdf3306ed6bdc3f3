"""Effective non-Hermitian Hamiltonian of cavity + bright state and its eigenenergies."""

import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np

from app.core.config import Settings, settings as default_settings
from app.core.errors import ContractError, ValidityError
from app.core.validation import ensure_valid
from app.models import EigenPair, Regime, SystemParams

logger = logging.getLogger(__name__)

SMALL_DISORDER_LIMIT = 0.3
LARGE_DISORDER_LIMIT = 3.0


class EffectiveHamiltonianService:
    def __init__(self, config: Optional[Settings] = None):
        self.settings = config or default_settings

    def effective_hamiltonian(self, params: SystemParams) -> Tuple[np.ndarray, complex]:
        """Return ([[E_C, Omega/2], [Omega/2, E_M - i sigma]], dark-state scalar E_M - i sigma)."""
        ensure_valid(params, "effham.effective_hamiltonian")
        dark = complex(params.emitter_center, -params.disorder_width)
        half_rabi = params.rabi_frequency / 2.0
        matrix = np.array(
            [[params.cavity_energy, half_rabi], [half_rabi, dark]],
            dtype=np.complex128,
        )
        return matrix, dark

    def is_resonant(self, params: SystemParams) -> bool:
        return abs(params.cavity_energy - params.emitter_center) <= self.settings.RESONANCE_TOL

    def classify_regime(self, params: SystemParams) -> Regime:
        if not self.is_resonant(params):
            return Regime.OFF_RESONANT
        sigma, rabi = params.disorder_width, params.rabi_frequency
        if abs(sigma - rabi) <= self.settings.EP_TOL:
            return Regime.EXCEPTIONAL_POINT
        return Regime.UNDERDAMPED if sigma < rabi else Regime.OVERDAMPED

    @staticmethod
    def _ordered(first: complex, second: complex) -> Tuple[complex, complex]:
        if (first.real, first.imag) <= (second.real, second.imag):
            return first, second
        return second, first

    def _pair(self, eps1: complex, eps2: complex, params: SystemParams) -> EigenPair:
        eps1, eps2 = self._ordered(eps1, eps2)
        return EigenPair(
            eps1=eps1,
            eps2=eps2,
            rabi_splitting=max((eps2 - eps1).real, 0.0),
            regime=self.classify_regime(params),
            dark_energy=complex(params.emitter_center, -params.disorder_width),
            exceptional_width=params.rabi_frequency,
        )

    def eigenenergies(self, params: SystemParams) -> EigenPair:
        """eps = (E_C + E_M - i sigma)/2 -/+ sqrt((E_C - E_M + i sigma)^2 + Omega^2)/2 (principal root)."""
        ensure_valid(params, "effham.eigenenergies")
        e_c, e_m, sigma = params.cavity_energy, params.emitter_center, params.disorder_width
        mean = complex(e_c + e_m, -sigma) / 2.0
        if self.is_resonant(params):
            # resonant radicand Omega^2 - sigma^2 is real: real and imaginary parts stay separated exactly
            radicand = params.rabi_frequency ** 2 - sigma ** 2
            if radicand >= 0:
                half = complex(math.sqrt(radicand) / 2.0, 0.0)
            else:
                half = complex(0.0, math.sqrt(-radicand) / 2.0)
        else:
            detuning = complex(e_c - e_m, sigma)
            half = complex(np.sqrt(detuning * detuning + params.rabi_frequency ** 2)) / 2.0
        return self._pair(mean - half, mean + half, params)

    def asymptotic_eigenenergies(self, params: SystemParams) -> EigenPair:
        """Leading small- or large-disorder expansion of the resonant eigenenergies."""
        ensure_valid(params, "effham.asymptotic_eigenenergies")
        if not self.is_resonant(params):
            raise ValidityError("asymptotic forms exist only for the resonant system", "effham.asymptotic_eigenenergies")
        sigma, rabi, e_m = params.disorder_width, params.rabi_frequency, params.emitter_center
        if rabi == 0:
            raise ValidityError("Omega = 0: no polariton splitting to expand around", "effham.asymptotic_eigenenergies")
        ratio = sigma / rabi
        if ratio < SMALL_DISORDER_LIMIT:
            shift = rabi / 2.0 - sigma ** 2 / (4.0 * rabi)
            centre = complex(e_m, -sigma / 2.0)
            return self._pair(centre - shift, centre + shift, params)
        if ratio > LARGE_DISORDER_LIMIT:
            leak = rabi ** 2 / (4.0 * sigma)
            return self._pair(complex(e_m, -sigma + leak), complex(e_m, -leak), params)
        raise ValidityError(
            f"sigma/Omega={ratio:.3g} lies between {SMALL_DISORDER_LIMIT} and {LARGE_DISORDER_LIMIT}",
            "effham.asymptotic_eigenenergies",
        )

    def eigenenergy_sweep(self, params: SystemParams, axis: str, values: Iterable[float]) -> List[EigenPair]:
        field = {"sigma": "disorder_width", "N": "emitter_count", "g": "coupling"}.get(axis)
        if field is None:
            raise ContractError(f"unsupported eigenenergy sweep axis {axis!r}", "effham.eigenenergy_sweep")
        pairs = []
        for value in values:
            value = int(value) if field == "emitter_count" else float(value)
            pairs.append(self.eigenenergies(params.with_updates(**{field: value})))
        logger.info("Eigenenergy sweep over %s: %d points", axis, len(pairs))
        return pairs


effham_service = EffectiveHamiltonianService()
