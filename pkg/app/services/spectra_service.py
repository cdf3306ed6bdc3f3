"""Analytic LDOS and absorption spectra in the thermodynamic limit, plus finite-size broadened LDOS.

All densities follow nu_X(w) = (1/pi) Re R_XX(-i w + delta) with R(z) = (z + iH)^-1.
"""

import logging
import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from app.core.config import Settings, settings as default_settings
from app.core.disorder import lorentz_pdf
from app.core.errors import InvalidParameterError
from app.core.validation import ensure_valid, require_disorder
from app.models import DisorderSample, ProbeParams, SiteIndex, Spectrum, SystemParams
from app.services.effham_service import EffectiveHamiltonianService, effham_service
from app.services.greens_service import GreensService, greens_service

logger = logging.getLogger(__name__)

# finest feature resolved by the sum-rule quadrature, in grid steps per linewidth
_STEPS_PER_WIDTH = 20
_MAX_QUADRATURE_POINTS = 4_000_000


def _out(value):
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


class SpectraService:
    def __init__(
        self,
        greens: Optional[GreensService] = None,
        effham: Optional[EffectiveHamiltonianService] = None,
        config: Optional[Settings] = None,
    ):
        self.greens = greens or greens_service
        self.effham = effham or effham_service
        self.settings = config or default_settings

    # ==================== CLOSED FORMS ====================

    def cavity_ldos(self, omega, params: SystemParams):
        """nu_C(w) = (1/pi) k s / ((k s)^2 + (w - E_C - k (w - E_M))^2), k = g^2 N / ((E_M - w)^2 + s^2)."""
        require_disorder(params, "spectra.cavity_ldos")
        w = np.asarray(omega, dtype=np.float64)
        sigma = params.disorder_width
        kappa = params.coupling_strength / ((params.emitter_center - w) ** 2 + sigma ** 2)
        width = kappa * sigma
        shift = w - params.cavity_energy - kappa * (w - params.emitter_center)
        return _out(width / (np.pi * (width ** 2 + shift ** 2)))

    def cavity_absorption(self, omega, params: SystemParams):
        """chi_C = pi nu_C."""
        return _out(np.pi * np.asarray(self.cavity_ldos(omega, params)))

    def bright_state_ldos(self, omega, params: SystemParams):
        """nu_BS(w) = (1/pi) s (w - E_C)^2 / (s^2 (w - E_C)^2 + ((w - E_M)(w - E_C) - g^2 N)^2)."""
        require_disorder(params, "spectra.bright_state_ldos")
        w = np.asarray(omega, dtype=np.float64)
        sigma = params.disorder_width
        cavity_offset = w - params.cavity_energy
        mixed = (w - params.emitter_center) * cavity_offset - params.coupling_strength
        value = sigma * cavity_offset ** 2 / (np.pi * (sigma ** 2 * cavity_offset ** 2 + mixed ** 2))
        return _out(value)

    def matter_absorption(self, omega, params: SystemParams, probe: Optional[ProbeParams] = None):
        """chi_M = N D^2 pi nu_BS."""
        probe = probe or ProbeParams()
        scale = params.emitter_count * probe.probe_coupling ** 2 * np.pi
        return _out(scale * np.asarray(self.bright_state_ldos(omega, params)))

    def matter_absorption_shifted(self, omega, params: SystemParams, probe: Optional[ProbeParams] = None):
        """chi_M through the averaged cavity element at z' = i w - i E_C - i E_M - sigma."""
        require_disorder(params, "spectra.matter_absorption")
        probe = probe or ProbeParams()
        w = np.asarray(omega, dtype=np.float64)
        shifted = 1j * (w - params.cavity_energy - params.emitter_center) - params.disorder_width
        cavity = np.asarray(self.greens.averaged_cavity_element(shifted, params))
        return _out(-params.emitter_count * probe.probe_coupling ** 2 * cavity.real)

    def mixed_absorption(self, omega, params: SystemParams, probe: Optional[ProbeParams] = None,
                         cavity_weight: float = 1.0, matter_weight: float = 1.0):
        """alpha_C chi_C + alpha_M chi_M."""
        chi_c = np.asarray(self.cavity_absorption(omega, params))
        chi_m = np.asarray(self.matter_absorption(omega, params, probe))
        return _out(cavity_weight * chi_c + matter_weight * chi_m)

    def dark_state_ldos(self, omega, params: SystemParams):
        """(N - 1) P(w); zero for a single emitter."""
        require_disorder(params, "spectra.dark_state_ldos")
        w = np.asarray(omega, dtype=np.float64)
        if params.emitter_count == 1:
            return _out(np.zeros_like(w))
        density = np.asarray(lorentz_pdf(w, params.emitter_center, params.disorder_width))
        return _out((params.emitter_count - 1) * density)

    def total_dos(self, omega, params: SystemParams, thermodynamic: bool = False):
        """nu_C + nu_BS + (N - 1) P, or N P with `thermodynamic`."""
        require_disorder(params, "spectra.total_dos")
        w = np.asarray(omega, dtype=np.float64)
        if thermodynamic:
            return _out(params.emitter_count * np.asarray(lorentz_pdf(w, params.emitter_center, params.disorder_width)))
        parts = (
            np.asarray(self.cavity_ldos(w, params))
            + np.asarray(self.bright_state_ldos(w, params))
            + np.asarray(self.dark_state_ldos(w, params))
        )
        return _out(parts)

    # ==================== POLE FORMS ====================

    def residue_weights(self, params: SystemParams) -> Dict[str, Tuple[complex, complex]]:
        """Cavity weights A_mu and bright-state weights B_mu of the two polariton poles."""
        require_disorder(params, "spectra.residue_weights")
        pair = self.effham.eigenenergies(params)
        eps = (pair.eps1, pair.eps2)
        if eps[0] == eps[1]:
            raise InvalidParameterError("residues diverge at the exceptional point", "spectra.residue_weights")
        dark = complex(params.emitter_center, -params.disorder_width)
        cavity = tuple((eps[m] - dark) / (eps[m] - eps[1 - m]) for m in (0, 1))
        bright = tuple(
            -params.coupling_strength / ((eps[m] - dark) * (eps[1 - m] - eps[m])) for m in (0, 1)
        )
        return {"cavity": cavity, "bright": bright}

    def _two_pole(self, omega, params: SystemParams, weights: Tuple[complex, complex]):
        pair = self.effham.eigenenergies(params)
        w = np.asarray(omega, dtype=np.float64)
        total = weights[0] / (w - pair.eps1) + weights[1] / (w - pair.eps2)
        return _out(-total.imag / np.pi)

    def cavity_ldos_poles(self, omega, params: SystemParams):
        return self._two_pole(omega, params, self.residue_weights(params)["cavity"])

    def bright_state_ldos_poles(self, omega, params: SystemParams):
        return self._two_pole(omega, params, self.residue_weights(params)["bright"])

    # ==================== GRIDS AND QUADRATURE ====================

    def default_grid(self, params: SystemParams, points: Optional[int] = None) -> np.ndarray:
        margin = max(5.0 * params.disorder_width, 2.0 * params.rabi_frequency)
        lower = min(params.emitter_center, params.cavity_energy) - margin
        upper = max(params.emitter_center, params.cavity_energy) + margin
        return np.linspace(lower, upper, points or self.settings.GRID_POINTS)

    def default_broadening(self, params: SystemParams, grid: np.ndarray) -> float:
        """max(10 grid steps, 5 mean level spacings at the emitter peak)."""
        step = float(np.min(np.diff(grid))) if len(grid) > 1 else 0.0
        spacing = 0.0
        if params.disorder_width > 0:
            spacing = 5.0 * np.pi * params.disorder_width / params.emitter_count
        return max(10.0 * step, spacing)

    def _narrowest_width(self, params: SystemParams) -> float:
        pair = self.effham.eigenenergies(params)
        candidates = [params.disorder_width, -pair.eps1.imag, -pair.eps2.imag]
        return min(c for c in candidates if c > 0)

    def spectral_weight(self, density: Callable[[np.ndarray], np.ndarray], params: SystemParams,
                        half_width_factor: float = 200.0) -> float:
        """Trapezoid integral over a wide window plus the analytic c/(w - E_M)^2 tail on both sides."""
        require_disorder(params, "spectra.spectral_weight")
        scale = max(params.disorder_width, params.rabi_frequency / 2.0,
                    abs(params.cavity_energy - params.emitter_center))
        centre = params.emitter_center
        lower, upper = centre - half_width_factor * scale, centre + half_width_factor * scale
        step = self._narrowest_width(params) / _STEPS_PER_WIDTH
        points = int(min(max((upper - lower) / step, 1000), _MAX_QUADRATURE_POINTS)) + 1
        grid = np.linspace(lower, upper, points)
        values = np.asarray(density(grid))
        body = trapezoid(values, grid)
        tails = values[0] * (centre - lower) + values[-1] * (upper - centre)
        logger.debug("spectral_weight: %d points, body=%.12g tails=%.3g", points, body, tails)
        return float(body + tails)

    # ==================== FINITE SIZE ====================

    def finite_size_ldos(self, site: SiteIndex, grid, sample: DisorderSample, params: SystemParams,
                         broadening: float) -> Spectrum:
        """(1/pi) Re R_XX(-i w + delta) of one sample on `grid`."""
        if not broadening > 0:
            raise InvalidParameterError("broadening delta must be > 0", "spectra.finite_size_ldos")
        ensure_valid(params, "spectra.finite_size_ldos")
        w = np.asarray(grid, dtype=np.float64)
        element = self.greens.greens_element(site, site, -1j * w + broadening, sample, params)
        return Spectrum(
            grid=w,
            channels={"ldos": np.asarray(element).real / np.pi},
            metadata={"site": site.label, "broadening": broadening, "seed": sample.seed},
        )

    def broadened_ldos(self, site: SiteIndex, grid, params: SystemParams, broadening: float) -> np.ndarray:
        """Exact disorder average of the finite-size LDOS at offset delta."""
        if not broadening > 0:
            raise InvalidParameterError("broadening delta must be > 0", "spectra.broadened_ldos")
        w = np.asarray(grid, dtype=np.float64)
        element = self.greens.averaged_greens_element(site, site, -1j * w + broadening, params)
        return np.asarray(element).real / np.pi

    # ==================== PANELS ====================

    def ldos_panel(self, params: SystemParams, probe: Optional[ProbeParams] = None,
                   grid: Optional[np.ndarray] = None) -> Spectrum:
        """Every analytic channel on one grid."""
        grid = self.default_grid(params) if grid is None else np.asarray(grid, dtype=np.float64)
        nu_c = np.asarray(self.cavity_ldos(grid, params))
        nu_bs = np.asarray(self.bright_state_ldos(grid, params))
        nu_ds = np.asarray(self.dark_state_ldos(grid, params))
        channels = {
            "nu_C": nu_c,
            "chi_C": np.pi * nu_c,
            "nu_BS": nu_bs,
            "chi_M": np.asarray(self.matter_absorption(grid, params, probe)),
            "chi_mixed": np.asarray(self.mixed_absorption(grid, params, probe)),
            "nu_DS": nu_ds,
            "nu_total": nu_c + nu_bs + nu_ds,
        }
        metadata = {"params": params.model_dump(), "probe_coupling": (probe or ProbeParams()).probe_coupling}
        return Spectrum(grid=grid, channels=channels, metadata=metadata)

    @staticmethod
    def peak_positions(grid: np.ndarray, values: np.ndarray) -> np.ndarray:
        """Grid points of strict interior local maxima."""
        values = np.asarray(values)
        interior = (values[1:-1] > values[:-2]) & (values[1:-1] >= values[2:])
        return np.asarray(grid)[1:-1][interior]


spectra_service = SpectraService()
