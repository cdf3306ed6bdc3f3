"""Finite-size Monte Carlo oracle for the analytic spectra and rates."""

import logging
import math
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from app.core.config import Settings, settings as default_settings
from app.core.disorder import derive_sample_seed, sample_disorder, sample_energy
from app.core.errors import ContractError, FitError, InvalidParameterError, PoleCollisionError
from app.core.validation import ensure_valid, ensure_valid_reservoir, require_disorder
from app.models import (
    ComparisonReport,
    DisorderSample,
    DonorMode,
    EnsembleConfig,
    Provenance,
    RateKind,
    RateResult,
    ReservoirParams,
    SiteIndex,
    Spectrum,
    SystemParams,
    TransportSelection,
)
from app.services.greens_service import GreensService, greens_service
from app.services.numerics_service import NumericsService, numerics_service
from app.services.spectra_service import SpectraService, spectra_service
from app.services.worker_pool import WorkerPool, worker_pool

logger = logging.getLogger(__name__)

# eigenstates at or above this acceptor + reservoir weight belong to the acceptor, not the band
ACCEPTOR_WEIGHT_LIMIT = 0.5
# independent stream for the sampled donor energy of a transport sample
DONOR_STREAM = 1


class EnsembleService:
    def __init__(
        self,
        greens: Optional[GreensService] = None,
        spectra: Optional[SpectraService] = None,
        numerics: Optional[NumericsService] = None,
        pool: Optional[WorkerPool] = None,
        config: Optional[Settings] = None,
    ):
        self.greens = greens or greens_service
        self.spectra = spectra or spectra_service
        self.numerics = numerics or numerics_service
        self.pool = pool or worker_pool
        self.settings = config or default_settings

    # ==================== SAMPLES ====================

    def auto_sample_count(self, emitter_count: int) -> int:
        """M_S with M_S * N equal to ENSEMBLE_SAMPLE_PRODUCT (at least 2)."""
        return max(2, int(round(self.settings.ENSEMBLE_SAMPLE_PRODUCT / emitter_count)))

    def draw_sample(self, cfg: EnsembleConfig, index: int) -> DisorderSample:
        seed = derive_sample_seed(cfg.base_seed, index)
        return sample_disorder(cfg.params, seed, cfg.tail_cutoff)

    def _offset(self, cfg: EnsembleConfig, energy: float, reservoir: Optional[ReservoirParams] = None) -> float:
        """Explicit delta, or the numerics default offset at `energy`."""
        if cfg.fit_offset != "auto":
            return float(cfg.fit_offset)
        return self.numerics.default_fit_offset(cfg.params, energy, reservoir)

    def _summarise(self, values: Sequence[Optional[float]], cfg: EnsembleConfig, operation: str) -> Tuple[float, float, int, int]:
        kept = np.array([v for v in values if v is not None and np.isfinite(v)], dtype=np.float64)
        dropped = len(values) - kept.size
        if dropped > self.settings.DROP_WARNING_FRACTION * len(values):
            logger.warning("%s: dropped %d of %d samples", operation, dropped, len(values))
        if kept.size < 2:
            raise FitError(f"only {kept.size} usable samples out of {len(values)}", operation)
        mean = float(np.sum(kept) / kept.size)
        stderr = float(np.std(kept, ddof=1) / math.sqrt(kept.size))
        if mean < 0:
            logger.warning("%s: negative ensemble mean %.3e (stderr %.3e); result is flagged", operation, mean, stderr)
        return mean, stderr, int(kept.size), int(dropped)

    # ==================== RELAXATION ====================

    def run_relaxation_ensemble(self, cfg: EnsembleConfig, donor_energy: Optional[float] = None) -> RateResult:
        """Fit G_{1,1} of every sample and average the rates (LDOS convention, occupation fit / 2 pi).

        Pinned donors sit at `donor_energy`; sampled donors keep their Lorentzian energy,
        which turns the mean into the disorder-averaged rate.
        """
        operation = "ensemble.run_relaxation_ensemble"
        params = require_disorder(cfg.params, operation)
        pinned = cfg.donor_mode == DonorMode.PINNED
        if pinned and donor_energy is None:
            raise ContractError("a pinned donor needs donor_energy", operation)
        site = SiteIndex.emitter(1)
        fixed_offset = self._offset(cfg, donor_energy) if donor_energy is not None else None

        def one(index: int) -> Optional[float]:
            sample = self.draw_sample(cfg, index)
            if pinned:
                sample = sample.with_donor(donor_energy)
            energy = float(sample.energies[0])
            offset = fixed_offset if fixed_offset is not None else self._offset(cfg, energy)

            def greens(z: complex) -> complex:
                return self.greens.greens_element(site, site, z, sample, params)

            try:
                near = self.numerics.fit_rate_from_greens(greens, energy, offset)
                if not cfg.extrapolate:
                    return near / (2.0 * math.pi)
                far = self.numerics.fit_rate_from_greens(greens, energy, 2.0 * offset)
            except (FitError, PoleCollisionError) as e:
                logger.debug("Sample %d dropped: %s", index, e)
                return None
            return (2.0 * near - far) / (2.0 * math.pi)

        logger.info(
            "Relaxation ensemble: M_S=%d N=%d sigma=%g donor=%s offset=%s",
            cfg.sample_count, params.emitter_count, params.disorder_width,
            donor_energy if pinned else "sampled", fixed_offset if fixed_offset is not None else "per-sample",
        )
        rates = self.pool.map(one, range(cfg.sample_count), cfg.threads)
        mean, stderr, kept, dropped = self._summarise(rates, cfg, operation)
        return RateResult(
            value=mean,
            kind=RateKind.RELAX_ENERGY_RESOLVED if pinned else RateKind.RELAX_AVERAGED,
            provenance=Provenance.ensemble(kept, stderr, dropped),
            metadata={
                "donor_energy": donor_energy,
                "donor_mode": cfg.donor_mode.value,
                "fit_offset": fixed_offset if fixed_offset is not None else cfg.fit_offset,
                "extrapolate": cfg.extrapolate,
                "expected_fit": (
                    self.numerics.expected_fit_rate(params, donor_energy, fixed_offset, cfg.extrapolate)
                    if pinned else None
                ),
                "negative_mean": mean < 0,
                "base_seed": cfg.base_seed,
            },
        )

    # ==================== TRANSPORT ====================

    def transport_matrix(self, sample: DisorderSample, params: SystemParams, reservoir: ReservoirParams) -> np.ndarray:
        """Cavity, N emitters and one reservoir mode at E_R - i Sigma coupled to the acceptor by sqrt(N_R) g_R."""
        count = sample.size
        matrix = np.zeros((count + 2, count + 2), dtype=np.complex128)
        matrix[0, 0] = params.cavity_energy
        matrix[0, 1:count + 1] = params.coupling
        matrix[1:count + 1, 0] = params.coupling
        matrix[np.arange(1, count + 1), np.arange(1, count + 1)] = sample.energies
        matrix[count + 1, count + 1] = complex(reservoir.reservoir_center, -reservoir.reservoir_width)
        link = math.sqrt(reservoir.reservoir_mode_count) * reservoir.reservoir_coupling
        matrix[count, count + 1] = link
        matrix[count + 1, count] = link
        return matrix

    def _transport_window(self, cfg: EnsembleConfig, energy: float, reservoir: ReservoirParams) -> Tuple[float, float]:
        """Kernel width delta and the mean state density nu(E) at the target energy.

        A sampled acceptor has no fixed pole, so only the polariton poles cap the automatic width.
        """
        poles = reservoir if cfg.acceptor_mode == DonorMode.PINNED else None
        return self._offset(cfg, energy, poles), float(self.spectra.total_dos(energy, cfg.params))

    def _transport_sample_rate(self, matrix: np.ndarray, target: float, width: float, density: float,
                               selection: TransportSelection) -> Optional[float]:
        """Band transport rate of one sample at `target`.

        Every band eigenvalue decays with -Im lambda_mu = pi g^2 s_mu nu_N(E_mu) to order g^2, s_mu being
        its cavity weight. The window rule sums these decays under a Gaussian kernel of width delta and
        divides by pi times the mean number of states under the kernel, sqrt(2 pi) delta nu(E1), so the
        disorder mean of s_mu becomes nu_C / nu. States carrying half or more of their weight on the
        acceptor or the reservoir mode are not band states and are left out.
        """
        eigenvalues, eigenvectors = linalg.eig(matrix)
        weights = np.abs(eigenvectors) ** 2
        weights /= np.sum(weights, axis=0, keepdims=True)
        count = matrix.shape[0] - 2
        band = weights[count] + weights[count + 1] < ACCEPTOR_WEIGHT_LIMIT
        energies = eigenvalues.real[band]
        decay = -eigenvalues.imag[band]
        if selection == TransportSelection.NEAREST:
            if not energies.size:
                return None
            return float(decay[np.argmin(np.abs(energies - target))] / math.pi)
        kernel = np.exp(-0.5 * ((energies - target) / width) ** 2)
        mass = math.sqrt(2.0 * math.pi) * width * density
        return float(np.sum(kernel * decay) / (math.pi * mass))

    def run_transport_ensemble(self, cfg: EnsembleConfig, donor_energy: Optional[float] = None) -> RateResult:
        """Band-averaged root decay of the transport matrix at the donor energy.

        The donor only fixes the target energy: E1 when pinned, an independent Lorentzian draw per
        sample when sampled. Emitter 1 stays a random band emitter, since a level held at the window
        centre would add a deterministic state to the band average. The acceptor is pinned at E_N or
        sampled with the band.
        """
        operation = "ensemble.run_transport_ensemble"
        params = require_disorder(cfg.params, operation)
        if cfg.reservoir is None:
            raise ContractError("transport ensembles need reservoir parameters", operation)
        reservoir = ensure_valid_reservoir(cfg.reservoir, operation)
        if params.emitter_count < 2:
            raise InvalidParameterError("transport needs N >= 2 (donor and acceptor)", operation)
        pinned = cfg.donor_mode == DonorMode.PINNED
        if pinned and donor_energy is None:
            raise ContractError("a pinned donor needs donor_energy", operation)
        fixed_window = self._transport_window(cfg, donor_energy, reservoir) if pinned else None

        def one(index: int) -> Optional[float]:
            sample = self.draw_sample(cfg, index)
            if cfg.acceptor_mode == DonorMode.PINNED:
                sample = sample.with_acceptor(reservoir.acceptor_energy)
            if pinned:
                target = donor_energy
            else:
                target = sample_energy(params, derive_sample_seed(cfg.base_seed, index, DONOR_STREAM))
            try:
                width, density = fixed_window or self._transport_window(cfg, target, reservoir)
                return self._transport_sample_rate(
                    self.transport_matrix(sample, params, reservoir), target, width, density, cfg.selection
                )
            except (linalg.LinAlgError, ValueError) as e:
                logger.debug("Sample %d dropped: %s", index, e)
                return None

        logger.info(
            "Transport ensemble: M_S=%d N=%d sigma=%g selection=%s donor=%s acceptor=%s window=%s",
            cfg.sample_count, params.emitter_count, params.disorder_width, cfg.selection.value,
            cfg.donor_mode.value, cfg.acceptor_mode.value, fixed_window[0] if fixed_window else "per-sample",
        )
        rates = self.pool.map(one, range(cfg.sample_count), cfg.threads)
        mean, stderr, kept, dropped = self._summarise(rates, cfg, operation)
        return RateResult(
            value=mean,
            kind=RateKind.TRANSPORT_ENERGY_RESOLVED if pinned else RateKind.TRANSPORT_AVERAGED,
            provenance=Provenance.ensemble(kept, stderr, dropped),
            metadata={
                "donor_energy": donor_energy if pinned else None,
                "selection": cfg.selection.value,
                "window": fixed_window[0] if fixed_window else cfg.fit_offset,
                "donor_mode": cfg.donor_mode.value,
                "acceptor_mode": cfg.acceptor_mode.value,
                "negative_mean": mean < 0,
                "base_seed": cfg.base_seed,
            },
        )

    # ==================== SPECTRA ====================

    def run_spectrum_ensemble(self, cfg: EnsembleConfig, site: SiteIndex, grid, broadening: float) -> Spectrum:
        """Sample mean of the finite-size LDOS with a standard-error channel."""
        operation = "ensemble.run_spectrum_ensemble"
        params = ensure_valid(cfg.params, operation)
        if not broadening > 0:
            raise InvalidParameterError("broadening delta must be > 0", operation)
        grid = np.asarray(grid, dtype=np.float64)

        def one(index: int) -> np.ndarray:
            sample = self.draw_sample(cfg, index)
            return self.spectra.finite_size_ldos(site, grid, sample, params, broadening)["ldos"]

        stack = np.vstack(self.pool.map(one, range(cfg.sample_count), cfg.threads))
        mean = np.sum(stack, axis=0) / stack.shape[0]
        stderr = np.std(stack, axis=0, ddof=1) / math.sqrt(stack.shape[0])
        return Spectrum(
            grid=grid,
            channels={"ldos": mean, "ldos_stderr": stderr},
            metadata={
                "site": site.label,
                "broadening": broadening,
                "sample_count": cfg.sample_count,
                "base_seed": cfg.base_seed,
            },
        )

    def run_eigenvalue_histogram(self, cfg: EnsembleConfig, bins: Union[int, Sequence[float]] = 200) -> Spectrum:
        """Eigenvalue density counts / (M_S * bin width) of the arrowhead Hamiltonian."""
        params = ensure_valid(cfg.params, "ensemble.run_eigenvalue_histogram")
        if np.ndim(bins) == 0:
            grid = self.spectra.default_grid(params)
            edges = np.linspace(grid[0], grid[-1], int(bins) + 1)
        else:
            edges = np.asarray(bins, dtype=np.float64)

        def one(index: int) -> np.ndarray:
            poles = self.greens.char_poly_poles(self.draw_sample(cfg, index), params)
            counts, _ = np.histogram(poles.energies, bins=edges)
            return counts

        counts = np.sum(np.vstack(self.pool.map(one, range(cfg.sample_count), cfg.threads)), axis=0)
        density = counts / (cfg.sample_count * np.diff(edges))
        return Spectrum(
            grid=0.5 * (edges[1:] + edges[:-1]),
            channels={"density": density, "counts": counts.astype(np.float64)},
            metadata={"sample_count": cfg.sample_count, "base_seed": cfg.base_seed},
        )

    # ==================== COMPARISON ====================

    @staticmethod
    def _numbers(result: Any, channel: Optional[str]) -> np.ndarray:
        if isinstance(result, RateResult):
            return np.array([result.value])
        if isinstance(result, Spectrum):
            name = channel or next(iter(result.channels))
            return np.asarray(result.channels[name])
        return np.atleast_1d(np.asarray(result, dtype=np.float64))

    def compare(
        self,
        analytic_fn: Callable[..., Any],
        ensemble_fn: Callable[..., Any],
        tolerance: float,
        points: Optional[Iterable[Any]] = None,
        channel: Optional[str] = None,
    ) -> ComparisonReport:
        """Run both paths on the same inputs and report the maximum relative deviation."""
        if points is None:
            analytic, ensemble = analytic_fn(), ensemble_fn()
            a, e = self._numbers(analytic, channel), self._numbers(ensemble, channel)
            point_list: List[Any] = []
        else:
            point_list = list(points)
            analytic = [analytic_fn(p) for p in point_list]
            ensemble = [ensemble_fn(p) for p in point_list]
            a = np.concatenate([self._numbers(r, channel) for r in analytic])
            e = np.concatenate([self._numbers(r, channel) for r in ensemble])
        if a.shape != e.shape:
            raise ContractError(f"shape mismatch {a.shape} vs {e.shape}", "ensemble.compare")
        scale = np.where(a != 0, np.abs(a), 1.0)
        deviations = np.abs(e - a) / scale
        worst = float(np.max(deviations)) if deviations.size else 0.0
        logger.info("compare: max relative deviation %.4g (tolerance %.4g)", worst, tolerance)
        return ComparisonReport(
            analytic=analytic,
            ensemble=ensemble,
            max_rel_dev=worst,
            tolerance=tolerance,
            passed=worst <= tolerance,
            details={"points": point_list, "deviations": deviations.tolist()},
        )


ensemble_service = EnsembleService()
