"""Data tables behind the eigenenergy, LDOS, relaxation and transport figures (numbers only, no plotting)."""

import logging
from typing import Callable, Dict, List, Literal, Optional, Sequence, Union

import numpy as np

from app.core.errors import ConfigError
from app.models import DonorMode, EnsembleConfig, ProbeParams, ResultTable, SiteIndex, SystemParams
from app.services.effham_service import EffectiveHamiltonianService, effham_service
from app.services.ensemble_service import EnsembleService, ensemble_service
from app.services.rate_service import RateService, rate_service
from app.services.spectra_service import SpectraService, spectra_service
from app.services.worker_pool import WorkerPool, worker_pool

logger = logging.getLogger(__name__)

COUPLING = 0.001
EMITTERS = 2000
RESONANT = {"cavity_energy": 1.0, "emitter_center": 1.0}
OFF_RESONANT = {"cavity_energy": 1.05, "emitter_center": 0.95}
DONOR_ENERGIES = (0.85, 0.9375, 1.025, 1.2)
OFF_RESONANT_EXTRA_DONORS = (1.125, 2.0)
EMITTER_COUNTS = (100, 1000, 10000)
SIGMA_GRID = (1e-3, 1.0, 121)
EIGEN_SIGMA_GRID = (1e-3, 0.2, 200)
COUNT_GRID = (1, 1_000_000, 61)


def figure_params(detuned: bool, sigma: float, emitter_count: int = EMITTERS,
                  coupling: float = COUPLING) -> SystemParams:
    energies = OFF_RESONANT if detuned else RESONANT
    return SystemParams(coupling=coupling, emitter_count=emitter_count, disorder_width=sigma, **energies)


def _label(energy: float) -> str:
    return f"{energy:g}"


# (params, panel letter) -> ensemble config, or None when the panel stays analytic
EnsembleFor = Callable[[SystemParams, str], Optional[EnsembleConfig]]


class FigureService:
    def __init__(
        self,
        effham: Optional[EffectiveHamiltonianService] = None,
        spectra: Optional[SpectraService] = None,
        rates: Optional[RateService] = None,
        ensembles: Optional[EnsembleService] = None,
        pool: Optional[WorkerPool] = None,
    ):
        self.effham = effham or effham_service
        self.spectra = spectra or spectra_service
        self.rates = rates or rate_service
        self.ensembles = ensembles or ensemble_service
        self.pool = pool or worker_pool

    def reproduce(self, figure: str, panel: Optional[str] = None, threads: Optional[int] = None,
                  sample_count: Optional[Union[int, Literal["auto"]]] = None, seed: int = 0) -> List[ResultTable]:
        """Tables of one figure, or of one panel.

        With a sample count, the LDOS and relaxation panels (figures 3, 4 and 5) also carry
        Monte Carlo columns `<column>_ensemble` and `<column>_ensemble_stderr`.
        """
        builders = {
            "2": self._eigenenergies,
            "3": self._ldos,
            "4": self._relaxation_vs_sigma,
            "5": self._relaxation_vs_count,
            "6": self._resonant_transport,
        }
        builder = builders.get(str(figure))
        if builder is None:
            raise ConfigError(f"unknown figure {figure!r}; choose from {sorted(builders)}", operation="cli.reproduce_fig")
        ensemble = None
        if sample_count is not None:
            ensemble = self._ensemble_for(sample_count, seed, panel, threads)
        panels = builder(threads, ensemble)
        if panel is None:
            return list(panels.values())
        if panel not in panels:
            raise ConfigError(f"figure {figure} has panels {sorted(panels)}", operation="cli.reproduce_fig")
        return [panels[panel]]

    def _ensemble_for(self, sample_count: Union[int, Literal["auto"]], seed: int,
                      panel: Optional[str], threads: Optional[int]) -> EnsembleFor:
        def config(params: SystemParams, letter: str) -> Optional[EnsembleConfig]:
            if panel is not None and letter != panel:
                return None
            count = sample_count
            if count == "auto":
                count = self.ensembles.auto_sample_count(params.emitter_count)
            return EnsembleConfig(params=params, sample_count=count, base_seed=seed, threads=threads)

        return config

    # ==================== EIGENENERGIES ====================

    def eigenenergy_table(self, params: SystemParams, sigmas: Sequence[float], name: str) -> ResultTable:
        pairs = self.effham.eigenenergy_sweep(params, "sigma", sigmas)
        data = {
            "sigma": list(sigmas),
            "re_eps1": [p.eps1.real for p in pairs],
            "im_eps1": [p.eps1.imag for p in pairs],
            "re_eps2": [p.eps2.real for p in pairs],
            "im_eps2": [p.eps2.imag for p in pairs],
            "regime": [p.regime.value for p in pairs],
        }
        return ResultTable.from_columns(name, data, {"sigma_ep": params.rabi_frequency})

    def _eigenenergies(self, threads: Optional[int], ensemble: Optional[EnsembleFor] = None) -> Dict[str, ResultTable]:
        sigmas = np.geomspace(*EIGEN_SIGMA_GRID)
        resonant = self.eigenenergy_table(figure_params(False, sigmas[0]), sigmas, "resonant")
        detuned = self.eigenenergy_table(figure_params(True, sigmas[0]), sigmas, "off_resonant")
        return {"a": resonant, "c": resonant, "b": detuned, "d": detuned}

    # ==================== LDOS ====================

    def ldos_ensemble_columns(self, channel: str, grid: np.ndarray, cfg: EnsembleConfig) -> Dict[str, np.ndarray]:
        """Sample LDOS at the cavity or bright site, or the eigenvalue histogram for nu_total."""
        grid = np.asarray(grid, dtype=np.float64)
        if channel == "nu_total":
            step = float(grid[1] - grid[0])
            edges = np.append(grid - 0.5 * step, grid[-1] + 0.5 * step)
            histogram = self.ensembles.run_eigenvalue_histogram(cfg, edges)
            stderr = np.sqrt(histogram["counts"]) / (cfg.sample_count * step)
            return {f"{channel}_ensemble": histogram["density"], f"{channel}_ensemble_stderr": stderr}
        site = SiteIndex.cavity() if channel == "nu_C" else SiteIndex.bright()
        broadening = self.spectra.default_broadening(cfg.params, grid)
        spectrum = self.ensembles.run_spectrum_ensemble(cfg, site, grid, broadening)
        return {f"{channel}_ensemble": spectrum["ldos"], f"{channel}_ensemble_stderr": spectrum["ldos_stderr"]}

    def _ldos(self, threads: Optional[int], ensemble: Optional[EnsembleFor] = None) -> Dict[str, ResultTable]:
        panels: Dict[str, ResultTable] = {}
        letters = iter("abcdefghijkl")
        for detuned in (False, True):
            for sigma in (0.04, 0.15):
                params = figure_params(detuned, sigma)
                spectrum = self.spectra.ldos_panel(params, ProbeParams())
                tag = f"{'off_resonant' if detuned else 'resonant'}_sigma{sigma:g}"
                for channel in ("nu_C", "nu_BS", "nu_total"):
                    letter = next(letters)
                    data = {"omega": spectrum.grid, channel: spectrum[channel]}
                    metadata = {"params": params.model_dump()}
                    cfg = ensemble(params, letter) if ensemble is not None else None
                    if cfg is not None:
                        data.update(self.ldos_ensemble_columns(channel, spectrum.grid, cfg))
                        metadata.update(sample_count=cfg.sample_count, base_seed=cfg.base_seed)
                        if channel != "nu_total":
                            metadata["ensemble_broadening"] = self.spectra.default_broadening(params, spectrum.grid)
                    panels[letter] = ResultTable.from_columns(f"{tag}_{channel}", data, metadata)
        return panels

    # ==================== RELAXATION ====================

    def _relaxation_rows(self, params_for, axis_values, donors, threads) -> Dict[str, list]:
        def row(value):
            params = params_for(value)
            entries = [self.rates.relaxation_rate(e, params).value for e in donors]
            entries.append(self.rates.avg_relaxation_rate(params).value)
            return entries

        rows = self.pool.map(row, axis_values, threads)
        data = {f"gamma_E1_{_label(e)}": [r[i] for r in rows] for i, e in enumerate(donors)}
        data["gamma_avg"] = [r[-1] for r in rows]
        return data

    def _ensemble_rows(self, configs: Sequence[EnsembleConfig], donors: Sequence[Optional[float]],
                       names: Sequence[str]) -> Dict[str, list]:
        """Pinned (donor given) or sampled (donor None) relaxation ensembles, one per config and donor."""
        data: Dict[str, list] = {}
        for donor, name in zip(donors, names):
            results = []
            for cfg in configs:
                if donor is None:
                    cfg = cfg.model_copy(update={"donor_mode": DonorMode.SAMPLED})
                results.append(self.ensembles.run_relaxation_ensemble(cfg, donor))
            data[f"{name}_ensemble"] = [r.value for r in results]
            data[f"{name}_ensemble_stderr"] = [r.stderr for r in results]
        logger.info("Ensemble columns %s over %d grid points", ", ".join(names), len(configs))
        return data

    def _relaxation_vs_sigma(self, threads: Optional[int], ensemble: Optional[EnsembleFor] = None) -> Dict[str, ResultTable]:
        sigmas = np.geomspace(*SIGMA_GRID)
        panels = {}
        for letter, detuned, donors in (
            ("a", False, DONOR_ENERGIES),
            ("b", True, DONOR_ENERGIES + OFF_RESONANT_EXTRA_DONORS),
        ):
            data = {"sigma": sigmas}
            data.update(self._relaxation_rows(lambda s: figure_params(detuned, s), sigmas, donors, threads))
            configs = [ensemble(figure_params(detuned, s), letter) for s in sigmas] if ensemble is not None else []
            if configs and configs[0] is not None:
                names = [f"gamma_E1_{_label(e)}" for e in donors] + ["gamma_avg"]
                data.update(self._ensemble_rows(configs, list(donors) + [None], names))
            panels[letter] = ResultTable.from_columns(f"gamma_vs_sigma_{'off_resonant' if detuned else 'resonant'}", data)
        for letter, detuned in (("c", False), ("d", True)):
            data = {"sigma": sigmas}
            for count in EMITTER_COUNTS:
                data[f"gamma_avg_N_{count}"] = [
                    self.rates.avg_relaxation_rate(figure_params(detuned, s, count)).value for s in sigmas
                ]
                configs = [ensemble(figure_params(detuned, s, count), letter) for s in sigmas] if ensemble is not None else []
                if configs and configs[0] is not None:
                    data.update(self._ensemble_rows(configs, [None], [f"gamma_avg_N_{count}"]))
            panels[letter] = ResultTable.from_columns(
                f"gamma_avg_vs_sigma_{'off_resonant' if detuned else 'resonant'}", data
            )
        return panels

    def _relaxation_vs_count(self, threads: Optional[int], ensemble: Optional[EnsembleFor] = None) -> Dict[str, ResultTable]:
        counts = np.unique(np.rint(np.geomspace(*COUNT_GRID)).astype(np.int64))
        panels = {}
        for letter, sigma in (("a", 0.04), ("b", 0.15)):
            data = {"N": counts}
            data.update(
                self._relaxation_rows(lambda n: figure_params(False, sigma, int(n)), counts, DONOR_ENERGIES, threads)
            )
            configs = [ensemble(figure_params(False, sigma, int(n)), letter) for n in counts] if ensemble is not None else []
            if configs and configs[0] is not None:
                names = [f"gamma_E1_{_label(e)}" for e in DONOR_ENERGIES]
                data.update(self._ensemble_rows(configs, DONOR_ENERGIES, names))
            panels[letter] = ResultTable.from_columns(f"gamma_vs_N_sigma{sigma:g}", data)
        return panels

    # ==================== TRANSPORT ====================

    def _transport_rows(self, params_for, axis_values, threads) -> Dict[str, list]:
        def row(value):
            params = params_for(value)
            return [self.rates.resonant_transport_rate(e, params, 1.0).value for e in DONOR_ENERGIES]

        rows = self.pool.map(row, axis_values, threads)
        return {f"Gamma_r_E1_{_label(e)}": [r[i] for r in rows] for i, e in enumerate(DONOR_ENERGIES)}

    def _resonant_transport(self, threads: Optional[int], ensemble: Optional[EnsembleFor] = None) -> Dict[str, ResultTable]:
        sigmas = np.geomspace(*SIGMA_GRID)
        counts = np.unique(np.rint(np.geomspace(*COUNT_GRID)).astype(np.int64))
        panels = {}
        for letter, detuned in (("a", False), ("b", True)):
            data = {"sigma": sigmas}
            data.update(self._transport_rows(lambda s: figure_params(detuned, s), sigmas, threads))
            panels[letter] = ResultTable.from_columns(
                f"Gamma_r_vs_sigma_{'off_resonant' if detuned else 'resonant'}", data, {"nu0": 1.0}
            )
        for letter, detuned, sigma in (("c", False, 0.04), ("d", True, 0.15)):
            data = {"N": counts}
            data.update(self._transport_rows(lambda n: figure_params(detuned, sigma, int(n)), counts, threads))
            panels[letter] = ResultTable.from_columns(
                f"Gamma_r_vs_N_{'off_resonant' if detuned else 'resonant'}_sigma{sigma:g}", data, {"nu0": 1.0}
            )
        return panels


figure_service = FigureService()
