"""Run orchestration: flat config files + CLI overrides -> RunConfig -> result tables on disk."""

import json
import logging
import os
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from scipy import linalg

from app.core.config import Settings, settings as default_settings
from app.core.errors import ConfigError, InvalidParameterError, PolaritonLabError
from app.core.validation import ensure_valid
from app.models import (
    DonorMode,
    EnsembleConfig,
    OutputSpec,
    ProbeParams,
    ReservoirParams,
    ResultTable,
    RunConfig,
    RunMode,
    SiteIndex,
    SweepAxis,
    SweepSpec,
    SystemParams,
)
from app.services.effham_service import EffectiveHamiltonianService, effham_service
from app.services.ensemble_service import EnsembleService, ensemble_service
from app.services.figure_service import FigureService, figure_service
from app.services.numerics_service import NumericsService, numerics_service
from app.services.output_writer import OutputWriter, output_writer
from app.services.rate_service import RateService, rate_service
from app.services.spectra_service import SpectraService, spectra_service
from app.services.worker_pool import WorkerPool, worker_pool

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3

# flat key -> default; None means "not set"
DEFAULTS: Dict[str, Any] = {
    "mode": None,
    "EC": 1.0,
    "EM": 1.0,
    "g": 0.001,
    "N": 2000,
    "sigma": 0.04,
    "EN": 1.0,
    "ER": 1.0,
    "Sigma": 1.0,
    "gR": 0.2,
    "NR": 1,
    "nu0": 1.0,
    "D": 1.0,
    "E1": None,
    "seed": None,
    "threads": None,
    "format": "csv",
    "output": "-",
    "sweep": None,
    "ensemble": False,
    "MS": "auto",
    "delta": "auto",
    "site": "cavity",
    "figure": None,
    "panel": None,
    "tail_cutoff": None,
}


def exit_status(error: BaseException) -> int:
    """2 for configuration and parameter problems, 3 for numerical failures, 1 otherwise."""
    if isinstance(error, (ConfigError, InvalidParameterError, ValidationError)):
        return EXIT_INVALID
    if isinstance(error, (PolaritonLabError, linalg.LinAlgError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    return 1


class RunService:
    def __init__(
        self,
        effham: Optional[EffectiveHamiltonianService] = None,
        spectra: Optional[SpectraService] = None,
        rates: Optional[RateService] = None,
        numerics: Optional[NumericsService] = None,
        ensembles: Optional[EnsembleService] = None,
        figures: Optional[FigureService] = None,
        writer: Optional[OutputWriter] = None,
        pool: Optional[WorkerPool] = None,
        config: Optional[Settings] = None,
    ):
        self.effham = effham or effham_service
        self.spectra = spectra or spectra_service
        self.rates = rates or rate_service
        self.numerics = numerics or numerics_service
        self.ensembles = ensembles or ensemble_service
        self.figures = figures or figure_service
        self.writer = writer or output_writer
        self.pool = pool or worker_pool
        self.settings = config or default_settings

    # ==================== CONFIG ====================

    @staticmethod
    def read_config_file(path: str) -> Dict[str, Any]:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e.strerror}")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"cannot parse {path}: {e.msg}", line=e.lineno, column=e.colno)
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a single object of settings")
        return data

    def merge(self, file_values: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
        """Defaults < file < flags. Unknown keys are rejected, conflicts logged."""
        unknown = sorted(set(file_values) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        merged = {**DEFAULTS, **file_values}
        for key, value in overrides.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown override {key!r}")
            if value is None:
                continue
            if key in file_values and file_values[key] != value:
                logger.warning("Flag --%s=%r overrides config file value %r", key, value, file_values[key])
            merged[key] = value
        if merged["seed"] is None:
            merged["seed"] = self.settings.DEFAULT_SEED
        return merged

    @staticmethod
    def _sweep(value: Any) -> Optional[SweepSpec]:
        if value is None:
            return None
        if not isinstance(value, dict) or set(value) != {"axis", "grid"}:
            raise ConfigError("sweep must be an object with keys 'axis' and 'grid'")
        try:
            return SweepSpec.parse(value["axis"], value["grid"])
        except ValueError as e:
            raise ConfigError(f"invalid sweep: {e}")

    def build(self, flat: Dict[str, Any]) -> RunConfig:
        """Nested RunConfig from the merged flat mapping (pydantic ValidationError on bad values)."""
        if flat["mode"] is None:
            raise ConfigError("no run mode given")
        return RunConfig(
            mode=flat["mode"],
            params=SystemParams(
                cavity_energy=flat["EC"],
                emitter_center=flat["EM"],
                coupling=flat["g"],
                emitter_count=flat["N"],
                disorder_width=flat["sigma"],
            ),
            reservoir=ReservoirParams(
                acceptor_energy=flat["EN"],
                reservoir_center=flat["ER"],
                reservoir_width=flat["Sigma"],
                reservoir_coupling=flat["gR"],
                reservoir_mode_count=flat["NR"],
                acceptor_ldos_const=flat["nu0"],
            ),
            probe=ProbeParams(probe_coupling=flat["D"]),
            sweep=self._sweep(flat["sweep"]),
            output=OutputSpec(path=flat["output"], format=flat["format"]),
            seed=flat["seed"],
            threads=flat["threads"],
            donor_energy=flat["E1"],
            ensemble=flat["ensemble"],
            sample_count=flat["MS"],
            fit_offset=flat["delta"],
            site=flat["site"],
            figure=flat["figure"],
            panel=flat["panel"],
            tail_cutoff=flat["tail_cutoff"],
        )

    def load_config(self, path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        file_values = self.read_config_file(path) if path else {}
        return self.build(self.merge(file_values, overrides or {}))

    @staticmethod
    def flatten(config: RunConfig) -> Dict[str, Any]:
        """Inverse of `build`: the flat mapping that reproduces `config` when loaded again."""
        p, r = config.params, config.reservoir
        sweep = None
        if config.sweep is not None:
            s = config.sweep
            sweep = {"axis": s.axis.value, "grid": f"{s.start:.17g}:{s.stop:.17g}:{s.count}{s.scale}"}
        flat = {
            "mode": config.mode.value,
            "EC": p.cavity_energy,
            "EM": p.emitter_center,
            "g": p.coupling,
            "N": p.emitter_count,
            "sigma": p.disorder_width,
            "D": config.probe.probe_coupling,
            "E1": config.donor_energy,
            "seed": config.seed,
            "threads": config.threads,
            "format": config.output.format.value,
            "output": config.output.path,
            "sweep": sweep,
            "ensemble": config.ensemble,
            "MS": config.sample_count,
            "delta": config.fit_offset,
            "site": config.site,
            "figure": config.figure,
            "panel": config.panel,
            "tail_cutoff": config.tail_cutoff,
        }
        if r is not None:
            flat.update({
                "EN": r.acceptor_energy,
                "ER": r.reservoir_center,
                "Sigma": r.reservoir_width,
                "gR": r.reservoir_coupling,
                "NR": r.reservoir_mode_count,
                "nu0": r.acceptor_ldos_const,
            })
        return flat

    # ==================== HELPERS ====================

    @staticmethod
    def check_output(output: OutputSpec) -> None:
        if output.path == "-":
            return
        directory = Path(output.path).parent
        existing = directory
        while not existing.exists():
            existing = existing.parent
        if not existing.is_dir() or not os.access(existing, os.W_OK):
            raise ConfigError(f"output directory {directory} is not writable", operation="cli.run")

    def _donor(self, config: RunConfig) -> float:
        return config.donor_energy if config.donor_energy is not None else config.params.emitter_center

    def _points(self, config: RunConfig, allowed: Tuple[SweepAxis, ...]) -> Tuple[str, List[Tuple[Any, SystemParams, float]]]:
        """(axis column, [(axis value, params, donor energy)]) for the sweep or the single configured point."""
        donor = self._donor(config)
        if config.sweep is None:
            return "sigma", [(config.params.disorder_width, config.params, donor)]
        axis = config.sweep.axis
        if axis not in allowed:
            raise ConfigError(f"mode {config.mode.value} cannot sweep {axis.value}", operation="cli.run")
        points = []
        for value in config.sweep.values():
            if axis == SweepAxis.SIGMA:
                points.append((float(value), config.params.with_updates(disorder_width=float(value)), donor))
            elif axis == SweepAxis.N:
                points.append((int(value), config.params.with_updates(emitter_count=int(value)), donor))
            else:
                points.append((float(value), config.params, float(value)))
        return axis.value, points

    def _ensemble_config(self, config: RunConfig, params: SystemParams, **extra) -> EnsembleConfig:
        count = config.sample_count
        if count == "auto":
            count = self.ensembles.auto_sample_count(params.emitter_count)
        return EnsembleConfig(
            params=params,
            reservoir=config.reservoir,
            sample_count=count,
            base_seed=config.seed,
            fit_offset=config.fit_offset,
            tail_cutoff=config.tail_cutoff,
            threads=config.threads,
            **extra,
        )

    # ==================== MODES ====================

    def _eigs(self, config: RunConfig) -> List[ResultTable]:
        if config.sweep is not None and config.sweep.axis == SweepAxis.E1:
            raise ConfigError("eigenenergies do not depend on E1", operation="cli.run")
        axis = config.sweep.axis.value if config.sweep is not None else "sigma"
        values = config.sweep.values() if config.sweep is not None else [config.params.disorder_width]
        pairs = self.effham.eigenenergy_sweep(config.params, axis, values)
        data = {
            axis: list(values),
            "re_eps1": [p.eps1.real for p in pairs],
            "im_eps1": [p.eps1.imag for p in pairs],
            "re_eps2": [p.eps2.real for p in pairs],
            "im_eps2": [p.eps2.imag for p in pairs],
            "regime": [p.regime.value for p in pairs],
        }
        return [ResultTable.from_columns("eigs", data, {"sigma_ep": config.params.rabi_frequency})]

    def _spectra(self, config: RunConfig) -> List[ResultTable]:
        if config.ensemble:
            return self._ensemble_spectrum(config)
        spectrum = self.spectra.ldos_panel(ensure_valid(config.params, "spectra.ldos_panel"), config.probe)
        data = {"omega": spectrum.grid, **spectrum.channels}
        return [ResultTable.from_columns("spectra", data, {"probe_coupling": config.probe.probe_coupling})]

    def _ensemble_spectrum(self, config: RunConfig) -> List[ResultTable]:
        params = ensure_valid(config.params, "ensemble.run_spectrum_ensemble")
        try:
            site = SiteIndex.parse(config.site)
        except ValueError as e:
            raise ConfigError(f"invalid site {config.site!r}: {e}", operation="cli.run")
        grid = self.spectra.default_grid(params)
        if config.fit_offset == "auto":
            broadening = self.spectra.default_broadening(params, grid)
        else:
            broadening = float(config.fit_offset)
        cfg = self._ensemble_config(config, params)
        spectrum = self.ensembles.run_spectrum_ensemble(cfg, site, grid, broadening)
        data = {
            "omega": grid,
            "ldos_ensemble": spectrum["ldos"],
            "ldos_stderr": spectrum["ldos_stderr"],
            "ldos_analytic": self.spectra.broadened_ldos(site, grid, params, broadening),
        }
        metadata = {"site": site.label, "broadening": broadening, "sample_count": cfg.sample_count}
        return [ResultTable.from_columns("ensemble_ldos", data, metadata)]

    def _relax(self, config: RunConfig) -> List[ResultTable]:
        axis, points = self._points(config, (SweepAxis.SIGMA, SweepAxis.N, SweepAxis.E1))

        def analytic(point):
            _, params, donor = point
            rate = self.rates.relaxation_rate(donor, params)
            return [donor, rate.value, rate.inverse, self.rates.avg_relaxation_rate(params).value]

        rows = self.pool.map(analytic, points, config.threads)
        data = {
            axis: [p[0] for p in points],
            "E1": [r[0] for r in rows],
            "gamma": [r[1] for r in rows],
            "tau": [r[2] for r in rows],
            "gamma_avg": [r[3] for r in rows],
        }
        metadata: Dict[str, Any] = {}
        if config.ensemble:
            results = [
                self.ensembles.run_relaxation_ensemble(self._ensemble_config(config, params), donor)
                for _, params, donor in points
            ]
            data["gamma_ensemble"] = [r.value for r in results]
            data["gamma_ensemble_stderr"] = [r.stderr for r in results]
            data["sample_count"] = [r.provenance.sample_count for r in results]
            metadata["fit_offsets"] = [r.metadata.get("fit_offset") for r in results]
        return [ResultTable.from_columns("relax", data, metadata)]

    def _transport(self, config: RunConfig) -> List[ResultTable]:
        axis, points = self._points(config, (SweepAxis.SIGMA, SweepAxis.N, SweepAxis.E1))
        reservoir = config.reservoir

        def analytic(point):
            _, params, donor = point
            return [
                donor,
                self.rates.transport_rate(donor, params, reservoir).value,
                self.rates.resonant_transport_rate(donor, params, reservoir.acceptor_ldos_const).value,
                self.rates.avg_transport_rate(params).value,
                float(self.numerics.transport_ppt_rates(params, reservoir, [donor])["Gamma"][0]),
            ]

        rows = self.pool.map(analytic, points, config.threads)
        data = {
            axis: [p[0] for p in points],
            "E1": [r[0] for r in rows],
            "Gamma": [r[1] for r in rows],
            "Gamma_r": [r[2] for r in rows],
            "Gamma_avg": [r[3] for r in rows],
            "Gamma_ppt": [r[4] for r in rows],
        }
        if config.ensemble:
            results = [
                self.ensembles.run_transport_ensemble(
                    self._ensemble_config(config, params, donor_mode=DonorMode.PINNED), donor
                )
                for _, params, donor in points
            ]
            data["Gamma_ensemble"] = [r.value for r in results]
            data["Gamma_ensemble_stderr"] = [r.stderr for r in results]
            data["sample_count"] = [r.provenance.sample_count for r in results]
        return [ResultTable.from_columns("transport", data, {"nu0": reservoir.acceptor_ldos_const})]

    def _sweep_mode(self, config: RunConfig) -> List[ResultTable]:
        if config.sweep is None:
            raise ConfigError("sweep mode needs --sweep AXIS GRID", operation="cli.run")
        axis, points = self._points(config, (SweepAxis.SIGMA, SweepAxis.N, SweepAxis.E1))
        nu0 = config.reservoir.acceptor_ldos_const

        def row(point):
            _, params, donor = point
            pair = self.effham.eigenenergies(params)
            return [
                donor,
                pair.regime.value,
                self.rates.relaxation_rate(donor, params).value,
                self.rates.avg_relaxation_rate(params).value,
                self.rates.resonant_transport_rate(donor, params, nu0).value,
            ]

        rows = self.pool.map(row, points, config.threads)
        columns = ("E1", "regime", "gamma", "gamma_avg", "Gamma_r")
        data = {axis: [p[0] for p in points]}
        data.update({name: [r[i] for r in rows] for i, name in enumerate(columns)})
        return [ResultTable.from_columns("sweep", data, {"nu0": nu0})]

    def _reproduce(self, config: RunConfig) -> List[ResultTable]:
        if config.figure is None:
            raise ConfigError("reproduce-fig needs a figure id", operation="cli.run")
        sample_count = config.sample_count if config.ensemble else None
        return self.figures.reproduce(config.figure, config.panel, config.threads, sample_count, config.seed)

    def compute(self, config: RunConfig) -> List[ResultTable]:
        handlers: Dict[RunMode, Callable[[RunConfig], List[ResultTable]]] = {
            RunMode.EIGS: self._eigs,
            RunMode.SPECTRA: self._spectra,
            RunMode.RELAX: self._relax,
            RunMode.TRANSPORT: self._transport,
            RunMode.ENSEMBLE: self._ensemble_spectrum,
            RunMode.SWEEP: self._sweep_mode,
            RunMode.REPRODUCE_FIG: self._reproduce,
        }
        return handlers[config.mode](config)

    # ==================== ENTRY ====================

    def run(self, config: RunConfig) -> List[str]:
        """Compute and write every table of one run; returns the files written."""
        self.check_output(config.output)
        logger.info("Running %s (seed=%d)", config.mode.value, config.seed)
        tables = self.compute(config)
        extra = {"delta": config.fit_offset, "tail_cutoff": config.tail_cutoff}
        header = self.writer.header(self.flatten(config), config.seed, extra)
        return self.writer.write(tables, header, config.output.path, config.output.format)

    def main(self, path: Optional[str], overrides: Dict[str, Any]) -> int:
        """load_config + run with errors mapped onto exit statuses."""
        try:
            self.run(self.load_config(path, overrides))
            return EXIT_OK
        except ValidationError as e:
            for error in e.errors():
                logger.error("Invalid configuration: %s: %s", ".".join(str(x) for x in error["loc"]), error["msg"])
            return exit_status(e)
        except (PolaritonLabError, linalg.LinAlgError, np.linalg.LinAlgError) as e:
            operation = getattr(e, "operation", None) or "cli.run"
            logger.error("%s failed: %s", operation, e, exc_info=True)
            return exit_status(e)


run_service = RunService()

