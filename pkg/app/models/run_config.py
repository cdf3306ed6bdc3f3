"""Command-line run configuration."""

import re
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .system import ProbeParams, ReservoirParams, SystemParams

_GRID_PATTERN = re.compile(r"^\s*([^:]+):([^:]+):(\d+)\s*(log|lin)?\s*$")


class RunMode(str, Enum):
    EIGS = "eigs"
    SPECTRA = "spectra"
    RELAX = "relax"
    TRANSPORT = "transport"
    ENSEMBLE = "ensemble"
    SWEEP = "sweep"
    REPRODUCE_FIG = "reproduce-fig"


class SweepAxis(str, Enum):
    SIGMA = "sigma"
    N = "N"
    E1 = "E1"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class SweepSpec(BaseModel):
    """Grid START:STOP:COUNT on a log or linear scale."""

    model_config = ConfigDict(frozen=True)

    axis: SweepAxis = Field(..., description="Swept quantity.")
    start: float = Field(..., description="First grid value.")
    stop: float = Field(..., description="Last grid value.")
    count: int = Field(..., description="Number of grid points (>= 2).")
    scale: Literal["log", "lin"] = Field("lin", description="Grid spacing.")

    @model_validator(mode="after")
    def _check(self) -> "SweepSpec":
        if self.count < 2:
            raise ValueError("sweep grids need at least 2 points")
        if self.scale == "log" and (self.start <= 0 or self.stop <= 0):
            raise ValueError("log sweeps need positive bounds")
        return self

    @classmethod
    def parse(cls, axis: str, text: str) -> "SweepSpec":
        match = _GRID_PATTERN.match(text)
        if match is None:
            raise ValueError(f"cannot parse sweep grid {text!r}; expected START:STOP:COUNT[log|lin]")
        start, stop, count, scale = match.groups()
        return cls(axis=SweepAxis(axis), start=float(start), stop=float(stop), count=int(count), scale=scale or "lin")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            grid = np.geomspace(self.start, self.stop, self.count)
        else:
            grid = np.linspace(self.start, self.stop, self.count)
        if self.axis == SweepAxis.N:
            grid = np.unique(np.rint(grid).astype(np.int64))
        return grid


class OutputSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: str = Field("-", description="Output file path; '-' writes to stdout.")
    format: OutputFormat = Field(OutputFormat.CSV, description="csv or json.")


class RunConfig(BaseModel):
    """Merged configuration of one CLI invocation (file values overridden by flags)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: RunMode = Field(..., description="Subcommand.")
    params: SystemParams = Field(..., description="System parameters.")
    reservoir: Optional[ReservoirParams] = Field(None, description="Acceptor reservoir (transport modes).")
    probe: ProbeParams = Field(default_factory=ProbeParams, description="Probe coupling for matter absorption.")
    sweep: Optional[SweepSpec] = Field(None, description="Sweep axis and grid.")
    output: OutputSpec = Field(default_factory=OutputSpec, description="Artifact path and format.")
    seed: int = Field(..., description="Base seed for every random stream.")
    threads: Optional[int] = Field(None, description="Worker cap; None falls back to POLARITON_LAB_THREADS.")
    donor_energy: Optional[float] = Field(None, description="Donor energy E1 (eV); defaults to E_M.")
    ensemble: bool = Field(False, description="Run the Monte Carlo oracle instead of the analytic path.")
    sample_count: Union[int, Literal["auto"]] = Field("auto", description="M_S or 'auto' (M_S * N = 10^6).")
    fit_offset: Union[float, Literal["auto"]] = Field("auto", description="Ensemble offset delta (eV).")
    site: str = Field("cavity", description="Site for ensemble spectra: cavity, bright, emitter:J or dark:K.")
    figure: Optional[str] = Field(None, description="Figure id for reproduce-fig.")
    panel: Optional[str] = Field(None, description="Panel letter for reproduce-fig.")
    tail_cutoff: Optional[float] = Field(None, description="Optional Lorentzian tail cutoff c.")


class ResultTable(BaseModel):
    """Columns plus rows of one artifact, with the numerical choices that produced it."""

    name: str = Field(..., description="Table name, used as a file suffix when a run emits several.")
    columns: List[str] = Field(..., description="Column names.")
    rows: List[List[Any]] = Field(default_factory=list, description="Row values (numbers or labels).")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Broadenings, offsets, sample counts.")

    @model_validator(mode="after")
    def _check_rows(self) -> "ResultTable":
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"row of length {len(row)} for {len(self.columns)} columns")
        return self

    @classmethod
    def from_columns(cls, name: str, data: Dict[str, Any], metadata: Optional[Dict[str, Any]] = None) -> "ResultTable":
        columns = list(data)
        length = len(next(iter(data.values()))) if data else 0
        rows = [[_plain(data[c][i]) for c in columns] for i in range(length)]
        return cls(name=name, columns=columns, rows=rows, metadata=metadata or {})


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    return value
