"""Monte Carlo ensemble configuration and comparison reports."""

from enum import Enum
from typing import Any, Dict, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .rates import RateResult
from .spectrum import Spectrum
from .system import ReservoirParams, SystemParams


class DonorMode(str, Enum):
    """Whether an end emitter keeps a pinned energy or a sampled Lorentzian one."""

    PINNED = "Pinned"
    SAMPLED = "Sampled"


class TransportSelection(str, Enum):
    """How the band roots of the transport matrix are turned into one rate.

    WINDOW averages the band around E1 and is the default; NEAREST reports the single root closest
    to E1, which follows one state's cavity weight and is kept as a diagnostic.
    """

    WINDOW = "window"
    NEAREST = "nearest"


class EnsembleConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: SystemParams = Field(..., description="System parameters shared by every sample.")
    reservoir: Optional[ReservoirParams] = Field(None, description="Acceptor reservoir for transport runs.")
    sample_count: int = Field(..., description="Number of disorder samples M_S.")
    base_seed: int = Field(0, description="Seed from which per-sample streams are derived.")
    fit_offset: Union[float, Literal["auto"]] = Field(
        "auto", description="Laplace fit offset or transport kernel width delta (eV), or 'auto'."
    )
    donor_mode: DonorMode = Field(DonorMode.PINNED, description="Pin energies[0] to E1 or keep it sampled.")
    acceptor_mode: DonorMode = Field(DonorMode.PINNED, description="Pin energies[-1] to E_N or keep it sampled.")
    extrapolate: bool = Field(True, description="Richardson-combine fits at delta and 2*delta.")
    selection: TransportSelection = Field(TransportSelection.WINDOW, description="Transport root selection rule.")
    tail_cutoff: Optional[float] = Field(None, description="Optional Lorentzian tail cutoff c.")
    threads: Optional[int] = Field(None, description="Worker cap; None uses POLARITON_LAB_THREADS.")

    @model_validator(mode="after")
    def _check(self) -> "EnsembleConfig":
        if self.sample_count < 2:
            raise ValueError("sample_count must be >= 2")
        if self.fit_offset != "auto" and not self.fit_offset > 0:
            raise ValueError("fit_offset must be positive or 'auto'")
        return self


class ComparisonReport(BaseModel):
    """Analytic vs ensemble result; passed iff max_rel_dev <= tolerance."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    analytic: Union[RateResult, Spectrum, Any] = Field(..., description="Analytic side.")
    ensemble: Union[RateResult, Spectrum, Any] = Field(..., description="Ensemble side.")
    max_rel_dev: float = Field(..., ge=0.0, description="Maximum relative deviation over the point set.")
    tolerance: float = Field(..., ge=0.0, description="Acceptance tolerance.")
    passed: bool = Field(..., description="max_rel_dev <= tolerance.")
    details: Dict[str, Any] = Field(default_factory=dict, description="Per-point deviations and locations.")

    @model_validator(mode="after")
    def _check_passed(self) -> "ComparisonReport":
        if self.passed != (self.max_rel_dev <= self.tolerance):
            raise ValueError("passed must equal max_rel_dev <= tolerance")
        return self
