"""Rate results with their provenance."""

import math
from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class RateKind(str, Enum):
    RELAX_ENERGY_RESOLVED = "RelaxEnergyResolved"
    RELAX_AVERAGED = "RelaxAveraged"
    TRANSPORT_ENERGY_RESOLVED = "TransportEnergyResolved"
    TRANSPORT_RESONANT = "TransportResonant"
    TRANSPORT_AVERAGED = "TransportAveraged"


class ProvenanceKind(str, Enum):
    ANALYTIC = "Analytic"
    ENSEMBLE = "Ensemble"


class Provenance(BaseModel):
    """Where a rate came from; ensemble results carry M_S and the standard error."""

    model_config = ConfigDict(frozen=True)

    kind: ProvenanceKind = Field(ProvenanceKind.ANALYTIC, description="Analytic or Ensemble.")
    sample_count: Optional[int] = Field(None, description="Number of samples entering the mean (M_S).")
    stderr: Optional[float] = Field(None, description="Standard error of the ensemble mean (eV).")
    dropped: int = Field(0, description="Samples dropped because their fit or eigensolve failed.")

    @model_validator(mode="after")
    def _check_ensemble(self) -> "Provenance":
        if self.kind == ProvenanceKind.ENSEMBLE:
            if self.sample_count is None or self.sample_count < 2:
                raise ValueError("ensemble provenance needs sample_count >= 2")
            if self.stderr is None or self.stderr < 0:
                raise ValueError("ensemble provenance needs stderr >= 0")
        return self

    @classmethod
    def analytic(cls) -> "Provenance":
        return cls()

    @classmethod
    def ensemble(cls, sample_count: int, stderr: float, dropped: int = 0) -> "Provenance":
        return cls(kind=ProvenanceKind.ENSEMBLE, sample_count=sample_count, stderr=stderr, dropped=dropped)


class RateResult(BaseModel):
    """A relaxation or transport rate in eV (hbar = 1)."""

    model_config = ConfigDict(frozen=True)

    value: float = Field(..., description="Rate (eV); only an ensemble mean may come out negative.")
    kind: RateKind = Field(..., description="Which rate this is.")
    provenance: Provenance = Field(default_factory=Provenance.analytic, description="Analytic or ensemble origin.")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Inputs and numerical choices (offsets, selection).")

    @model_validator(mode="after")
    def _check_sign(self) -> "RateResult":
        if self.value < 0 and self.provenance.kind != ProvenanceKind.ENSEMBLE:
            raise ValueError("analytic rates must be >= 0")
        return self

    @property
    def flagged(self) -> bool:
        """True for an ensemble mean that came out negative (noise dominated)."""
        return self.value < 0

    @property
    def inverse(self) -> float:
        """Mean first-passage time 1/value (1/eV); infinite for a vanishing or negative rate."""
        return math.inf if self.value <= 0.0 else 1.0 / self.value

    @property
    def stderr(self) -> float:
        return self.provenance.stderr or 0.0
