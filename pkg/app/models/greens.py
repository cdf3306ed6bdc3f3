"""Site labels and pole expansions of the single-particle Green's functions."""

from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class SiteKind(str, Enum):
    """Which constituent a Green's-function index refers to."""

    CAVITY = "cavity"
    EMITTER = "emitter"
    BRIGHT = "bright"
    DARK = "dark"


class SiteIndex(BaseModel):
    """One of {Cavity, Emitter(j), BrightState, DarkState(k)}; j and k are 1-based."""

    model_config = ConfigDict(frozen=True)

    kind: SiteKind = Field(..., description="Constituent type.")
    index: Optional[int] = Field(None, description="Emitter index j or dark-state index k.")

    @model_validator(mode="after")
    def _check_index(self) -> "SiteIndex":
        needs_index = self.kind in (SiteKind.EMITTER, SiteKind.DARK)
        if needs_index and (self.index is None or self.index < 1):
            raise ValueError(f"{self.kind.value} site needs a positive index")
        if not needs_index and self.index is not None:
            raise ValueError(f"{self.kind.value} site takes no index")
        return self

    @classmethod
    def cavity(cls) -> "SiteIndex":
        return cls(kind=SiteKind.CAVITY)

    @classmethod
    def bright(cls) -> "SiteIndex":
        return cls(kind=SiteKind.BRIGHT)

    @classmethod
    def emitter(cls, j: int) -> "SiteIndex":
        return cls(kind=SiteKind.EMITTER, index=j)

    @classmethod
    def dark(cls, k: int) -> "SiteIndex":
        return cls(kind=SiteKind.DARK, index=k)

    @classmethod
    def parse(cls, text: str) -> "SiteIndex":
        """Parse `cavity`, `bright`, `emitter:J` or `dark:K`."""
        name, _, number = text.strip().lower().partition(":")
        kind = SiteKind(name)
        return cls(kind=kind, index=int(number) if number else None)

    @property
    def label(self) -> str:
        if self.index is None:
            return self.kind.value
        return f"{self.kind.value}:{self.index}"


class PoleExpansion(BaseModel):
    """Poles z_a in the Laplace plane and, when known, their residues A_a."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    poles: np.ndarray = Field(..., description="Complex Laplace poles z_a = -i E_a.")
    amplitudes: Optional[np.ndarray] = Field(None, description="Complex residues A_a (None for poles only).")

    @field_validator("poles", "amplitudes", mode="before")
    @classmethod
    def _as_complex(cls, value):
        if value is None:
            return None
        array = np.array(value, dtype=np.complex128).reshape(-1)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_lengths(self) -> "PoleExpansion":
        if self.amplitudes is not None and self.amplitudes.shape != self.poles.shape:
            raise ValueError("poles and amplitudes must have equal length")
        return self

    @property
    def energies(self) -> np.ndarray:
        """Real eigenenergies E_a = i z_a (imaginary parts are decay widths)."""
        return (1j * self.poles).real
