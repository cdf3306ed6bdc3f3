"""Frequency grids carrying LDOS / absorption channels."""

from typing import Any, Dict

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Spectrum(BaseModel):
    """A monotone frequency grid with named channels evaluated on it."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray = Field(..., description="Strictly increasing frequencies (eV).")
    channels: Dict[str, np.ndarray] = Field(default_factory=dict, description="Channel name -> values (1/eV).")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Params snapshot, broadening, sample count.")

    @field_validator("grid", mode="before")
    @classmethod
    def _grid(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.float64).reshape(-1)
        if array.size > 1 and np.any(np.diff(array) <= 0):
            raise ValueError("grid must be strictly increasing")
        array.setflags(write=False)
        return array

    @field_validator("channels", mode="before")
    @classmethod
    def _channels(cls, value) -> Dict[str, np.ndarray]:
        frozen = {}
        for name, values in dict(value).items():
            array = np.array(values, dtype=np.float64).reshape(-1)
            array.setflags(write=False)
            frozen[name] = array
        return frozen

    @model_validator(mode="after")
    def _check_lengths(self) -> "Spectrum":
        for name, values in self.channels.items():
            if values.shape != self.grid.shape:
                raise ValueError(f"channel {name!r} has {values.size} values for {self.grid.size} grid points")
        return self

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def with_channels(self, **channels: np.ndarray) -> "Spectrum":
        return Spectrum(grid=self.grid, channels={**self.channels, **channels}, metadata=self.metadata)
