"""Pydantic models for the cavity + emitter system and its disorder realizations."""

import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class SystemParams(BaseModel):
    """Cavity mode collectively coupled to N emitters with Lorentzian disorder (energies in eV)."""

    model_config = ConfigDict(frozen=True)

    cavity_energy: float = Field(..., description="Cavity mode energy E_C (eV).")
    emitter_center: float = Field(..., description="Center E_M of the emitter energy distribution (eV).")
    coupling: float = Field(..., description="Single-emitter coupling g (eV).")
    emitter_count: int = Field(..., description="Number of emitters N.")
    disorder_width: float = Field(..., description="Lorentzian half width sigma (eV).")

    @property
    def collective_coupling(self) -> float:
        """g * sqrt(N)."""
        return self.coupling * math.sqrt(max(self.emitter_count, 0))

    @property
    def rabi_frequency(self) -> float:
        """Homogeneous Rabi frequency Omega = 2 g sqrt(N)."""
        return 2.0 * self.collective_coupling

    @property
    def coupling_strength(self) -> float:
        """g^2 N, the combination that survives the thermodynamic limit."""
        return self.coupling ** 2 * self.emitter_count

    def with_updates(self, **changes) -> "SystemParams":
        """Return a copy with some fields replaced (validated again)."""
        return SystemParams(**{**self.model_dump(), **changes})


class ReservoirParams(BaseModel):
    """Acceptor emitter coupled to a Lorentz-distributed reservoir of N_R modes."""

    model_config = ConfigDict(frozen=True)

    acceptor_energy: float = Field(..., description="Acceptor energy E_N (eV).")
    reservoir_center: float = Field(..., description="Center E_R of the reservoir mode distribution (eV).")
    reservoir_width: float = Field(..., description="Lorentzian half width Sigma of the reservoir (eV).")
    reservoir_coupling: float = Field(..., description="Acceptor-reservoir coupling g_R (eV).")
    reservoir_mode_count: int = Field(1, description="Number of reservoir modes N_R.")
    acceptor_ldos_const: float = Field(1.0, description="Constant acceptor LDOS nu_0 (1/eV) for the resonant rate.")

    @property
    def reservoir_strength(self) -> float:
        """N_R g_R^2."""
        return self.reservoir_mode_count * self.reservoir_coupling ** 2


class ProbeParams(BaseModel):
    """Homogeneous dipole coupling D of an external probe field to every emitter."""

    model_config = ConfigDict(frozen=True)

    probe_coupling: float = Field(1.0, description="Dimensionless probe amplitude D.")


class DisorderSample(BaseModel):
    """One realization {E_j} of the emitter energies and the seed that produced it."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    energies: np.ndarray = Field(..., description="Emitter energies E_1..E_N (eV), read-only.")
    seed: int = Field(..., description="64-bit seed of the generating stream.")
    params_hash: str = Field(..., description="Digest of the SystemParams used for sampling.")
    tail_cutoff: Optional[float] = Field(None, description="Rejection cutoff c (|E - E_M| <= c*sigma) if used.")

    @field_validator("energies", mode="before")
    @classmethod
    def _freeze_energies(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.float64).reshape(-1)
        array.setflags(write=False)
        return array

    @property
    def size(self) -> int:
        return int(self.energies.shape[0])

    def _replace(self, index: int, energy: float) -> "DisorderSample":
        energies = self.energies.copy()
        energies[index] = energy
        return DisorderSample(
            energies=energies,
            seed=self.seed,
            params_hash=self.params_hash,
            tail_cutoff=self.tail_cutoff,
        )

    def with_donor(self, energy: float) -> "DisorderSample":
        """Pin the donor (first emitter) to `energy`."""
        return self._replace(0, energy)

    def with_acceptor(self, energy: float) -> "DisorderSample":
        """Pin the acceptor (last emitter) to `energy`."""
        return self._replace(-1, energy)
