"""Eigenenergies of the disorder-averaged effective Hamiltonian."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class Regime(str, Enum):
    UNDERDAMPED = "Underdamped"
    EXCEPTIONAL_POINT = "ExceptionalPoint"
    OVERDAMPED = "Overdamped"
    OFF_RESONANT = "OffResonant"


class EigenPair(BaseModel):
    """Lower (eps1) and upper (eps2) polariton energies, ordered by real part then imaginary part."""

    model_config = ConfigDict(frozen=True)

    eps1: complex = Field(..., description="First complex eigenenergy (eV).")
    eps2: complex = Field(..., description="Second complex eigenenergy (eV).")
    rabi_splitting: float = Field(..., description="Re(eps2 - eps1) >= 0 (eV).")
    regime: Regime = Field(..., description="Damping regime classification.")
    dark_energy: complex = Field(..., description="Dark-state block E_M - i sigma (eV).")
    exceptional_width: float = Field(..., description="sigma_EP = Omega (eV); meaningful for resonant systems.")

    @property
    def widths(self) -> tuple[float, float]:
        """Decay widths -Im eps."""
        return -self.eps1.imag, -self.eps2.imag
