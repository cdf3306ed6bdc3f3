"""Inputs and outputs of polynomial perturbation theory and exact stochastic mapping."""

from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ComplexFn = Callable[[complex], complex]
DensityFn = Callable[[np.ndarray], np.ndarray]

CONTOUR_POINTS = 16
DERIVATIVE_CHECK_TOL = 1e-6


def contour_derivative(function: ComplexFn, z0: complex, radius: float) -> complex:
    """dF/dz at z0 from the mean of F(z0 + r e^{it}) e^{-it} / r on a circle (exact for low-degree polynomials)."""
    angles = 2.0 * np.pi * np.arange(CONTOUR_POINTS) / CONTOUR_POINTS
    phases = np.exp(1j * angles)
    samples = np.array([function(z0 + radius * p) for p in phases], dtype=np.complex128)
    return complex(np.mean(samples / phases) / radius)


class PptProblem(BaseModel):
    """Unperturbed roots of a monic P0 and the perturbation P1 (with optional analytic derivative)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    unperturbed_roots: np.ndarray = Field(..., description="Roots z_mu^(0) of P0.")
    perturbation: ComplexFn = Field(..., description="P1(z).")
    derivative: Optional[ComplexFn] = Field(None, description="dP1/dz; numerical contour derivative if omitted.")
    step: float = Field(1e-3, gt=0.0, description="Radius (relative to root scale) of the derivative contour.")

    @field_validator("unperturbed_roots", mode="before")
    @classmethod
    def _roots(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.complex128).reshape(-1)
        if array.size == 0:
            raise ValueError("unperturbed_roots must not be empty")
        array.setflags(write=False)
        return array

    def contour_radius(self, root: complex) -> float:
        return self.step * max(1.0, abs(root))

    @model_validator(mode="after")
    def _check_derivative(self) -> "PptProblem":
        if self.derivative is None:
            return self
        point = complex(self.unperturbed_roots[0])
        radius = self.contour_radius(point)
        numeric = contour_derivative(self.perturbation, point, radius)
        supplied = complex(self.derivative(point))
        scale = abs(numeric) + abs(complex(self.perturbation(point))) / max(1.0, abs(point))
        if abs(supplied - numeric) > DERIVATIVE_CHECK_TOL * max(scale, 1e-300):
            raise ValueError(
                f"derivative inconsistent with perturbation at z={point}: {supplied} vs {numeric}"
            )
        return self


class EsmExpansion(BaseModel):
    """Pole sum sum_j i r_j / (z - i E_j) plus edge constants for the 1/E tails outside the pole window."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pole_positions: np.ndarray = Field(..., description="Real pole energies E_j.")
    coefficients: np.ndarray = Field(..., description="Real weights r_j.")
    density: DensityFn = Field(..., description="Pole density nu(E).")
    lower_edge: float = Field(..., description="Lower end of the pole window.")
    upper_edge: float = Field(..., description="Upper end of the pole window.")
    lower_tail: float = Field(0.0, description="c- with (1/pi) Im F(iE) ~ c-/E below the window.")
    upper_tail: float = Field(0.0, description="c+ with (1/pi) Im F(iE) ~ c+/E above the window.")

    @field_validator("pole_positions", "coefficients", mode="before")
    @classmethod
    def _real(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.float64).reshape(-1)
        array.setflags(write=False)
        return array
