"""Parameter validation: collect every violation, never abort."""

import logging
import math
from typing import List

from app.core.errors import InvalidParameterError
from app.models.system import ReservoirParams, SystemParams

logger = logging.getLogger(__name__)

# g sqrt(N) above this fraction of the smaller bare energy leaves the explored regime
REGIME_FRACTION = 0.1


def _finite(name: str, value: float, errors: List[str]) -> bool:
    if not math.isfinite(value):
        errors.append(f"{name} must be finite")
        return False
    return True


def validate(params: SystemParams) -> List[str]:
    """Return the list of invariant violations of `params` (empty when valid)."""
    errors: List[str] = []
    _finite("cavity_energy", params.cavity_energy, errors)
    _finite("emitter_center", params.emitter_center, errors)
    if _finite("coupling", params.coupling, errors) and params.coupling < 0:
        errors.append("coupling must be ≥ 0")
    if params.emitter_count < 1:
        errors.append("emitter_count must be ≥ 1")
    if _finite("disorder_width", params.disorder_width, errors) and params.disorder_width < 0:
        errors.append("disorder_width must be ≥ 0")

    if not errors:
        collective = params.collective_coupling
        if not math.isfinite(collective):
            errors.append("collective coupling g*sqrt(N) must be finite")
        else:
            scale = REGIME_FRACTION * min(params.cavity_energy, params.emitter_center)
            if collective > scale:
                logger.warning(
                    "g*sqrt(N)=%.6g eV exceeds %.2g*min(E_C, E_M)=%.6g eV; outside the weak-coupling regime",
                    collective, REGIME_FRACTION, scale,
                )
    return errors


def validate_reservoir(reservoir: ReservoirParams) -> List[str]:
    errors: List[str] = []
    _finite("acceptor_energy", reservoir.acceptor_energy, errors)
    _finite("reservoir_center", reservoir.reservoir_center, errors)
    if _finite("reservoir_width", reservoir.reservoir_width, errors) and reservoir.reservoir_width <= 0:
        errors.append("reservoir_width must be > 0")
    if _finite("reservoir_coupling", reservoir.reservoir_coupling, errors) and reservoir.reservoir_coupling < 0:
        errors.append("reservoir_coupling must be ≥ 0")
    if reservoir.reservoir_mode_count < 1:
        errors.append("reservoir_mode_count must be ≥ 1")
    _finite("acceptor_ldos_const", reservoir.acceptor_ldos_const, errors)
    return errors


def ensure_valid(params: SystemParams, operation: str = "core.validate") -> SystemParams:
    errors = validate(params)
    if errors:
        raise InvalidParameterError(errors, operation)
    return params


def ensure_valid_reservoir(reservoir: ReservoirParams, operation: str = "core.validate") -> ReservoirParams:
    errors = validate_reservoir(reservoir)
    if errors:
        raise InvalidParameterError(errors, operation)
    return reservoir


def require_disorder(params: SystemParams, operation: str) -> SystemParams:
    """Validate and additionally require sigma > 0 (thermodynamic-limit formulas)."""
    ensure_valid(params, operation)
    if params.disorder_width <= 0:
        raise InvalidParameterError(
            "disorder_width must be > 0 here; use the finite-size path for sigma = 0", operation
        )
    return params
