"""Lorentzian emitter disorder: density, distribution function and seeded sampling."""

import hashlib
import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel

from app.core.errors import InvalidParameterError
from app.models.system import DisorderSample, SystemParams

logger = logging.getLogger(__name__)

_MANTISSA = 2 ** 53


def lorentz_pdf(energy, center: float, width: float):
    """(1/pi) * sigma / ((E - E_M)^2 + sigma^2); accepts scalars or arrays."""
    if not width > 0:
        raise InvalidParameterError("disorder_width must be > 0 for the Lorentz density", "core.lorentz_pdf")
    x = np.asarray(energy, dtype=np.float64) - center
    value = width / (np.pi * (x * x + width * width))
    return float(value) if value.ndim == 0 else value


def lorentz_cdf(energy, center: float, width: float):
    if not width > 0:
        raise InvalidParameterError("disorder_width must be > 0 for the Lorentz distribution", "core.lorentz_cdf")
    value = 0.5 + np.arctan((np.asarray(energy, dtype=np.float64) - center) / width) / np.pi
    return float(value) if value.ndim == 0 else value


def lorentz_quantile(u, center: float, width: float):
    """Inverse CDF E = E_M + sigma * tan(pi (u - 1/2))."""
    value = center + width * np.tan(np.pi * (np.asarray(u, dtype=np.float64) - 0.5))
    return float(value) if value.ndim == 0 else value


def params_hash(params: BaseModel) -> str:
    """sha256 of the canonical JSON dump of a parameter model."""
    return hashlib.sha256(params.model_dump_json().encode("utf-8")).hexdigest()


def derive_sample_seed(base_seed: int, index: int, stream: int = 0) -> int:
    """Seed of sample `index`, derived through a SeedSequence spawn key.

    Stream 0 feeds the emitter energies; other streams give independent draws for the same sample.
    """
    if base_seed < 0 or index < 0 or stream < 0:
        raise InvalidParameterError("seeds, sample indices and streams must be non-negative", "core.derive_sample_seed")
    spawn_key = (index,) if stream == 0 else (index, stream)
    sequence = np.random.SeedSequence(base_seed, spawn_key=spawn_key)
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_generator(seed: int) -> np.random.Generator:
    """Counter-based Philox stream for one seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _open_uniforms(generator: np.random.Generator, count: int) -> np.ndarray:
    # midpoints of 2^53 cells: never exactly 0 or 1
    return (generator.integers(0, _MANTISSA, size=count, dtype=np.int64) + 0.5) / _MANTISSA


def sample_disorder(
    params: SystemParams,
    seed: int,
    tail_cutoff: Optional[float] = None,
) -> DisorderSample:
    """Draw E_j = E_M + sigma tan(pi (u_j - 1/2)) for j = 1..N from the Philox stream of `seed`.

    sigma = 0 returns the homogeneous sample without touching the generator. With
    `tail_cutoff` c, energies with |E_j - E_M| > c sigma are redrawn from the same stream.
    """
    count = params.emitter_count
    sigma = params.disorder_width
    digest = params_hash(params)
    if count < 1:
        raise InvalidParameterError("emitter_count must be ≥ 1", "core.sample_disorder")
    if sigma < 0:
        raise InvalidParameterError("disorder_width must be ≥ 0", "core.sample_disorder")
    if tail_cutoff is not None and not tail_cutoff > 0:
        raise InvalidParameterError("tail cutoff must be > 0", "core.sample_disorder")

    if sigma == 0:
        energies = np.full(count, params.emitter_center, dtype=np.float64)
        return DisorderSample(energies=energies, seed=seed, params_hash=digest, tail_cutoff=tail_cutoff)

    generator = make_generator(seed)
    energies = lorentz_quantile(_open_uniforms(generator, count), params.emitter_center, sigma)
    energies = np.atleast_1d(energies)

    if tail_cutoff is not None:
        bound = tail_cutoff * sigma
        rejected = np.abs(energies - params.emitter_center) > bound
        rounds = 0
        while np.any(rejected):
            energies[rejected] = lorentz_quantile(
                _open_uniforms(generator, int(rejected.sum())), params.emitter_center, sigma
            )
            rejected = np.abs(energies - params.emitter_center) > bound
            rounds += 1
        logger.debug("Tail cutoff c=%s needed %d redraw rounds (seed=%d)", tail_cutoff, rounds, seed)

    return DisorderSample(energies=energies, seed=seed, params_hash=digest, tail_cutoff=tail_cutoff)


def sample_energy(params: SystemParams, seed: int) -> float:
    """One Lorentzian energy from the Philox stream of `seed`."""
    sigma = params.disorder_width
    if not sigma > 0:
        raise InvalidParameterError("disorder_width must be > 0 to sample an energy", "core.sample_energy")
    return float(lorentz_quantile(_open_uniforms(make_generator(seed), 1)[0], params.emitter_center, sigma))


def expected_tail_mass(tail_cutoff: float) -> float:
    """Probability mass of the Lorentzian beyond |E - E_M| > c sigma."""
    return 1.0 - 2.0 * math.atan(tail_cutoff) / math.pi
