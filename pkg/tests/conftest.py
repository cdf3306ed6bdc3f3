import pytest

from app.core.config import Settings
from app.core.disorder import sample_disorder
from app.models import ReservoirParams, SystemParams


@pytest.fixture
def resonant_params() -> SystemParams:
    return SystemParams(cavity_energy=1.0, emitter_center=1.0, coupling=0.001, emitter_count=2000, disorder_width=0.04)


@pytest.fixture
def off_resonant_params() -> SystemParams:
    return SystemParams(cavity_energy=1.05, emitter_center=0.95, coupling=0.001, emitter_count=2000, disorder_width=0.04)


@pytest.fixture
def small_params() -> SystemParams:
    return SystemParams(cavity_energy=1.0, emitter_center=0.98, coupling=0.01, emitter_count=8, disorder_width=0.05)


@pytest.fixture
def small_sample(small_params):
    return sample_disorder(small_params, seed=7)


@pytest.fixture
def reservoir() -> ReservoirParams:
    return ReservoirParams(
        acceptor_energy=1.0,
        reservoir_center=1.0,
        reservoir_width=1.0,
        reservoir_coupling=0.2,
        reservoir_mode_count=1,
        acceptor_ldos_const=1.0,
    )


@pytest.fixture
def isolated_settings() -> Settings:
    return Settings(_env_file=None, POLARITON_LAB_THREADS=1)
