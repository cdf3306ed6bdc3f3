"""Application configuration helpers."""

from functools import lru_cache
import logging
import os
from typing import Literal

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings

logger = logging.getLogger(__name__)


def _resolve_env_file() -> str:
    """Pick the appropriate .env file based on ENV variable."""
    env: Literal["dev", "prod", "test"] = os.getenv("ENV", "dev").lower()  # type: ignore[assignment]
    candidate = f".env.{env}"
    if os.path.exists(candidate):
        return candidate
    return ".env"


ENV_FILE = _resolve_env_file()
load_dotenv(ENV_FILE)
logger.debug("Loaded environment from: %s", ENV_FILE)


class Settings(BaseSettings):
    """Centralised configuration for polariton-lab."""

    POLARITON_LAB_THREADS: int = Field(0, description="Default worker count for sweeps and ensembles (0 = one per CPU)")
    LOG_LEVEL: str = Field("INFO", description="Root log level used by the command-line entry point")
    DEFAULT_SEED: int = Field(20240517, description="Base seed when neither flag nor config supplies one")

    MAX_DENSE_EMITTERS: int = Field(100_000, description="Largest N accepted by the dense arrowhead eigensolve")
    POLE_COLLISION_TOL: float = Field(1e-12, description="Relative distance below which z counts as sitting on a pole")
    RESONANCE_TOL: float = Field(1e-9, description="|E_C - E_M| (eV) below which the system counts as resonant")
    EP_TOL: float = Field(1e-9, description="|sigma - Omega| (eV) below which the exceptional point is reported")

    GRID_POINTS: int = Field(2001, description="Points of the default frequency grid")
    ENSEMBLE_SAMPLE_PRODUCT: float = Field(1e6, description="Target M_S * N used by --MS auto")
    FIT_OFFSET_POLE_FRACTION: float = Field(
        0.025, description="Automatic offsets stay below this fraction of the distance from E1 to the nearest complex pole"
    )
    ACCEPTOR_VALIDITY_FRACTION: float = Field(0.1, description="n_acceptors / N above which a validity warning is logged")
    DROP_WARNING_FRACTION: float = Field(0.01, description="Fraction of dropped ensemble samples that triggers a warning")

    model_config = {
        "env_file": ENV_FILE,
        "case_sensitive": True,
        "extra": "ignore"
    }


@lru_cache()
def get_settings() -> Settings:
    """Return a cached Settings instance."""
    return Settings()


# Eagerly instantiate for modules that `from app.core.config import settings`.
settings = get_settings()
