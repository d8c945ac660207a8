"""
Process-level configuration management.
"""
from functools import lru_cache

import psutil
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


def _default_workers() -> int:
    return max(1, min(4, psutil.cpu_count(logical=True) or 1))


class Settings(BaseSettings):
    """
    Process settings, read from the environment and an optional .env file.

    Experiment parameters live in the JSON experiment config, not here.
    """
    PROJECT_NAME: str = "conflictgrid"
    PROJECT_DESCRIPTION: str = (
        "Evidential occupancy grids and conflict-based inconsistency indicators"
    )
    VERSION: str = "0.1.0"
    ENVIRONMENT: str = "development"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = Field(default="json", description="json or console")

    # Batch execution
    SWEEP_WORKERS: int = Field(
        default_factory=_default_workers,
        ge=1,
        description="Default number of worker processes for sweeps",
    )
    OUTPUT_DIR: str = Field(default="results", description="Default output directory")
    DEFAULT_SEED: int = Field(default=2006, description="Base seed when none is configured")

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )


@lru_cache()
def get_settings() -> Settings:
    """
    Get process settings.

    Returns:
        Settings: Process settings
    """
    return Settings()


settings = get_settings()
