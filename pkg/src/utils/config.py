"""Configuration management for Spectral Surgery Lab."""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Numerical defaults and runtime settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=Path(__file__).parent.parent.parent / ".env",
        env_file_encoding="utf-8",
        env_prefix="SSL_",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = "INFO"
    debug: bool = False

    # Eigensolver
    eigen_tol: float = Field(default=1e-9, gt=0)
    dense_threshold: int = Field(default=300, ge=1)
    eigen_padding: int = Field(default=6, ge=1)
    eigen_max_iter: Optional[int] = None
    solver_seed: int = 0

    # Clusters
    cluster_tol: float = Field(default=1e-6, gt=0)
    cluster_ambiguity_factor: float = Field(default=100.0, ge=1.0)

    # Subgradients and optimizer
    rotation_samples: int = Field(default=8, ge=0)
    max_hull_samples: int = Field(default=32, ge=1)
    density_floor: float = Field(default=1e-14, gt=0)

    # Certificates
    branch_floor: float = Field(default=1e-6, gt=0)
    certificate_starts: int = Field(default=8, ge=1)

    # Runs
    runs_dir: Path = Path("runs")
    default_jobs: int = 1

    @field_validator("runs_dir", mode="before")
    @classmethod
    def coerce_runs_dir(cls, v):
        """Accept plain strings for the runs directory."""
        return Path(v) if isinstance(v, str) else v

    @field_validator("log_level")
    @classmethod
    def upper_log_level(cls, v: str) -> str:
        return v.upper()


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


def clear_settings_cache() -> None:
    """Clear the settings cache to force reload from environment."""
    get_settings.cache_clear()


settings = get_settings()
