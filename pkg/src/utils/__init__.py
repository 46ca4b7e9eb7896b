# Utilities Package
"""Utility modules for Spectral Surgery Lab."""

from src.utils.config import Settings, clear_settings_cache, get_settings, settings
from src.utils.errors import (
    ClusterAmbiguityError,
    ConfigError,
    FunctionalError,
    MeshError,
    NumericalError,
    SolverError,
    SurfaceLabError,
    SurgeryError,
    ValidationError,
)
from src.utils.logging import LogContext, get_logger, setup_logging

__all__ = [
    # Config
    "Settings",
    "settings",
    "get_settings",
    "clear_settings_cache",
    # Logging
    "setup_logging",
    "get_logger",
    "LogContext",
    # Errors
    "SurfaceLabError",
    "ValidationError",
    "MeshError",
    "SurgeryError",
    "ConfigError",
    "FunctionalError",
    "NumericalError",
    "SolverError",
    "ClusterAmbiguityError",
]
