"""
Configuration management module for training runs.

This module handles loading, validating, and managing run configuration files
(YAML or flat key=value) using Pydantic for robust validation and type safety.
"""

from .config_manager import ConfigurationError, ConfigurationManager
from .models import OUT_DIR_ENV, TrainConfig, config_echo

__all__ = ["ConfigurationError", "ConfigurationManager", "OUT_DIR_ENV", "TrainConfig", "config_echo"]
