"""
Configuration manager for loading and validating run configuration files.

Two formats are accepted:
- YAML (`.yaml` / `.yml`), parsed with `yaml.safe_load`;
- flat `key=value` lines with dotted keys (`model.variant=dwa`), `#` comments.
  Values are parsed as YAML scalars/flow sequences, so `[8, 16]`, `2.0` and
  `dwa` get their natural types.
"""

import yaml
import logging
from pathlib import Path
from typing import Optional, Dict, Any, Union

from pydantic import ValidationError

from .models import TrainConfig


logger = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    """Raised when a configuration file is missing, unreadable or invalid."""


class ConfigurationManager:
    """Manages loading and validation of run configuration files."""

    YAML_SUFFIXES = (".yaml", ".yml")

    def load_config(self, config_path: Optional[Union[str, Path]] = None) -> TrainConfig:
        """
        Load and validate configuration from a file.

        Args:
            config_path: Path to configuration file. If None, defaults are returned.

        Returns:
            Validated TrainConfig instance.

        Raises:
            ConfigurationError: If the file is missing, unparsable or invalid.
        """
        if config_path is None:
            logger.info("No configuration file given, using defaults")
            return TrainConfig()

        path = Path(config_path)
        if not path.exists():
            raise ConfigurationError(f"Configuration file not found: {path}")

        if path.suffix.lower() in self.YAML_SUFFIXES:
            config_dict = self._load_yaml_file(path)
        else:
            config_dict = self._load_key_value_file(path)
        config = self.validate_config(config_dict, source=str(path))
        logger.info(f"Loaded configuration from {path}")
        return config

    def validate_config(self, config: Dict[str, Any], source: str = "<dict>") -> TrainConfig:
        """
        Validate configuration dictionary using Pydantic.

        Args:
            config: Configuration dictionary to validate.
            source: Where the dictionary came from, for error messages.

        Returns:
            Validated TrainConfig instance.
        """
        try:
            return TrainConfig(**config)
        except (ValidationError, ValueError) as e:
            raise ConfigurationError(f"Invalid configuration in {source}: {e}") from e

    def _load_yaml_file(self, path: Path) -> Dict[str, Any]:
        """Load YAML file and return as dictionary."""
        try:
            with open(path, "r", encoding="utf-8") as file:
                data = yaml.safe_load(file) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Cannot parse {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path} must hold a mapping at the top level")
        return data

    def _load_key_value_file(self, path: Path) -> Dict[str, Any]:
        """Load flat dotted key=value lines into a nested dictionary."""
        result: Dict[str, Any] = {}
        with open(path, "r", encoding="utf-8") as file:
            for line_number, raw in enumerate(file, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"{path}:{line_number}: expected key=value, got {raw.strip()!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                if not key:
                    raise ConfigurationError(f"{path}:{line_number}: empty key")
                try:
                    parsed = yaml.safe_load(value) if value else None
                except yaml.YAMLError as e:
                    raise ConfigurationError(f"{path}:{line_number}: cannot parse value {value!r}: {e}") from e
                self._assign(result, key.split("."), parsed, f"{path}:{line_number}")
        return result

    @staticmethod
    def _assign(target: Dict[str, Any], keys: list, value: Any, where: str) -> None:
        for part in keys[:-1]:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"{where}: {part!r} is both a value and a section")
            target = node
        if keys[-1] in target:
            raise ConfigurationError(f"{where}: duplicate key {'.'.join(keys)!r}")
        target[keys[-1]] = value
