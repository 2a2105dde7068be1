"""
Lightweight configuration loader for YAML experiment profiles.
Profiles live in config/<profile>/experiment.yaml; an explicit file and
command-line overrides are layered on top of the profile.
"""
import logging
import os
from typing import Any, Dict, List, Optional

import yaml
from pydantic import ValidationError

from .default_settings import BUILTIN_PROFILES
from .errors import ConfigError
from .settings import ExperimentSpec

logger = logging.getLogger(__name__)

EXPERIMENT_FILE = 'experiment.yaml'


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigCache:
    """Profile loader - not a singleton, just a utility."""

    def __init__(self, config_dir: Optional[str] = None):
        """Initialize config loader with directory path."""
        if config_dir is None:
            config_dir = os.getenv('PRIVIC_CONFIG_DIR')
        if config_dir is None:
            # Default to config directory in project root
            project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
            config_dir = os.path.join(project_root, 'config')

        self.config_dir = config_dir

    def list_profiles(self) -> List[str]:
        if not os.path.isdir(self.config_dir):
            return []
        return sorted(name for name in os.listdir(self.config_dir)
                      if os.path.exists(os.path.join(self.config_dir, name, EXPERIMENT_FILE)))

    def get_profile(self, profile: str) -> Dict[str, Any]:
        """
        Raw settings of a profile. Profiles without a file fall back to the
        built-in settings of the same name.
        """
        path = os.path.join(self.config_dir, profile, EXPERIMENT_FILE)
        if not os.path.exists(path):
            if profile in BUILTIN_PROFILES:
                return BUILTIN_PROFILES[profile].model_dump(mode='json')
            raise ConfigError(f"unknown profile '{profile}' (looked for {path})")
        return self.load_file(path)

    @staticmethod
    def load_file(path: str) -> Dict[str, Any]:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed YAML in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        return data

    def experiment_spec(
        self,
        profile: str = 'default',
        config_file: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None
    ) -> ExperimentSpec:
        """
        Build a validated ExperimentSpec.
        Precedence, lowest first: profile file, config_file, overrides.
        """
        data = self.get_profile(profile)
        if config_file:
            data = _merge(data, self.load_file(config_file))
        if overrides:
            data = _merge(data, overrides)
        try:
            spec = ExperimentSpec.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"invalid experiment configuration: {e}") from e
        logger.debug("Experiment spec for profile '%s': %s", profile, spec)
        return spec
