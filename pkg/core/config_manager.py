"""
ConfigManager Singleton - Centralized application settings management.

Holds the toolkit-wide defaults (default experiment, trial counts, worker count,
output directory, baseline tuning) with persistence to a JSON file.
Supports dot-notation for nested keys.

Experiment-specific parameters (L, N, M, noise, seed...) live in
``models.experiment_config.ExperimentConfig``; this class only supplies the
defaults those configs fall back on.

Example:
    config = ConfigManager.get_instance()
    trials = config.get("experiment.sweep_trials", default=10_000)
    config.set("execution.workers", 4)
"""

import copy
import json
from pathlib import Path
from typing import Any, Optional

from core import constants
from utils.logger import get_logger

logger = get_logger(__name__)

# dot-path -> predicate a loaded value must satisfy; failures fall back to the default
_SETTING_CHECKS = {
    "experiment.sweep_trials": lambda v: isinstance(v, int) and v >= 1,
    "experiment.L": lambda v: isinstance(v, int) and 2 <= v <= constants.MAX_QUBITS,
    "experiment.seed": lambda v: isinstance(v, int) and v >= 0,
    "noise.model": lambda v: v in constants.NOISE_MODELS,
    "noise.p_dark": lambda v: isinstance(v, (int, float)) and 0.0 <= v <= 1.0,
    "protocols.guhne_population_share": lambda v: isinstance(v, (int, float)) and 0.0 < v < 1.0,
    "execution.workers": lambda v: v == "auto" or (isinstance(v, int) and v >= 1),
    "execution.batch_size": lambda v: isinstance(v, int) and v >= 1,
}


class ConfigManager:
    """Singleton for managing application settings."""

    _instance: Optional['ConfigManager'] = None

    def __init__(self, config_path: str = constants.CONFIG_PATH):
        """
        Initialize ConfigManager (singleton).

        Args:
            config_path: Path to settings JSON file

        Raises:
            RuntimeError: If instance already exists
        """
        if ConfigManager._instance is not None:
            raise RuntimeError(
                "ConfigManager is a singleton. Use ConfigManager.get_instance() instead."
            )

        self.config_path = Path(config_path)
        self.settings = self._load_settings()
        logger.debug(f"📋 ConfigManager initialized: {self.config_path}")

    @classmethod
    def get_instance(cls, config_path: str = constants.CONFIG_PATH) -> 'ConfigManager':
        """
        Get or create the singleton instance.

        Args:
            config_path: Path to settings JSON file (only used on first call)

        Returns:
            ConfigManager singleton instance
        """
        if cls._instance is None:
            cls._instance = cls(config_path)
        return cls._instance

    @classmethod
    def reset_instance(cls):
        """Reset singleton instance (for testing only)."""
        cls._instance = None

    def _load_settings(self) -> dict:
        """
        Load settings from JSON file merged over the defaults.

        Missing keys in the file keep their default value, so an old settings
        file never hides a newly added option.
        """
        settings = self._get_defaults()
        if not self.config_path.exists():
            logger.debug(f"📋 Settings file not found ({self.config_path}), using defaults")
            return settings

        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                loaded = json.load(f)
            self._deep_merge(settings, loaded)
            self._sanitize(settings)
            logger.debug(f"✅ Loaded settings from {self.config_path}")
        except Exception as e:
            logger.error(f"❌ Failed to load settings: {e}")
            logger.info("📋 Using default settings...")
            settings = self._get_defaults()
        return settings

    def _get_defaults(self) -> dict:
        """
        Get default settings structure.

        Returns:
            Dictionary with default configuration
        """
        return {
            "experiment": {
                "sweep_trials": 10_000,
                "L": 3,
                "N": 2000,
                "M": 1000,
                "seed": 20240601,
                "protocol": "proposed"
            },
            "noise": {
                "model": "dark-count",
                "kind": "white",
                "p_dark": 0.5,
                "delta": 0.5,
                "f": 0.8
            },
            "protocols": {
                "guhne_population_share": 0.5
            },
            "execution": {
                "workers": "auto",  # "auto" = physical cores (psutil) | int
                "batch_size": 500,
                "progress": True
            },
            "paths": {
                "output_root": constants.OUTPUT_PATH,
                "experiments_root": constants.EXPERIMENTS_PATH
            }
        }

    def _sanitize(self, settings: dict):
        """Replace out-of-range values from the file with their defaults."""
        defaults = self._get_defaults()
        for key_path, is_valid in _SETTING_CHECKS.items():
            section, key = key_path.split(".")
            value = settings.get(section, {}).get(key)
            if not is_valid(value):
                fallback = defaults[section][key]
                logger.warning(f"⚠️  Invalid setting {key_path}={value!r}, using {fallback!r}")
                settings.setdefault(section, {})[key] = fallback

    @staticmethod
    def _deep_merge(base: dict, updates: dict):
        for key, value in updates.items():
            if isinstance(value, dict) and key in base and isinstance(base[key], dict):
                ConfigManager._deep_merge(base[key], value)
            else:
                base[key] = value

    def save(self) -> bool:
        """
        Persist settings to disk.

        Returns:
            True if successful, False otherwise
        """
        try:
            self.config_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.config_path, 'w', encoding='utf-8') as f:
                json.dump(self.settings, f, indent=2, ensure_ascii=False)
            logger.debug(f"💾 Settings saved to {self.config_path}")
            return True
        except Exception as e:
            logger.error(f"❌ Failed to save settings: {e}")
            return False

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Get setting by dot-notation path.

        Args:
            key_path: Path to setting (e.g., "experiment.N", "execution.workers")
            default: Default value if key not found

        Returns:
            Setting value or default

        Example:
            >>> config = ConfigManager.get_instance()
            >>> share = config.get("protocols.guhne_population_share", default=0.5)
        """
        keys = key_path.split('.')
        value = self.settings

        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                logger.debug(f"⚠️  Setting '{key_path}' not found, using default")
                return default

        return value

    def set(self, key_path: str, value: Any, persist: bool = False) -> bool:
        """
        Set setting by dot-notation path.

        Args:
            key_path: Path to setting (e.g., "execution.workers")
            value: New value to set
            persist: Write the settings file afterwards

        Returns:
            True if successful, False otherwise
        """
        keys = key_path.split('.')
        target = self.settings

        # Navigate/create nested dictionaries
        for key in keys[:-1]:
            if key not in target:
                target[key] = {}
            elif not isinstance(target[key], dict):
                logger.error(
                    f"❌ Cannot set '{key_path}': '{key}' is not a dictionary"
                )
                return False
            target = target[key]

        target[keys[-1]] = value
        logger.debug(f"⚙️  Set {key_path} = {value}")

        return self.save() if persist else True

    def get_all(self) -> dict:
        """Get all settings (deep copy)."""
        return copy.deepcopy(self.settings)

    def reset_to_defaults(self) -> bool:
        """Reset all settings to defaults (in memory)."""
        self.settings = self._get_defaults()
        logger.info("🔄 Settings reset to defaults")
        return True

    def merge_settings(self, new_settings: dict) -> bool:
        """
        Deep merge new settings into current settings.

        Example:
            >>> config.merge_settings({"execution": {"workers": 2}})
        """
        self._deep_merge(self.settings, new_settings)
        logger.debug("🔀 Merged settings")
        return True

    def __repr__(self) -> str:
        return f"<ConfigManager path={self.config_path}>"
