"""User defaults for qconfine.

Defaults are stored in a TOML file in the platform's user configuration
directory. Campaign parameters do not live here; each campaign reads its own
JSON file. The only environment override is ``QCONFINE_SEED``.
"""

import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import platformdirs

# Handle TOML libraries for different Python versions
if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .core import QConfineError

SEED_ENV_VAR = "QCONFINE_SEED"


class ConfigError(QConfineError):
    """Exception raised for configuration-related errors."""

    pass


class Config:
    """Configuration manager for qconfine.

    Handles reading and writing default run settings:
    - ensemble_size: Shots per time point (0 means noiseless traces)
    - cycles: Observation time in Rabi periods
    - samples_per_period: Time steps per Rabi period
    - guard_channels: Channels excluded around DC and the primary peak
    - workers: Campaign worker processes
    - regime_ratio: Minimum d / max(gamma) for the Lorentzian approximation
    - seed: Default random seed
    """

    CONFIG_FILE = "config.toml"

    DEFAULT_CONFIG: Dict[str, Any] = {
        "ensemble_size": 1024,
        "cycles": 30.0,
        "samples_per_period": 20,
        "guard_channels": 1,
        "workers": 1,
        "regime_ratio": 50.0,
        "seed": 0,
    }

    def __init__(self) -> None:
        """Initialize configuration manager."""
        self._config_dir = self._get_config_dir()
        self._config_path = self._config_dir / self.CONFIG_FILE
        self._config_data: Dict[str, Any] = {}

        self._ensure_config_dir()
        self.load()

    def _get_config_dir(self) -> Path:
        """Get the configuration directory path for the current platform.

        Returns:
            Path to configuration directory:
            - Linux: ~/.config/qconfine/
            - macOS: ~/Library/Application Support/qconfine/
            - Windows: %APPDATA%/qconfine/
        """
        return Path(platformdirs.user_config_dir(appname="qconfine"))

    def _ensure_config_dir(self) -> None:
        """Ensure the configuration directory exists."""
        try:
            self._config_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"Failed to create config directory: {e}")

    def load(self) -> None:
        """Load configuration from file, starting from the defaults."""
        self._config_data = self.DEFAULT_CONFIG.copy()

        if not self._config_path.exists():
            return

        try:
            with open(self._config_path, "rb") as f:
                self._config_data.update(tomllib.load(f))
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"Failed to load configuration: {e}")

    def save(self) -> None:
        """Save configuration to file."""
        try:
            self._ensure_config_dir()
            with open(self._config_path, "wb") as f:
                tomli_w.dump(self._config_data, f)
        except OSError as e:
            raise ConfigError(f"Failed to save configuration: {e}")

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value.

        Args:
            key: Configuration key to retrieve
            default: Default value if key doesn't exist

        Returns:
            Configuration value or default
        """
        return self._config_data.get(key, default)

    def get_all(self) -> Dict[str, Any]:
        return self._config_data.copy()

    def reset(self, key: str) -> None:
        """Restore a key to its default."""
        if key not in self.DEFAULT_CONFIG:
            raise ConfigError(f"Unknown setting: {key}")
        self._config_data[key] = self.DEFAULT_CONFIG[key]

    def set_from_string(self, key: str, value: str) -> None:
        """Parse and set a value given on the command line.

        Raises:
            ConfigError: For unknown keys
            ValueError: For values of the wrong type or range
        """
        if key not in self.DEFAULT_CONFIG:
            raise ConfigError(
                f"Unknown setting: {key}. Must be one of: {list(self.DEFAULT_CONFIG)}"
            )
        kind = type(self.DEFAULT_CONFIG[key])
        setattr(self, key, kind(value))

    @property
    def config_path(self) -> Path:
        return self._config_path

    def _positive_int(self, key: str, value: int, allow_zero: bool = False) -> None:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"{key} must be an integer")
        if value < 0 or (value == 0 and not allow_zero):
            kind = "non-negative" if allow_zero else "positive"
            raise ValueError(f"{key} must be {kind}")
        self._config_data[key] = value

    @property
    def ensemble_size(self) -> int:
        return int(self.get("ensemble_size", 1024))

    @ensemble_size.setter
    def ensemble_size(self, value: int) -> None:
        self._positive_int("ensemble_size", value, allow_zero=True)

    @property
    def cycles(self) -> float:
        return float(self.get("cycles", 30.0))

    @cycles.setter
    def cycles(self, value: float) -> None:
        if not value > 0:
            raise ValueError("cycles must be positive")
        self._config_data["cycles"] = float(value)

    @property
    def samples_per_period(self) -> int:
        return int(self.get("samples_per_period", 20))

    @samples_per_period.setter
    def samples_per_period(self, value: int) -> None:
        if isinstance(value, int) and value < 2:
            raise ValueError("samples_per_period must be at least 2 (Nyquist)")
        self._positive_int("samples_per_period", value)

    @property
    def guard_channels(self) -> int:
        return int(self.get("guard_channels", 1))

    @guard_channels.setter
    def guard_channels(self, value: int) -> None:
        self._positive_int("guard_channels", value, allow_zero=True)

    @property
    def workers(self) -> int:
        return int(self.get("workers", 1))

    @workers.setter
    def workers(self, value: int) -> None:
        self._positive_int("workers", value)

    @property
    def regime_ratio(self) -> float:
        return float(self.get("regime_ratio", 50.0))

    @regime_ratio.setter
    def regime_ratio(self, value: float) -> None:
        if not value > 0:
            raise ValueError("regime_ratio must be positive")
        self._config_data["regime_ratio"] = float(value)

    @property
    def seed(self) -> int:
        """Default seed, overridden by the QCONFINE_SEED environment variable."""
        override = os.environ.get(SEED_ENV_VAR)
        if override:
            try:
                return int(override)
            except ValueError:
                raise ConfigError(
                    f"{SEED_ENV_VAR} must be an integer, got {override!r}"
                )
        return int(self.get("seed", 0))

    @seed.setter
    def seed(self, value: int) -> None:
        self._positive_int("seed", value, allow_zero=True)


# Module-level singleton instance
_config_instance: Optional[Config] = None


def get_config() -> Config:
    """Get a singleton instance of the configuration manager."""
    global _config_instance
    if _config_instance is None:
        _config_instance = Config()
    return _config_instance
