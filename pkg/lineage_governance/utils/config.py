"""Engine-wide settings loaded from the environment."""

import os
from pathlib import Path
from typing import Any, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator


class EngineSettings(BaseModel):
    """Process-level settings shared by every stage."""

    log_level: str = Field(default="INFO", description="Logging level")
    rules_dir: Optional[Path] = Field(
        default=None, description="Directory overriding the shipped rule tables"
    )
    threads: int = Field(default=0, description="Worker count; 0 means all logical cores")

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if value not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level: {value}")
        return value

    @field_validator("threads")
    @classmethod
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("threads must be >= 0")
        return value

    @property
    def n_jobs(self) -> int:
        """Worker count in joblib convention (-1 = all cores)."""
        return -1 if self.threads == 0 else self.threads


class SettingsManager:
    """
    Loads engine settings from `.env` and environment variables.

    Recognised variables: LOG_LEVEL, LINEAGE_RULES_DIR, LINEAGE_THREADS.
    """

    def __init__(self, env_file: Optional[str] = None):
        """
        Initialize the settings manager.

        Args:
            env_file: Optional path to a dotenv file
        """
        load_dotenv(env_file)
        self.env_file = env_file
        self._settings: Optional[EngineSettings] = None

    def load_settings(self) -> EngineSettings:
        """
        Load settings from the environment.

        Returns:
            EngineSettings object
        """
        if self._settings is not None:
            return self._settings

        rules_dir = os.getenv("LINEAGE_RULES_DIR")
        self._settings = EngineSettings(
            log_level=os.getenv("LOG_LEVEL", "INFO"),
            rules_dir=Path(rules_dir) if rules_dir else None,
            threads=int(os.getenv("LINEAGE_THREADS", "0")),
        )
        return self._settings

    def get_settings(self) -> EngineSettings:
        """Get the current settings, loading them on first use."""
        if self._settings is None:
            return self.load_settings()
        return self._settings

    def update_settings(self, **kwargs: Any) -> EngineSettings:
        """
        Override settings values (CLI flags win over the environment).

        Args:
            **kwargs: Settings fields to update; None values are ignored
        """
        current = self.get_settings()
        updates = {key: value for key, value in kwargs.items() if value is not None}
        self._settings = current.model_copy(update=updates)
        return self._settings


_settings_manager: Optional[SettingsManager] = None


def get_settings_manager() -> SettingsManager:
    """Return the process-wide settings manager."""
    global _settings_manager
    if _settings_manager is None:
        _settings_manager = SettingsManager()
    return _settings_manager
