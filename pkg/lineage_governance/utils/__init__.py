"""Utilities module initialization."""

from lineage_governance.utils.config import EngineSettings, SettingsManager, get_settings_manager
from lineage_governance.utils.logger import GovernanceLogger, get_logger

__all__ = [
    "EngineSettings",
    "SettingsManager",
    "get_settings_manager",
    "GovernanceLogger",
    "get_logger",
]
