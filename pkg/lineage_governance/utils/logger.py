"""
Logging for the lineage governance engine.

All modules share one stdout logger. Report files never contain log text;
stage events and metrics are rendered as `key=value` pairs so they can be
grepped out of a run's console output.

Usage:
    from lineage_governance.utils.logger import get_logger

    logger = get_logger()
    logger.log_stage_event("audit", "completed", files=3)
"""

import logging
import sys
from typing import Any, Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _render(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _pairs(fields: dict) -> str:
    return " ".join(f"{key}={_render(value)}" for key, value in fields.items())


class GovernanceLogger:
    """Standard library logger with stage-event and metric helpers."""

    def __init__(self, name: str = "lineage_governance", level: str = "INFO", log_file: Optional[str] = None):
        """
        Args:
            name: Logger name
            level: Level name such as "INFO"
            log_file: Also append to this file when given
        """
        self.logger = logging.getLogger(name)
        self.logger.handlers = []
        self.logger.propagate = False
        self.set_level(level)

        formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)
        handlers = [logging.StreamHandler(sys.stdout)]
        if log_file:
            handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
        for handler in handlers:
            handler.setFormatter(formatter)
            self.logger.addHandler(handler)

    def set_level(self, level: str) -> None:
        self.logger.setLevel(logging.getLevelName(level.upper()))

    def debug(self, message: str) -> None:
        self.logger.debug(message)

    def info(self, message: str) -> None:
        self.logger.info(message)

    def warning(self, message: str) -> None:
        self.logger.warning(message)

    def error(self, message: str) -> None:
        self.logger.error(message)

    def log_stage_event(self, stage: str, event: str, level: int = logging.INFO, **details: Any) -> None:
        """
        Log a pipeline stage event, e.g. `stage=audit event=completed files=3`.

        Args:
            stage: Stage name
            event: "started", "completed", "failed", ...
            level: Logging level of the record
            **details: Extra fields appended as key=value
        """
        self.logger.log(level, _pairs({"stage": stage, "event": event, **details}))

    def log_metric(self, name: str, value: Any, **context: Any) -> None:
        """Log one reported number as `metric=<name> value=<value>` plus context fields."""
        self.logger.info(_pairs({"metric": name, "value": value, **context}))


_global_logger: Optional[GovernanceLogger] = None


def get_logger(name: str = "lineage_governance", level: str = "INFO", log_file: Optional[str] = None) -> GovernanceLogger:
    """Return the process-wide logger, creating it on first use."""
    global _global_logger
    if _global_logger is None:
        _global_logger = GovernanceLogger(name, level, log_file)
    return _global_logger
