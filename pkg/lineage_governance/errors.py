"""Exception hierarchy for the lineage governance engine."""

from typing import Any, Dict, List, Optional

__all__ = [
    "LineageGovernanceError",
    "MissingEvidenceError",
    "RuleTableError",
    "UnknownNodeError",
    "NotADagError",
    "NoSourcesError",
    "DegenerateFitError",
    "EstimationError",
    "PropensityFitError",
    "ConfigValidationError",
    "StageError",
]


class LineageGovernanceError(Exception):
    """Base class for every error raised by the engine."""


class MissingEvidenceError(LineageGovernanceError):
    """Licence evidence has no text to score."""


class RuleTableError(LineageGovernanceError):
    """A rule table is missing, malformed or has the wrong schema version."""


class UnknownNodeError(LineageGovernanceError):
    """An edge references a node that is not in the graph (strict mode)."""


class NotADagError(LineageGovernanceError):
    """A graph expected to be acyclic contains a cycle."""


class NoSourcesError(LineageGovernanceError):
    """A hop-indexed analysis found no source nodes."""


class DegenerateFitError(LineageGovernanceError):
    """An exponential fit produced a non-decaying rate."""


class EstimationError(LineageGovernanceError):
    """An estimator cannot be computed (for example an empty arm)."""


class PropensityFitError(EstimationError):
    """The propensity model failed to converge."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigValidationError(LineageGovernanceError):
    """A pipeline configuration failed validation."""

    def __init__(self, messages: List[str]):
        super().__init__("\n".join(messages))
        self.messages = messages


class StageError(LineageGovernanceError):
    """A pipeline stage failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
