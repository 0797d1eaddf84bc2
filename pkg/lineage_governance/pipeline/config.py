"""
Pipeline configuration.

One JSON document selects the stages to run, names the input files and
carries one section per stage. Validation errors are reported with the
config path and the line of the offending key.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..comparator.registry import ComparatorConfig
from ..core.audit import AuditConfig
from ..core.graph import IntentAggregation
from ..errors import ConfigValidationError
from ..licensing.classifier import ClassifierConfig
from ..metrics.horizon import HorizonConfig
from ..parsing.card_parser import ParserConfig
from ..simulation.intervention import InterventionDesign
from ..stats.causal import CausalConfig
from ..synthetic.generator import GeneratorSpec

__all__ = [
    "Stage",
    "InputsConfig",
    "GraphConfig",
    "AuditStageConfig",
    "SimulateConfig",
    "PipelineConfig",
    "load_pipeline_config",
]

PIPELINE_SCHEMA_VERSION = 1


class Stage(str, Enum):
    GENERATE = "generate"
    PARSE_CARDS = "parse-cards"
    CLASSIFY = "classify"
    BUILD_GRAPH = "build-graph"
    AUDIT = "audit"
    HORIZON = "horizon"
    SIMULATE = "simulate"
    MERGE_STATS = "merge-stats"
    COMPARATOR = "comparator"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class InputsConfig(_Section):
    """Input files; relative paths resolve against the config file's directory."""
    records: Optional[Path] = Field(default=None, description="Repository records JSONL")
    nodes: Optional[Path] = Field(default=None, description="Nodes JSONL of a prebuilt graph")
    edges: Optional[Path] = Field(default=None, description="Edges CSV of a prebuilt graph")
    releases: Optional[Path] = Field(default=None, description="Package releases JSONL")
    merge_cases: Optional[Path] = Field(default=None, description="Merge cases CSV")

    def resolved(self, base: Path) -> "InputsConfig":
        updates = {
            name: (value if value.is_absolute() else base / value)
            for name, value in self.__dict__.items()
            if isinstance(value, Path)
        }
        return self.model_copy(update=updates)

    def given(self) -> Dict[str, Path]:
        return {name: value for name, value in self.__dict__.items() if isinstance(value, Path)}


class GraphConfig(_Section):
    strict: bool = Field(default=False, description="Reject dangling edges instead of creating stub nodes")
    aggregation: IntentAggregation = Field(default=IntentAggregation.RESTRICTIVE_FIRST)


class AuditStageConfig(AuditConfig):
    model_config = ConfigDict(extra="forbid")

    sweep: bool = Field(default=True, description="Also run the tau x reconciliation x policy sweep")
    report_hop: int = Field(default=6, ge=0)


class SimulateConfig(_Section):
    designs: List[InterventionDesign] = Field(default_factory=lambda: list(InterventionDesign))
    rates: List[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    realizations: int = Field(default=500, ge=1)
    window: int = Field(default=30, ge=1)
    cascade: bool = True

    @field_validator("rates")
    @classmethod
    def _rates_in_unit_interval(cls, value: List[float]) -> List[float]:
        if any(not 0.0 <= rate <= 1.0 for rate in value):
            raise ValueError("enforcement rates must lie in [0, 1]")
        return value


class PipelineConfig(_Section):
    """Validated pipeline configuration."""
    schema_version: Literal[1]
    seed: int = Field(default=0, ge=0)
    threads: Optional[int] = Field(default=None, ge=0, description="Worker count; 0 means all logical cores")
    output_dir: Path = Field(default=Path("out"))
    rules_dir: Optional[Path] = None
    inputs: InputsConfig = Field(default_factory=InputsConfig)
    stages: List[Stage] = Field(min_length=1)
    classify: ClassifierConfig = Field(default_factory=ClassifierConfig)
    parser: ParserConfig = Field(default_factory=ParserConfig)
    graph: GraphConfig = Field(default_factory=GraphConfig)
    audit: AuditStageConfig = Field(default_factory=AuditStageConfig)
    horizon: HorizonConfig = Field(default_factory=HorizonConfig)
    simulate: SimulateConfig = Field(default_factory=SimulateConfig)
    merge_stats: CausalConfig = Field(default_factory=CausalConfig)
    comparator: ComparatorConfig = Field(default_factory=ComparatorConfig)
    generate: GeneratorSpec = Field(default_factory=GeneratorSpec)

    @field_validator("stages")
    @classmethod
    def _unique_stages(cls, value: List[Stage]) -> List[Stage]:
        if len(set(value)) != len(value):
            raise ValueError("stages must not repeat")
        return value

    def resolved(self, base: Path) -> "PipelineConfig":
        """Copy with every relative path anchored at `base`."""
        def anchor(path: Optional[Path]) -> Optional[Path]:
            if path is None or path.is_absolute():
                return path
            return base / path

        return self.model_copy(update={
            "output_dir": anchor(self.output_dir),
            "rules_dir": anchor(self.rules_dir),
            "inputs": self.inputs.resolved(base),
        })


def _line_of(text: str, loc: Tuple[Union[str, int], ...]) -> int:
    """First line mentioning the innermost named key of `loc` (1 if none)."""
    keys = [part for part in loc if isinstance(part, str)]
    lines = text.splitlines()
    for key in reversed(keys):
        needle = f'"{key}"'
        for lineno, line in enumerate(lines, 1):
            if needle in line:
                return lineno
    return 1


def _format_errors(path: Path, text: str, error: ValidationError) -> List[str]:
    messages = []
    for item in error.errors():
        loc = tuple(item.get("loc", ()))
        field = ".".join(str(part) for part in loc) or "<root>"
        messages.append(f"{path}:{_line_of(text, loc)}: {field}: {item.get('msg', 'invalid value')}")
    return messages


def load_pipeline_config(path: Union[str, Path]) -> Tuple[PipelineConfig, Dict[str, Any]]:
    """
    Read and validate a pipeline config.

    Returns:
        (config with paths resolved against the config directory, raw JSON snapshot)

    Raises:
        ConfigValidationError: unreadable file, invalid JSON or schema violation
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigValidationError([f"{path}: cannot read config: {e}"]) from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigValidationError([f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}"]) from e
    if not isinstance(raw, dict):
        raise ConfigValidationError([f"{path}:1: <root>: config must be a JSON object"])
    try:
        config = PipelineConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigValidationError(_format_errors(path, text, e)) from e
    return config.resolved(path.resolve().parent), raw
