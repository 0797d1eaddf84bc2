"""Config-driven pipeline: stage functions, orchestration and run manifests."""

from .config import (
    AuditStageConfig,
    GraphConfig,
    InputsConfig,
    PipelineConfig,
    SimulateConfig,
    Stage,
    load_pipeline_config,
)
from .manifest import MANIFEST_NAME, RunManifest, digest_outputs, sha256_file, stage_seed
from .orchestrator import PipelineRunner, run_pipeline

__all__ = [
    "AuditStageConfig",
    "GraphConfig",
    "InputsConfig",
    "PipelineConfig",
    "SimulateConfig",
    "Stage",
    "load_pipeline_config",
    "MANIFEST_NAME",
    "RunManifest",
    "digest_outputs",
    "sha256_file",
    "stage_seed",
    "PipelineRunner",
    "run_pipeline",
]
