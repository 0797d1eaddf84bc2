"""Synthetic lineage ecosystems with known ground truth."""

from .generator import (
    CausalSpec,
    GenerationResult,
    GeneratorSpec,
    generate,
    generate_merge_cases,
    write_outputs,
)

__all__ = [
    "CausalSpec",
    "GeneratorSpec",
    "GenerationResult",
    "generate",
    "generate_merge_cases",
    "write_outputs",
]
