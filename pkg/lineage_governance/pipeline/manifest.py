"""Run manifests: config snapshot, input and output digests, stage sub-seeds."""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..core.io import write_json

__all__ = ["MANIFEST_NAME", "RunManifest", "sha256_file", "stage_seed", "digest_outputs"]

MANIFEST_NAME = "manifest.json"


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def stage_seed(stage: str, seed: int) -> int:
    """Sub-seed of a stage: the first 4 bytes of SHA-256("<stage>:<seed>"), big-endian."""
    return int.from_bytes(hashlib.sha256(f"{stage}:{seed}".encode("utf-8")).digest()[:4], "big")


def digest_outputs(out_dir: Path) -> Dict[str, str]:
    """SHA-256 of every file under `out_dir` except the manifest, keyed by relative POSIX path."""
    digests = {}
    for path in sorted(p for p in out_dir.rglob("*") if p.is_file()):
        relative = path.relative_to(out_dir).as_posix()
        if relative != MANIFEST_NAME:
            digests[relative] = sha256_file(path)
    return digests


@dataclass
class RunManifest:
    """Record of one pipeline run; contains no timestamps so reruns compare equal."""
    config: Dict[str, Any]
    tool_version: str
    seed: int
    inputs: Dict[str, Dict[str, str]] = field(default_factory=dict)
    stage_seeds: Dict[str, int] = field(default_factory=dict)
    completed_stages: List[str] = field(default_factory=list)
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    outputs: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "inputs": self.inputs,
            "stage_seeds": self.stage_seeds,
            "completed_stages": self.completed_stages,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "outputs": self.outputs,
        }

    def write(self, out_dir: Path) -> Path:
        self.outputs = digest_outputs(out_dir)
        return write_json(self.to_dict(), out_dir / MANIFEST_NAME)
