"""
Domain Models

Shared domain types for the lineage governance engine: licence intent,
derivation edge taxonomy, model nodes and typed derivation edges.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Set

__all__ = [
    "Intent",
    "EdgeType",
    "EvidenceSource",
    "MergeSignal",
    "Family",
    "ModelNode",
    "DerivationEdge",
    "MergeEvidence",
    "EDGE_TYPE_PRIORITY",
    "EVIDENCE_TIER",
    "INTENT_STRICTNESS",
]


class Intent(Enum):
    """Tri-valued licence intent of a node."""
    RESTRICTIVE = "R"
    PERMISSIVE = "P"
    UNKNOWN = "U"


class EdgeType(Enum):
    """Derivation taxonomy. DATASET is parsed but never enters the graph."""
    FINETUNE = "finetune"
    ADAPTER = "adapter"
    MERGE = "merge"
    QUANTIZATION = "quantization"
    DISTILLATION = "distillation"
    PRUNING = "pruning"
    CONVERSION = "conversion"
    BASE_MODEL = "base_model"
    DATASET = "dataset"


class EvidenceSource(Enum):
    """Metadata layer a derivation reference was extracted from."""
    YAML_FIELD = "yaml_field"
    TAG = "tag"
    README_PROSE = "readme_prose"
    README_TABLE = "readme_table"
    README_LINK = "readme_link"
    NAME_PATTERN = "name_pattern"


class MergeSignal(Enum):
    """Kinds of evidence that a node is a merge product."""
    MERGE_TAG = "merge_tag"
    MULTI_PARENT = "multi_parent"
    MERGE_YAML = "merge_yaml"
    README_MENTION = "readme_mention"


class Family(Enum):
    """Model family used for per-family retention curves."""
    LLAMA = "Llama"
    MISTRAL = "Mistral"
    QWEN = "Qwen"
    OTHER = "Other"


# Lower rank wins when collapsing candidate types for one (child, parent) pair.
EDGE_TYPE_PRIORITY: Dict[EdgeType, int] = {
    EdgeType.QUANTIZATION: 0,
    EdgeType.ADAPTER: 1,
    EdgeType.FINETUNE: 2,
    EdgeType.MERGE: 3,
    EdgeType.DISTILLATION: 4,
    EdgeType.PRUNING: 5,
    EdgeType.CONVERSION: 6,
    EdgeType.BASE_MODEL: 7,
    EdgeType.DATASET: 8,
}

# yaml/tag = 0, readme = 1, name pattern = 2
EVIDENCE_TIER: Dict[EvidenceSource, int] = {
    EvidenceSource.YAML_FIELD: 0,
    EvidenceSource.TAG: 0,
    EvidenceSource.README_PROSE: 1,
    EvidenceSource.README_TABLE: 1,
    EvidenceSource.README_LINK: 1,
    EvidenceSource.NAME_PATTERN: 2,
}

# Higher is stricter: R > P > U
INTENT_STRICTNESS: Dict[Intent, int] = {
    Intent.RESTRICTIVE: 2,
    Intent.PERMISSIVE: 1,
    Intent.UNKNOWN: 0,
}


@dataclass
class ModelNode:
    """One repository or package in the lineage graph."""
    node_id: str
    created_at: Optional[str] = None
    intent: Intent = Intent.UNKNOWN
    restriction_score: Optional[float] = None
    licence_names: List[str] = field(default_factory=list)
    downloads: int = 0
    likes: int = 0
    family: Family = Family.OTHER
    passthrough: bool = False
    merge_signals: Set[MergeSignal] = field(default_factory=set)
    stub: bool = False

    def to_dict(self) -> Dict[str, Any]:
        """Serialize to a JSON-ready dict with sorted collections."""
        return {
            "id": self.node_id,
            "created_at": self.created_at,
            "intent": self.intent.value,
            "restriction_score": self.restriction_score,
            "licence_names": list(self.licence_names),
            "downloads": self.downloads,
            "likes": self.likes,
            "family": self.family.value,
            "passthrough": self.passthrough,
            "merge_signals": sorted(signal.value for signal in self.merge_signals),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelNode":
        """Build a node from a nodes-JSONL record."""
        return cls(
            node_id=data["id"],
            created_at=data.get("created_at"),
            intent=Intent(data.get("intent", "U")),
            restriction_score=data.get("restriction_score"),
            licence_names=list(data.get("licence_names") or []),
            downloads=int(data.get("downloads", 0) or 0),
            likes=int(data.get("likes", 0) or 0),
            family=Family(data.get("family", "Other")),
            passthrough=bool(data.get("passthrough", False)),
            merge_signals={MergeSignal(s) for s in data.get("merge_signals") or []},
        )


@dataclass(frozen=True)
class DerivationEdge:
    """Typed child -> parent derivation relation."""
    child: str
    parent: str
    edge_type: EdgeType
    evidence_source: EvidenceSource

    def sort_key(self) -> tuple:
        return (self.child, self.parent, self.edge_type.value, self.evidence_source.value)


@dataclass(frozen=True)
class MergeEvidence:
    """Merge-level evidence available for a node or component."""
    signals: FrozenSet[MergeSignal] = frozenset()

    @property
    def count(self) -> int:
        return len(self.signals)

    @property
    def is_merge(self) -> bool:
        return bool(self.signals)

    def union(self, other: "MergeEvidence") -> "MergeEvidence":
        return MergeEvidence(self.signals | other.signals)
