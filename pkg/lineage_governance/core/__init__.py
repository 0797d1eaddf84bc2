"""Core domain types, lineage graph and audit engine."""

from .models import (
    DerivationEdge,
    EdgeType,
    EvidenceSource,
    Family,
    Intent,
    MergeEvidence,
    MergeSignal,
    ModelNode,
)
from .graph import (
    CondensedDag,
    DepthResult,
    IntentAggregation,
    LineageGraph,
    assign_family,
    build_graph,
    condense,
    ethical_sources,
    hop_distances,
    lineage_depth,
    lineage_depth_summary,
)
from .audit import (
    AuditConfig,
    AuditReason,
    AuditResult,
    AuditState,
    AuditStateValue,
    Reconciliation,
    UpstreamMissingPolicy,
    assign_states,
    conditional_composition,
    state_composition,
)

__all__ = [
    "DerivationEdge",
    "EdgeType",
    "EvidenceSource",
    "Family",
    "Intent",
    "MergeEvidence",
    "MergeSignal",
    "ModelNode",
    "CondensedDag",
    "DepthResult",
    "IntentAggregation",
    "LineageGraph",
    "assign_family",
    "build_graph",
    "condense",
    "ethical_sources",
    "hop_distances",
    "lineage_depth",
    "lineage_depth_summary",
    "AuditConfig",
    "AuditReason",
    "AuditResult",
    "AuditState",
    "AuditStateValue",
    "Reconciliation",
    "UpstreamMissingPolicy",
    "assign_states",
    "conditional_composition",
    "state_composition",
]
