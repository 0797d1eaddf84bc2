"""
Lineage Governance

Governance-audit engine for derivation lineages of published models:
ethical-use licence classification, audit states over condensed lineage
DAGs, governance horizons, intervention simulation, merge-conflict causal
estimation and a copyleft-restrictiveness comparator.
"""

__version__ = "0.1.0"

from lineage_governance.core import (
    AuditConfig,
    LineageGraph,
    assign_states,
    build_graph,
    condense,
)
from lineage_governance.errors import LineageGovernanceError

__all__ = [
    "AuditConfig",
    "LineageGraph",
    "assign_states",
    "build_graph",
    "condense",
    "LineageGovernanceError",
]
