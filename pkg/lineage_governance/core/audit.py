"""
Audit Engine

Assigns each component of a condensed lineage DAG one of four audit states
in topological order:

1. Own intent Unknown -> Undecidable-Missing
2. Merge product with mixed R and P parent intents and too little merge
   evidence -> Undecidable-Ambiguous (merge conflict)
3. Any Undecidable-Missing ancestor -> Undecidable-Ambiguous, or
   Undecidable-Missing under the `missing` propagation policy
4. Permissive intent below a passthrough-restrictive ancestor -> Inconsistent
5. Otherwise Decidable
"""

from dataclasses import dataclass
from enum import Enum
from typing import AbstractSet, Dict, List, Mapping, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, Field

from ..errors import NotADagError
from .graph import CondensedDag
from .models import Intent

__all__ = [
    "Reconciliation",
    "UpstreamMissingPolicy",
    "AuditConfig",
    "AuditStateValue",
    "AuditReason",
    "AuditState",
    "AuditResult",
    "assign_states",
    "state_composition",
    "conditional_composition",
    "COMPOSITION_COLUMNS",
]


class Reconciliation(str, Enum):
    """How a merge conflict with enough evidence is resolved."""
    STRICT = "strict"
    LENIENT = "lenient"
    NONE = "none"


class UpstreamMissingPolicy(str, Enum):
    """How nodes below an Undecidable-Missing ancestor are coded."""
    AMBIGUOUS = "ambiguous"
    MISSING = "missing"


class AuditConfig(BaseModel):
    """Policy knobs of the audit-state machine."""
    tau: int = Field(default=2, ge=1, description="Merge-evidence threshold")
    reconciliation: Reconciliation = Field(default=Reconciliation.STRICT)
    upstream_missing: UpstreamMissingPolicy = Field(default=UpstreamMissingPolicy.AMBIGUOUS)
    max_hop: int = Field(default=10, ge=0, description="Hop cutoff of the analysis window")
    alpha: float = Field(default=0.20, gt=0.0, lt=1.0, description="Governance horizon threshold")


class AuditStateValue(Enum):
    DECIDABLE = "Decidable"
    INCONSISTENT = "Inconsistent"
    UNDECIDABLE_MISSING = "UndecidableMissing"
    UNDECIDABLE_AMBIGUOUS = "UndecidableAmbiguous"


class AuditReason(Enum):
    OWN_MISSING = "own_missing"
    MERGE_CONFLICT = "merge_conflict"
    UPSTREAM_MISSING = "upstream_missing"
    PASSTHROUGH_VIOLATION = "passthrough_violation"
    CLEAN = "clean"


@dataclass(frozen=True)
class AuditState:
    value: AuditStateValue
    reason: AuditReason

    @property
    def undecidable(self) -> bool:
        return self.value in (AuditStateValue.UNDECIDABLE_MISSING, AuditStateValue.UNDECIDABLE_AMBIGUOUS)

    @property
    def own_missing(self) -> bool:
        return self.reason is AuditReason.OWN_MISSING


_OWN_MISSING = AuditState(AuditStateValue.UNDECIDABLE_MISSING, AuditReason.OWN_MISSING)
_MERGE_CONFLICT = AuditState(AuditStateValue.UNDECIDABLE_AMBIGUOUS, AuditReason.MERGE_CONFLICT)
_UPSTREAM_AMBIGUOUS = AuditState(AuditStateValue.UNDECIDABLE_AMBIGUOUS, AuditReason.UPSTREAM_MISSING)
_UPSTREAM_MISSING = AuditState(AuditStateValue.UNDECIDABLE_MISSING, AuditReason.UPSTREAM_MISSING)
_INCONSISTENT = AuditState(AuditStateValue.INCONSISTENT, AuditReason.PASSTHROUGH_VIOLATION)
_DECIDABLE = AuditState(AuditStateValue.DECIDABLE, AuditReason.CLEAN)


@dataclass
class AuditResult:
    """Per-component audit states of one configuration."""
    states: List[AuditState]
    config: AuditConfig

    def node_states(self, dag: CondensedDag) -> Dict[str, AuditState]:
        """Expand component states to member nodes."""
        return {node_id: self.states[index] for node_id, index in dag.member_of.items()}


def assign_states(
    dag: CondensedDag,
    cfg: Optional[AuditConfig] = None,
    intents: Optional[Sequence[Intent]] = None,
    forced_ambiguous: Optional[AbstractSet[int]] = None,
) -> AuditResult:
    """
    Assign audit states to every component.

    Args:
        dag: Condensed lineage DAG
        cfg: Audit configuration; defaults to the main-analysis policy
        intents: Optional component intent override (intervention runs)
        forced_ambiguous: Components coded Undecidable-Ambiguous outright

    Returns:
        AuditResult

    Raises:
        NotADagError: the component graph contains a cycle
    """
    cfg = cfg or AuditConfig()
    intents = list(intents) if intents is not None else list(dag.component_intent)
    forced = forced_ambiguous or frozenset()
    size = len(dag.components)
    if len(intents) != size:
        raise ValueError(f"intent override has {len(intents)} entries for {size} components")
    if len(dag.topo_order) != size:
        raise NotADagError("topological order does not cover every component")

    states: List[Optional[AuditState]] = [None] * size
    missing_above = [False] * size
    passthrough_above = [False] * size

    for index in dag.topo_order:
        parents = dag.parents[index]
        for parent in parents:
            if states[parent] is None:
                raise NotADagError(f"component {index} visited before its parent {parent}")
            missing_above[index] |= states[parent].own_missing or missing_above[parent]
            passthrough_above[index] |= dag.component_passthrough[parent] or passthrough_above[parent]
        states[index] = _decide(dag, cfg, intents, forced, index, missing_above[index], passthrough_above[index])

    return AuditResult(states=states, config=cfg)


def _decide(dag, cfg, intents, forced, index, missing_above, passthrough_above) -> AuditState:
    if index in forced:
        return _MERGE_CONFLICT
    intent = intents[index]
    if intent is Intent.UNKNOWN:
        return _OWN_MISSING

    effective = intent
    if dag.component_is_merge[index]:
        parent_intents = {intents[parent] for parent in dag.parents[index]}
        if Intent.RESTRICTIVE in parent_intents and Intent.PERMISSIVE in parent_intents:
            if (
                cfg.reconciliation is Reconciliation.NONE
                or dag.component_evidence[index].count < cfg.tau
            ):
                return _MERGE_CONFLICT
            if cfg.reconciliation is Reconciliation.STRICT:
                effective = Intent.RESTRICTIVE

    if missing_above:
        if cfg.upstream_missing is UpstreamMissingPolicy.MISSING:
            return _UPSTREAM_MISSING
        return _UPSTREAM_AMBIGUOUS

    if effective is Intent.PERMISSIVE and passthrough_above:
        return _INCONSISTENT
    return _DECIDABLE


COMPOSITION_COLUMNS = [
    "hop",
    "n",
    "decidable",
    "inconsistent",
    "undecidable_missing",
    "undecidable_ambiguous",
]

_COLUMN_OF = {
    AuditStateValue.DECIDABLE: "decidable",
    AuditStateValue.INCONSISTENT: "inconsistent",
    AuditStateValue.UNDECIDABLE_MISSING: "undecidable_missing",
    AuditStateValue.UNDECIDABLE_AMBIGUOUS: "undecidable_ambiguous",
}


def _compose(states: Mapping[str, AuditState], hops: Mapping[str, int], max_hop: int, keep) -> pd.DataFrame:
    counts: Dict[int, Dict[str, int]] = {}
    for node_id in sorted(hops):
        hop = hops[node_id]
        if hop > max_hop or node_id not in states or not keep(states[node_id]):
            continue
        row = counts.setdefault(hop, {column: 0 for column in _COLUMN_OF.values()})
        row[_COLUMN_OF[states[node_id].value]] += 1

    rows = []
    for hop in sorted(counts):
        n = sum(counts[hop].values())
        row = {"hop": hop, "n": n}
        for column, count in counts[hop].items():
            row[f"{column}_count"] = count
            row[column] = count / n
        rows.append(row)

    columns = COMPOSITION_COLUMNS + [f"{c}_count" for c in COMPOSITION_COLUMNS[2:]]
    return pd.DataFrame(rows, columns=columns)


def state_composition(
    states: Mapping[str, AuditState],
    hops: Mapping[str, int],
    max_hop: int = 10,
) -> pd.DataFrame:
    """
    Per-hop proportions of the four audit states.

    Hops without nodes are omitted. Count columns (`<state>_count`) are kept
    next to the fractions.
    """
    return _compose(states, hops, max_hop, lambda state: True)


def conditional_composition(
    states: Mapping[str, AuditState],
    hops: Mapping[str, int],
    max_hop: int = 10,
) -> pd.DataFrame:
    """
    Per-hop proportions among nodes with local evidence (own state not
    Undecidable-Missing for lack of own intent).
    """
    return _compose(states, hops, max_hop, lambda state: not state.own_missing)
