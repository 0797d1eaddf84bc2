"""
Tests for the audit-state machine and per-hop state composition.
"""
import dataclasses
import random

import pytest

from lineage_governance.core.audit import (
    AuditConfig,
    AuditReason,
    AuditStateValue,
    Reconciliation,
    UpstreamMissingPolicy,
    assign_states,
    conditional_composition,
    state_composition,
)
from lineage_governance.core.graph import build_graph, condense, hop_distances
from lineage_governance.core.models import DerivationEdge, EdgeType, EvidenceSource, Intent, MergeSignal, ModelNode
from lineage_governance.errors import NotADagError

from tests.conftest import make_graph

D = AuditStateValue.DECIDABLE
I = AuditStateValue.INCONSISTENT
UM = AuditStateValue.UNDECIDABLE_MISSING
UA = AuditStateValue.UNDECIDABLE_AMBIGUOUS


def _values(graph, cfg=None):
    dag = condense(graph)
    result = assign_states(dag, cfg)
    return {node: state.value for node, state in result.node_states(dag).items()}


def test_toy_graph_default_policy(toy_graph):
    """Every rule fires on the toy graph under the default policy."""
    dag = condense(toy_graph)
    states = assign_states(dag).node_states(dag)
    assert {node: state.value for node, state in states.items()} == {
        "S": D, "O": D, "Q": D, "A": D,
        "U1": UM, "D1": UA,
        "M1": UA, "M2": D,
        "P1": I, "C": D,
    }
    assert states["U1"].reason is AuditReason.OWN_MISSING
    assert states["D1"].reason is AuditReason.UPSTREAM_MISSING
    assert states["M1"].reason is AuditReason.MERGE_CONFLICT
    assert states["P1"].reason is AuditReason.PASSTHROUGH_VIOLATION


def test_missing_propagation_policy(toy_graph):
    """Under the missing policy, descendants of missing intent are Undecidable-Missing."""
    values = _values(toy_graph, AuditConfig(upstream_missing=UpstreamMissingPolicy.MISSING))
    assert values["D1"] is UM
    assert values["U1"] is UM


def test_tau_one_reconciles_single_signal_merge(toy_graph):
    """With tau 1 a multi-parent merge reconciles under the strict rule."""
    assert _values(toy_graph, AuditConfig(tau=1))["M1"] is D


def test_no_reconciliation_keeps_every_conflict(toy_graph):
    """Reconciliation 'none' codes every mixed merge ambiguous."""
    values = _values(toy_graph, AuditConfig(reconciliation=Reconciliation.NONE))
    assert values["M1"] is UA
    assert values["M2"] is UA


def test_lenient_reconciliation_keeps_own_intent():
    """Lenient reconciliation keeps the merge's own permissive intent, exposing passthrough violations."""
    graph = make_graph(
        {"O": "R", "Q": "P", "M": "P"},
        [("M", "O", EdgeType.MERGE), ("M", "Q", EdgeType.MERGE)],
        passthrough=["O"],
    )
    assert _values(graph, AuditConfig(reconciliation=Reconciliation.LENIENT))["M"] is I
    assert _values(graph, AuditConfig(reconciliation=Reconciliation.STRICT))["M"] is D


def test_merge_without_mixed_parents_is_not_a_conflict():
    """A merge of two restrictive parents is decidable."""
    graph = make_graph({"A": "R", "B": "R", "M": "P"}, [("M", "A"), ("M", "B")])
    assert _values(graph)["M"] is D


def test_own_missing_precedes_merge_conflict():
    """A merge product without intent is Undecidable-Missing."""
    graph = make_graph({"A": "R", "B": "P", "M": "U"}, [("M", "A"), ("M", "B")])
    dag = condense(graph)
    state = assign_states(dag).node_states(dag)["M"]
    assert state.value is UM and state.own_missing


def test_merge_conflict_does_not_propagate():
    """Descendants of a merge conflict keep their own decision."""
    graph = make_graph({"A": "R", "B": "P", "M": "P", "C": "R"}, [("M", "A"), ("M", "B"), ("C", "M")])
    values = _values(graph)
    assert values["M"] is UA
    assert values["C"] is D


def test_readme_only_merge_stays_ambiguous_at_tau_three():
    """One README sentence plus two parents is two signals, short of tau 3."""
    nodes = [
        ModelNode(node_id="A", intent=Intent.RESTRICTIVE),
        ModelNode(node_id="B", intent=Intent.PERMISSIVE),
        ModelNode(node_id="C", intent=Intent.PERMISSIVE, merge_signals={MergeSignal.README_MENTION}),
    ]
    edges = [
        DerivationEdge("C", parent, EdgeType.MERGE, EvidenceSource.README_PROSE) for parent in ("A", "B")
    ]
    dag = condense(build_graph(edges, nodes))
    state = assign_states(dag, AuditConfig(tau=3)).node_states(dag)["C"]
    assert state.value is UA
    assert state.reason is AuditReason.MERGE_CONFLICT


def test_passthrough_reaches_far_descendants():
    """A passthrough licence anywhere upstream marks permissive descendants inconsistent."""
    graph = make_graph({"O": "R", "A": "R", "B": "R", "P": "P"}, [("A", "O"), ("B", "A"), ("P", "B")], passthrough=["O"])
    assert _values(graph)["P"] is I


def test_intent_override_and_forced_ambiguous(toy_graph):
    """Intervention overrides replace intents and force components ambiguous."""
    dag = condense(toy_graph)
    intents = list(dag.component_intent)
    intents[dag.member_of["U1"]] = Intent.RESTRICTIVE
    forced = {dag.member_of["A"]}
    states = assign_states(dag, intents=intents, forced_ambiguous=forced).node_states(dag)
    assert states["U1"].value is D
    assert states["D1"].value is D
    assert states["A"].value is UA and states["A"].reason is AuditReason.MERGE_CONFLICT


def test_intent_override_length_checked(toy_graph):
    """An override of the wrong length is rejected."""
    dag = condense(toy_graph)
    with pytest.raises(ValueError):
        assign_states(dag, intents=[Intent.RESTRICTIVE])


def test_incomplete_topological_order_rejected(toy_graph):
    """A topological order missing components is not a DAG order."""
    dag = condense(toy_graph)
    broken = dataclasses.replace(dag, topo_order=dag.topo_order[:-1], _ancestors={})
    with pytest.raises(NotADagError):
        assign_states(broken)


def test_cycle_members_share_state():
    """Members of a strongly connected component share one state."""
    graph = make_graph({"S": "R", "A": "P", "B": "U"}, [("A", "S"), ("A", "B"), ("B", "A")])
    values = _values(graph)
    assert values["A"] == values["B"] == D


def test_config_validation():
    """Out-of-range policy values are rejected."""
    with pytest.raises(ValueError):
        AuditConfig(tau=0)
    with pytest.raises(ValueError):
        AuditConfig(alpha=1.5)
    assert AuditConfig(reconciliation="lenient").reconciliation is Reconciliation.LENIENT


def _random_graph(rng):
    size = rng.randint(1, 12)
    ids = [f"n{i:02d}" for i in range(size)]
    intents = {node: rng.choice("RPU") for node in ids}
    edges = []
    for i in range(1, size):
        for j in range(i):
            if rng.random() < 0.3:
                edge_type = EdgeType.MERGE if rng.random() < 0.3 else EdgeType.FINETUNE
                edges.append((ids[i], ids[j], edge_type))
    passthrough = [node for node in ids if intents[node] == "R" and rng.random() < 0.3]
    signals = {node: [MergeSignal.README_MENTION] for node in ids if rng.random() < 0.2}
    return make_graph(intents, edges, passthrough=passthrough, signals=signals)


def _oracle(graph, node, cfg):
    intent = graph.nodes[node].intent
    if intent is Intent.UNKNOWN:
        return UM
    ancestors = graph.ancestors(node)
    effective = intent
    evidence = graph.merge_evidence(node)
    parent_intents = {graph.nodes[p].intent for p in graph.parents_of[node]}
    if evidence.is_merge and {Intent.RESTRICTIVE, Intent.PERMISSIVE} <= parent_intents:
        if cfg.reconciliation is Reconciliation.NONE or evidence.count < cfg.tau:
            return UA
        if cfg.reconciliation is Reconciliation.STRICT:
            effective = Intent.RESTRICTIVE
    if any(graph.nodes[a].intent is Intent.UNKNOWN for a in ancestors):
        return UM if cfg.upstream_missing is UpstreamMissingPolicy.MISSING else UA
    if effective is Intent.PERMISSIVE and any(graph.nodes[a].passthrough for a in ancestors):
        return I
    return D


@pytest.mark.parametrize(
    "cfg",
    [
        AuditConfig(),
        AuditConfig(tau=1, reconciliation=Reconciliation.LENIENT),
        AuditConfig(tau=3, reconciliation=Reconciliation.NONE, upstream_missing=UpstreamMissingPolicy.MISSING),
    ],
    ids=["strict", "lenient", "none"],
)
def test_states_match_rule_oracle_on_random_dags(cfg):
    """On random DAGs the topological pass agrees with the rules evaluated directly."""
    rng = random.Random(20240611)
    for _ in range(1000):
        graph = _random_graph(rng)
        assert _values(graph, cfg) == {node: _oracle(graph, node, cfg) for node in graph.nodes}


def test_propagation_policy_only_splits_undecidable():
    """Switching the propagation policy never changes which nodes are undecidable."""
    rng = random.Random(7)
    for _ in range(200):
        graph = _random_graph(rng)
        ambiguous = _values(graph, AuditConfig(upstream_missing=UpstreamMissingPolicy.AMBIGUOUS))
        missing = _values(graph, AuditConfig(upstream_missing=UpstreamMissingPolicy.MISSING))
        for node in graph.nodes:
            if ambiguous[node] in (D, I):
                assert missing[node] is ambiguous[node]
            else:
                assert missing[node] in (UM, UA)


def test_tau_only_affects_mixed_merges():
    """Changing tau leaves every node outside mixed-parent merges untouched."""
    rng = random.Random(11)
    for _ in range(200):
        graph = _random_graph(rng)
        low = _values(graph, AuditConfig(tau=1))
        high = _values(graph, AuditConfig(tau=4))
        for node in graph.nodes:
            parent_intents = {graph.nodes[p].intent for p in graph.parents_of[node]}
            mixed = {Intent.RESTRICTIVE, Intent.PERMISSIVE} <= parent_intents
            if not (graph.merge_evidence(node).is_merge and mixed):
                assert low[node] is high[node]


def test_state_composition(toy_graph):
    """Per-hop state fractions and counts on the toy graph."""
    dag = condense(toy_graph)
    states = assign_states(dag).node_states(dag)
    hops = hop_distances(toy_graph, ["S", "O"], cutoff=10)
    frame = state_composition(states, hops, max_hop=10).set_index("hop")
    assert list(frame.index) == [0, 1, 2, 3]
    assert frame.loc[0, "decidable"] == 1.0
    assert frame.loc[1, "n"] == 4
    assert frame.loc[1, "decidable"] == pytest.approx(0.5)
    assert frame.loc[1, "inconsistent"] == pytest.approx(0.25)
    assert frame.loc[1, "undecidable_ambiguous_count"] == 1
    assert frame.loc[2, "undecidable_missing"] == pytest.approx(0.5)
    assert frame.loc[3, "undecidable_ambiguous"] == 1.0
    fractions = frame[["decidable", "inconsistent", "undecidable_missing", "undecidable_ambiguous"]].sum(axis=1)
    assert fractions.tolist() == pytest.approx([1.0] * 4)


def test_conditional_composition_excludes_own_missing(toy_graph):
    """Nodes without own intent leave the conditional denominator."""
    dag = condense(toy_graph)
    states = assign_states(dag).node_states(dag)
    hops = hop_distances(toy_graph, ["S", "O"], cutoff=10)
    frame = conditional_composition(states, hops).set_index("hop")
    assert frame.loc[2, "n"] == 1
    assert frame.loc[2, "decidable"] == 1.0


def test_composition_respects_max_hop(toy_graph):
    """Hops beyond max_hop are not reported."""
    dag = condense(toy_graph)
    states = assign_states(dag).node_states(dag)
    hops = hop_distances(toy_graph, ["S", "O"], cutoff=10)
    assert list(state_composition(states, hops, max_hop=1)["hop"]) == [0, 1]
