"""
Tests for the lineage graph: construction, duplicate edge typing, merge
evidence, condensation, traversal and export.
"""
import pytest

from lineage_governance.core.graph import (
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
from lineage_governance.core.io import load_graph, read_jsonl, save_graph
from lineage_governance.core.models import (
    DerivationEdge,
    EdgeType,
    EvidenceSource,
    Family,
    Intent,
    MergeSignal,
    ModelNode,
)
from lineage_governance.errors import UnknownNodeError

from tests.conftest import make_graph


def _edge(child, parent, edge_type=EdgeType.FINETUNE, source=EvidenceSource.TAG):
    return DerivationEdge(child, parent, edge_type, source)


def test_build_graph_drops_dataset_edges_and_self_loops():
    """Dataset edges and self-loops become diagnostics."""
    nodes = [ModelNode("a/x"), ModelNode("b/y")]
    graph = build_graph(
        [_edge("a/x", "b/y", EdgeType.DATASET), _edge("a/x", "a/x"), _edge("a/x", "b/y")],
        nodes,
    )
    assert graph.edge_count == 1
    assert sorted(d.kind for d in graph.diagnostics) == ["dataset_edge", "self_loop"]


def test_lenient_mode_creates_stub():
    """An edge to an unknown parent creates an Unknown stub."""
    graph = build_graph([_edge("a/x", "ghost/model")], [ModelNode("a/x", intent=Intent.PERMISSIVE)])
    stub = graph.nodes["ghost/model"]
    assert stub.stub and stub.intent is Intent.UNKNOWN
    assert graph.parents_of["a/x"] == {"ghost/model"}
    assert [d.kind for d in graph.diagnostics] == ["stub_node"]


def test_strict_mode_rejects_unknown_node():
    """Strict mode drops dangling edges with a diagnostic."""
    graph = build_graph([_edge("a/x", "ghost/model")], [ModelNode("a/x")], strict=True)
    assert "ghost/model" not in graph
    assert graph.edge_count == 0
    assert [d.kind for d in graph.diagnostics] == ["unknown_node"]


def test_build_graph_assigns_family():
    """Nodes get a family from the family function."""
    graph = build_graph([], [ModelNode("meta-llama/Llama-3-8B"), ModelNode("x/qwen-ft"), ModelNode("x/other")])
    assert graph.nodes["meta-llama/Llama-3-8B"].family is Family.LLAMA
    assert graph.nodes["x/qwen-ft"].family is Family.QWEN
    assert graph.nodes["x/other"].family is Family.OTHER
    assert assign_family("mistralai/anything") is Family.MISTRAL


def test_add_edge_keeps_higher_priority_type():
    """Duplicate edges keep the higher-priority type."""
    graph = LineageGraph()
    graph.add_node(ModelNode("c"))
    graph.add_node(ModelNode("p"))
    assert graph.add_edge(_edge("c", "p", EdgeType.FINETUNE))
    assert graph.add_edge(_edge("c", "p", EdgeType.QUANTIZATION))
    assert not graph.add_edge(_edge("c", "p", EdgeType.BASE_MODEL))
    assert graph.edge_types[("c", "p")] is EdgeType.QUANTIZATION
    assert graph.edge_count == 1


def test_add_edge_same_type_prefers_stronger_evidence():
    """Between equal types the lower evidence tier wins."""
    graph = LineageGraph()
    graph.add_node(ModelNode("c"))
    graph.add_node(ModelNode("p"))
    graph.add_edge(_edge("c", "p", EdgeType.FINETUNE, EvidenceSource.README_PROSE))
    graph.add_edge(_edge("c", "p", EdgeType.FINETUNE, EvidenceSource.YAML_FIELD))
    assert graph.edge_sources[("c", "p")] is EvidenceSource.YAML_FIELD


def test_add_edge_unknown_node_raises():
    """Edges between unknown nodes are rejected."""
    graph = LineageGraph()
    graph.add_node(ModelNode("c"))
    with pytest.raises(UnknownNodeError):
        graph.add_edge(_edge("c", "missing"))


def test_adjacency_is_bidirectional(chain_graph):
    """children_of and parents_of mirror each other."""
    for child, parent in chain_graph.edge_types:
        assert parent in chain_graph.parents_of[child]
        assert child in chain_graph.children_of[parent]
    assert chain_graph.roots() == ["S"]
    assert chain_graph.ancestors("B") == {"S", "A"}
    assert chain_graph.descendants("S") == {"A", "B"}


def test_merge_evidence_signals(toy_graph):
    """Multi-parent and merge-typed edges contribute merge signals."""
    assert toy_graph.merge_evidence("M1").signals == {MergeSignal.MULTI_PARENT}
    assert toy_graph.merge_evidence("M2").signals == {MergeSignal.MULTI_PARENT, MergeSignal.MERGE_TAG}
    assert toy_graph.merge_evidence("M2").count == 2
    assert not toy_graph.merge_evidence("A").is_merge


def test_merge_evidence_keeps_stored_signals():
    """Signals recorded on the node are part of its evidence."""
    graph = make_graph({"P": "R", "C": "P"}, [("C", "P")], signals={"C": [MergeSignal.README_MENTION]})
    assert graph.merge_evidence("C").signals == {MergeSignal.README_MENTION}


def _prose_merge_graph():
    nodes = [
        ModelNode(node_id="A", intent=Intent.RESTRICTIVE),
        ModelNode(node_id="B", intent=Intent.PERMISSIVE),
        ModelNode(node_id="C", intent=Intent.PERMISSIVE, merge_signals={MergeSignal.README_MENTION}),
    ]
    edges = [
        _edge("C", "A", EdgeType.MERGE, EvidenceSource.README_PROSE),
        _edge("C", "B", EdgeType.MERGE, EvidenceSource.README_PROSE),
    ]
    return build_graph(edges, nodes)


def test_prose_merge_edges_add_no_merge_tag():
    """A merge named only in README prose counts once, as a README mention."""
    evidence = _prose_merge_graph().merge_evidence("C")
    assert evidence.signals == {MergeSignal.MULTI_PARENT, MergeSignal.README_MENTION}
    assert evidence.count == 2


@pytest.mark.parametrize("source", [EvidenceSource.TAG, EvidenceSource.YAML_FIELD])
def test_structured_merge_edges_add_merge_tag(source):
    """Merge edges from tags or YAML fields are a merge_tag signal."""
    nodes = [ModelNode(node_id=n, intent=Intent.PERMISSIVE) for n in ("A", "C")]
    graph = build_graph([_edge("C", "A", EdgeType.MERGE, source)], nodes)
    assert graph.merge_evidence("C").signals == {MergeSignal.MERGE_TAG}


@pytest.fixture
def cyclic_graph():
    """S -> A <-> B, with A restrictive and B permissive."""
    return make_graph({"S": "R", "A": "R", "B": "P"}, [("A", "S"), ("A", "B"), ("B", "A")])


def test_condense_collapses_cycle(cyclic_graph):
    """A two-node cycle becomes one component with restrictive intent."""
    assert not cyclic_graph.is_acyclic()
    dag = condense(cyclic_graph)
    assert len(dag) == 2
    assert dag.components[0] == frozenset({"A", "B"})
    assert dag.member_of["B"] == 0
    assert dag.component_intent[0] is Intent.RESTRICTIVE
    assert dag.parents[0] == (1,)
    assert dag.children[1] == (0,)
    assert dag.topo_order == [1, 0]
    assert dag.ancestors(0) == frozenset({1})
    assert dag.dag_edges() == [(1, 0)]


def test_condense_permissive_first(cyclic_graph):
    """The permissive-first rule prefers P inside a mixed component."""
    dag = condense(cyclic_graph, IntentAggregation.PERMISSIVE_FIRST)
    assert dag.component_intent[0] is Intent.PERMISSIVE


def test_condense_acyclic_is_identity(toy_graph):
    """Condensing a DAG keeps one component per node."""
    dag = condense(toy_graph)
    assert len(dag) == len(toy_graph)
    assert all(len(members) == 1 for members in dag.components)
    assert dag.component_passthrough[dag.member_of["O"]]
    assert dag.component_is_merge[dag.member_of["M2"]]
    view = dag.to_lineage_graph()
    assert view.is_acyclic()
    assert view.edge_count == toy_graph.edge_count


def test_topological_order_respects_edges(toy_graph):
    """Parents precede children in the component order."""
    dag = condense(toy_graph)
    position = {component: i for i, component in enumerate(dag.topo_order)}
    for parent, child in dag.dag_edges():
        assert position[parent] < position[child]


def test_ethical_sources(toy_graph):
    """Only restrictive roots are ethical sources."""
    assert ethical_sources(toy_graph) == {"S", "O"}


def test_hop_distances(toy_graph):
    """Multi-source BFS keeps the shortest hop within the cutoff."""
    hops = hop_distances(toy_graph, ["S", "O"], cutoff=2)
    assert hops == {"S": 0, "O": 0, "A": 1, "M1": 1, "M2": 1, "P1": 1, "U1": 2, "C": 2}
    with pytest.raises(UnknownNodeError):
        hop_distances(toy_graph, ["nope"], cutoff=1)


@pytest.fixture
def diamond_graph():
    """D has parents B and C, both derived from A; D also points at A directly."""
    return make_graph(
        {"A": "R", "B": "R", "C": "R", "D": "P"},
        [("B", "A"), ("C", "A"), ("D", "B"), ("D", "C"), ("D", "A")],
    )


def test_lineage_depth_longest_path(diamond_graph):
    """Depth is the longest path, not the shortest."""
    result = lineage_depth(diamond_graph, "D")
    assert result.depths == {"B": 1, "C": 1, "A": 2}
    assert result.max_depth == 2
    assert not result.truncated


def test_lineage_depth_terminates_on_cycles(cyclic_graph):
    """Per-path visit sets stop traversal around cycles."""
    result = lineage_depth(cyclic_graph, "A")
    assert result.depths == {"B": 1, "S": 1}
    assert not result.truncated


def test_lineage_depth_truncation():
    """Hop and step limits flag the result as truncated."""
    ids = [f"n{i}" for i in range(6)]
    graph = make_graph({node: "R" for node in ids}, [(ids[i + 1], ids[i]) for i in range(5)])
    by_hops = lineage_depth(graph, "n5", max_hops=3)
    assert by_hops.truncated and by_hops.max_depth == 3
    by_steps = lineage_depth(graph, "n5", max_steps=1)
    assert by_steps.truncated


def test_lineage_depth_summary(diamond_graph):
    """Summary over selected roots."""
    summary = lineage_depth_summary(diamond_graph, roots=["D", "B"])
    assert summary == {"roots": 2.0, "truncated": 0.0, "mean_max_depth": 1.5, "max_depth": 2.0}


def test_to_dot_neighbourhood(chain_graph):
    """DOT export of a neighbourhood keeps only nearby nodes and edges."""
    dot = chain_graph.to_dot(center="S", radius=1)
    assert dot.startswith("digraph lineage {")
    assert '"S" -> "A" [label="finetune"];' in dot
    assert '"B"' not in dot
    assert '"A" -> "B"' in chain_graph.to_dot()
    with pytest.raises(UnknownNodeError):
        chain_graph.to_dot(center="nope")


def test_to_networkx_direction(chain_graph):
    """NetworkX export points parent to child."""
    digraph = chain_graph.to_networkx()
    assert digraph.has_edge("S", "A")
    assert not digraph.has_edge("A", "S")
    assert digraph.edges["S", "A"]["edge_type"] == "finetune"


def test_save_and_load_graph(tmp_path, toy_graph):
    """A saved graph reloads with identical edges and intents."""
    nodes_path, edges_path = save_graph(toy_graph, tmp_path, prefix="graph_")
    assert nodes_path.name == "graph_nodes.jsonl"
    assert [row["id"] for row in read_jsonl(nodes_path)] == sorted(toy_graph.nodes)
    reloaded = load_graph(nodes_path, edges_path)
    assert reloaded.edges() == toy_graph.edges()
    assert {k: n.intent for k, n in reloaded.nodes.items()} == {k: n.intent for k, n in toy_graph.nodes.items()}
    assert reloaded.nodes["O"].passthrough
