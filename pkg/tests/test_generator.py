"""
Tests for the synthetic ecosystem generator.
"""
import json

import pytest

from lineage_governance.core.graph import build_graph, ethical_sources, hop_distances
from lineage_governance.core.io import load_graph
from lineage_governance.core.models import EdgeType, Intent, MergeSignal
from lineage_governance.synthetic.generator import (
    CausalSpec,
    GeneratorSpec,
    generate,
    generate_merge_cases,
    write_outputs,
)


def _graph(result):
    return build_graph(result.edges, result.nodes)


def test_generation_is_deterministic():
    """The same spec yields identical nodes, edges and ground truth."""
    spec = GeneratorSpec(n_roots=8, generations=4, merge_prob=0.3, orphan_component_count=2, seed=11)
    first, second = generate(spec), generate(spec)
    assert [n.to_dict() for n in first.nodes] == [n.to_dict() for n in second.nodes]
    assert first.edges == second.edges
    assert first.ground_truth == second.ground_truth
    assert generate(spec.model_copy(update={"seed": 12})).ground_truth != first.ground_truth


def test_integer_branching_sizes():
    """Branching 2 doubles each generation exactly."""
    result = generate(GeneratorSpec(n_roots=3, generations=3, branching=2, merge_prob=0.0))
    assert result.ground_truth["n_nodes"] == 3 + 6 + 12 + 24
    assert result.ground_truth["n_edges"] == 6 + 12 + 24
    assert [n.node_id for n in result.nodes] == sorted(n.node_id for n in result.nodes)


def test_roots_are_restrictive_sources():
    """Roots carry a restrictive licence and are the ethical sources."""
    result = generate(GeneratorSpec(n_roots=5, generations=2, seed=1))
    roots = result.ground_truth["sources"]
    assert roots[0] == "meta-llama/base-00000"
    assert "synthetic-lab/base-00003" in roots
    graph = _graph(result)
    assert ethical_sources(graph) == set(roots)
    assert all(graph.nodes[r].restriction_score == 2.0 for r in roots)


def test_generation_equals_hop_distance():
    """Every derived node sits at its generation's hop from the sources."""
    spec = GeneratorSpec(n_roots=6, generations=5, merge_prob=0.4, orphan_component_count=3, seed=2)
    result = generate(spec)
    graph = _graph(result)
    hops = hop_distances(graph, ethical_sources(graph), spec.generations)
    assert hops == result.ground_truth["generation"]
    assert not set(result.ground_truth["orphans"]) & set(hops)


def test_restatement_needs_a_restating_parent():
    """Restriction is only restated below a node that restated it."""
    result = generate(GeneratorSpec(n_roots=10, generations=4, restatement_prob=0.6, merge_prob=0.2, seed=4))
    graph = _graph(result)
    restated = result.ground_truth["restated"]
    for node_id, flag in restated.items():
        if flag and result.ground_truth["generation"][node_id] > 0:
            assert any(restated[p] for p in graph.parents_of[node_id])
            assert graph.nodes[node_id].intent is Intent.RESTRICTIVE


@pytest.mark.parametrize("q,half_life", [(0.5, 1.0), (0.25, 0.5), (1.0, None)])
def test_expected_retention(q, half_life):
    """Ground truth records q^h and the implied half-life."""
    truth = generate(GeneratorSpec(n_roots=2, generations=3, restatement_prob=q)).ground_truth
    assert truth["expected_retention"] == pytest.approx([q ** h for h in range(4)])
    if half_life is None:
        assert truth["half_life"] is None
    else:
        assert truth["half_life"] == pytest.approx(half_life)


def test_no_restatement_with_full_missingness():
    """q = 0 and missing probability 1 leave every derived node Unknown."""
    result = generate(GeneratorSpec(n_roots=4, generations=2, restatement_prob=0.0, missing_prob=1.0))
    derived = [n for n in result.nodes if n.node_id.startswith("derived-")]
    assert derived and all(n.intent is Intent.UNKNOWN for n in derived)


def test_merges_get_two_parents():
    """With merge probability 1 every derived node has a second parent."""
    result = generate(GeneratorSpec(n_roots=4, generations=2, branching=1, merge_prob=1.0, merge_tag_prob=1.0, seed=3))
    graph = _graph(result)
    merges = result.ground_truth["merge_children"]
    assert len(merges) == 8
    for node_id in merges:
        assert len(graph.parents_of[node_id]) == 2
        assert all(graph.edge_types[(node_id, p)] is EdgeType.MERGE for p in graph.parents_of[node_id])
        assert graph.nodes[node_id].merge_signals == {MergeSignal.MERGE_YAML}


def test_untagged_merges_use_base_model_edges():
    """Merges without a tag point at their second parent through a base-model edge."""
    result = generate(GeneratorSpec(n_roots=4, generations=1, branching=1, merge_prob=1.0, merge_tag_prob=0.0))
    types = sorted(edge.edge_type.value for edge in result.edges)
    assert types == ["base_model"] * 4 + ["finetune"] * 4


def test_orphans_are_isolated_unknown_nodes():
    """Orphan components have no intent and no edges."""
    result = generate(GeneratorSpec(n_roots=2, generations=1, orphan_component_count=3))
    graph = _graph(result)
    assert result.ground_truth["orphans"] == ["orphan/model-00000", "orphan/model-00001", "orphan/model-00002"]
    for node_id in result.ground_truth["orphans"]:
        assert graph.nodes[node_id].intent is Intent.UNKNOWN
        assert not graph.parents_of[node_id] and not graph.children_of[node_id]


def test_max_nodes_guard():
    """Growth past max_nodes is refused."""
    with pytest.raises(ValueError):
        generate(GeneratorSpec(n_roots=10, generations=3, branching=3, max_nodes=50))


def test_causal_spec_validation():
    """A treatment effect that would leave (0, 1) is rejected."""
    with pytest.raises(ValueError):
        CausalSpec(true_ate=0.99, base_rate=0.05)
    with pytest.raises(ValueError):
        CausalSpec(true_ate=-0.1, base_rate=0.05)


def test_merge_cases_match_calibration():
    """The sample effect tracks the calibrated population effect."""
    cases, truth = generate_merge_cases(CausalSpec(n_cases=20_000, true_ate=0.05, base_rate=0.10), seed=8)
    assert len(cases) == 20_000
    assert truth["n_treated"] + truth["n_control"] == 20_000
    assert truth["sample_ate"] == pytest.approx(0.05, abs=0.015)
    untreated_rate = sum(c.outcome for c in cases if not c.treated) / truth["n_control"]
    assert untreated_rate < 0.10
    assert truth["att"] > 0
    assert truth["treatment_coefficient"] > 0


def test_merge_cases_are_seeded():
    """Equal seeds give identical cases."""
    spec = CausalSpec(n_cases=50)
    assert generate_merge_cases(spec, 3)[0] == generate_merge_cases(spec, 3)[0]


def test_write_outputs_round_trip(tmp_path):
    """Written nodes and edges reload into the same graph."""
    spec = GeneratorSpec(n_roots=3, generations=2, merge_prob=0.3, causal=CausalSpec(n_cases=40), seed=6)
    result = generate(spec)
    paths = write_outputs(result, tmp_path)
    assert sorted(p.name for p in paths) == ["edges.csv", "ground_truth.json", "merge_cases.csv", "nodes.jsonl"]
    reloaded = load_graph(tmp_path / "nodes.jsonl", tmp_path / "edges.csv")
    assert reloaded.edges() == _graph(result).edges()
    truth = json.loads((tmp_path / "ground_truth.json").read_text(encoding="utf-8"))
    assert truth["spec"]["seed"] == 6
    assert len(truth["causal"]) > 0
