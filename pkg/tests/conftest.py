"""
Test configuration for the lineage governance engine.

Fixtures build small lineage graphs by hand; the settings singleton is
reset around every test so CLI flags set by one test never leak into the
next.
"""
import os
import sys
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from lineage_governance.core.graph import LineageGraph, build_graph
from lineage_governance.core.models import DerivationEdge, EdgeType, EvidenceSource, Intent, MergeSignal, ModelNode
from lineage_governance.licensing.rules import load_rule_set

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")

EdgeSpec = Union[Tuple[str, str], Tuple[str, str, EdgeType]]


def make_graph(
    intents: Dict[str, str],
    edges: Iterable[EdgeSpec] = (),
    passthrough: Sequence[str] = (),
    signals: Optional[Dict[str, Iterable[MergeSignal]]] = None,
) -> LineageGraph:
    """
    Build a graph from compact specs.

    Args:
        intents: node id -> "R", "P" or "U"
        edges: (child, parent) or (child, parent, edge type); finetune by default
        passthrough: Nodes carrying an OpenRAIL-family licence
        signals: Stored merge signals per node
    """
    signals = signals or {}
    nodes = [
        ModelNode(
            node_id=node_id,
            intent=Intent(intent),
            passthrough=node_id in passthrough,
            merge_signals=set(signals.get(node_id, ())),
        )
        for node_id, intent in intents.items()
    ]
    derivations = [
        DerivationEdge(spec[0], spec[1], spec[2] if len(spec) > 2 else EdgeType.FINETUNE, EvidenceSource.YAML_FIELD)
        for spec in edges
    ]
    return build_graph(derivations, nodes)


@pytest.fixture(autouse=True)
def reset_settings():
    """Reset the settings singleton so each test sees environment defaults."""
    import lineage_governance.utils.config as config_module
    config_module._settings_manager = None
    yield
    config_module._settings_manager = None


@pytest.fixture(scope="session")
def rules():
    """Shipped rule tables."""
    return load_rule_set()


@pytest.fixture
def chain_graph():
    """S(R) -> A(R) -> B(P)."""
    return make_graph({"S": "R", "A": "R", "B": "P"}, [("A", "S"), ("B", "A")])


@pytest.fixture
def toy_graph():
    """
    Ten nodes covering every audit rule.

    S and O are restrictive roots (O carries an OpenRAIL licence), Q is a
    permissive root. U1 has no licence, D1 sits below it. M1 merges S and Q
    with a single merge signal, M2 merges them with merge edges (two
    signals). P1 declares a permissive licence under O.
    """
    return make_graph(
        {
            "S": "R", "O": "R", "Q": "P",
            "A": "R", "U1": "U", "D1": "R",
            "M1": "P", "M2": "P", "P1": "P", "C": "R",
        },
        [
            ("A", "S"), ("U1", "A"), ("D1", "U1"),
            ("M1", "S"), ("M1", "Q"),
            ("M2", "S", EdgeType.MERGE), ("M2", "Q", EdgeType.MERGE),
            ("P1", "O"), ("C", "P1"),
        ],
        passthrough=["O"],
    )
