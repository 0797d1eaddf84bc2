"""
Lineage Graph

Edge store for validated derivation edges, strongly connected component
condensation, hop distances from ethical sources and longest-path lineage
depth.

Usage:
    graph = build_graph(edges, nodes)
    sources = ethical_sources(graph)
    hops = hop_distances(graph, sources, cutoff=10)
    dag = condense(graph)
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

import networkx as nx

from ..errors import UnknownNodeError
from ..utils.logger import get_logger
from .models import (
    EDGE_TYPE_PRIORITY,
    EVIDENCE_TIER,
    DerivationEdge,
    EdgeType,
    EvidenceSource,
    Family,
    Intent,
    MergeEvidence,
    MergeSignal,
    ModelNode,
)

__all__ = [
    "GraphDiagnostic",
    "LineageGraph",
    "CondensedDag",
    "IntentAggregation",
    "DepthResult",
    "assign_family",
    "build_graph",
    "condense",
    "ethical_sources",
    "hop_distances",
    "lineage_depth",
    "lineage_depth_summary",
]

logger = get_logger()

DEFAULT_FAMILY_ORGS: Dict[str, str] = {
    "meta-llama": "Llama",
    "mistralai": "Mistral",
    "qwen": "Qwen",
}
DEFAULT_FAMILY_SUBSTRINGS: Dict[str, str] = {
    "llama": "Llama",
    "mistral": "Mistral",
    "qwen": "Qwen",
}

# Metadata layers whose merge edges count as a `merge_tag` signal.
STRUCTURED_SOURCES = frozenset({EvidenceSource.TAG, EvidenceSource.YAML_FIELD})

MAX_DEPTH_HOPS = 30
MAX_DEPTH_STEPS = 500_000


def assign_family(
    node_id: str,
    family_orgs: Optional[Mapping[str, str]] = None,
    family_substrings: Optional[Mapping[str, str]] = None,
) -> Family:
    """
    Derive the model family from the org prefix, then from name substrings.

    Args:
        node_id: Repository identifier ("org/name")
        family_orgs: Official org prefix -> family name
        family_substrings: Case-insensitive name substring -> family name
    """
    orgs = {k.casefold(): v for k, v in (family_orgs or DEFAULT_FAMILY_ORGS).items()}
    substrings = family_substrings or DEFAULT_FAMILY_SUBSTRINGS
    folded = node_id.casefold()
    org = folded.split("/", 1)[0] if "/" in folded else ""
    if org in orgs:
        return Family(orgs[org])
    for needle in sorted(substrings):
        if needle.casefold() in folded:
            return Family(substrings[needle])
    return Family.OTHER


@dataclass
class GraphDiagnostic:
    """A rejected or repaired input record."""
    kind: str
    child: str
    parent: str
    message: str


class LineageGraph:
    """
    Mutable store of nodes and typed child -> parent edges.

    Both adjacency directions are maintained together; every edge endpoint
    is present in `nodes`.
    """

    def __init__(self):
        self.nodes: Dict[str, ModelNode] = {}
        self.children_of: Dict[str, Set[str]] = {}
        self.parents_of: Dict[str, Set[str]] = {}
        self.edge_types: Dict[Tuple[str, str], EdgeType] = {}
        self.edge_sources: Dict[Tuple[str, str], EvidenceSource] = {}
        self.diagnostics: List[GraphDiagnostic] = []
        self._acyclic: Optional[bool] = None

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edge_types)

    def add_node(self, node: ModelNode) -> None:
        """Add or replace a node."""
        self.nodes[node.node_id] = node
        self.children_of.setdefault(node.node_id, set())
        self.parents_of.setdefault(node.node_id, set())
        self._acyclic = None

    def add_edge(self, edge: DerivationEdge) -> bool:
        """
        Add an edge between existing nodes, keeping the higher-priority type
        for duplicates.

        Returns:
            True if the stored edge changed
        """
        key = (edge.child, edge.parent)
        if edge.child not in self.nodes or edge.parent not in self.nodes:
            raise UnknownNodeError(f"edge {edge.child} -> {edge.parent} references an unknown node")

        current = self.edge_types.get(key)
        if current is not None:
            candidate = (EDGE_TYPE_PRIORITY[edge.edge_type], EVIDENCE_TIER[edge.evidence_source])
            stored = (EDGE_TYPE_PRIORITY[current], EVIDENCE_TIER[self.edge_sources[key]])
            if candidate >= stored:
                return False

        self.edge_types[key] = edge.edge_type
        self.edge_sources[key] = edge.evidence_source
        self.parents_of[edge.child].add(edge.parent)
        self.children_of[edge.parent].add(edge.child)
        self._acyclic = None
        return True

    def edges(self) -> List[DerivationEdge]:
        """All stored edges in (child, parent) order."""
        return [
            DerivationEdge(child, parent, self.edge_types[(child, parent)], self.edge_sources[(child, parent)])
            for child, parent in sorted(self.edge_types)
        ]

    def roots(self) -> List[str]:
        """Nodes with in-degree zero (no parents)."""
        return sorted(node_id for node_id, parents in self.parents_of.items() if not parents)

    def ancestors(self, node_id: str) -> Set[str]:
        """All nodes reachable upstream of `node_id`."""
        return self._reach(node_id, self.parents_of)

    def descendants(self, node_id: str) -> Set[str]:
        """All nodes reachable downstream of `node_id`."""
        return self._reach(node_id, self.children_of)

    def _reach(self, node_id: str, adjacency: Dict[str, Set[str]]) -> Set[str]:
        if node_id not in self.nodes:
            raise UnknownNodeError(node_id)
        visited: Set[str] = set()
        stack = [node_id]
        while stack:
            current = stack.pop()
            for nxt in adjacency[current]:
                if nxt not in visited:
                    visited.add(nxt)
                    stack.append(nxt)
        visited.discard(node_id)
        return visited

    def merge_evidence(self, node_id: str) -> MergeEvidence:
        """
        Merge evidence for a node: stored signals plus `multi_parent` when it
        has more than one distinct parent and `merge_tag` for incoming merge
        edges taken from structured metadata (tags or YAML fields).

        A merge edge typed from README prose adds no signal of its own; the
        sentence it came from is already counted as `readme_mention`.
        """
        signals = set(self.nodes[node_id].merge_signals)
        parents = self.parents_of[node_id]
        if len(parents) > 1:
            signals.add(MergeSignal.MULTI_PARENT)
        if any(
            self.edge_types[(node_id, parent)] is EdgeType.MERGE
            and self.edge_sources[(node_id, parent)] in STRUCTURED_SOURCES
            for parent in parents
        ):
            signals.add(MergeSignal.MERGE_TAG)
        return MergeEvidence(frozenset(signals))

    def is_acyclic(self) -> bool:
        if self._acyclic is None:
            self._acyclic = nx.is_directed_acyclic_graph(self.to_networkx())
        return self._acyclic

    def to_networkx(self) -> nx.DiGraph:
        """Directed graph in parent -> child (downstream) direction."""
        digraph = nx.DiGraph()
        digraph.add_nodes_from(sorted(self.nodes))
        for child, parent in sorted(self.edge_types):
            digraph.add_edge(parent, child, edge_type=self.edge_types[(child, parent)].value)
        return digraph

    def to_dot(self, center: Optional[str] = None, radius: int = 2) -> str:
        """
        Export the graph, or the neighbourhood of `center`, as Graphviz DOT.

        Args:
            center: Node whose neighbourhood to export; whole graph if None
            radius: Hops in either direction around `center`
        """
        if center is None:
            keep = set(self.nodes)
        else:
            if center not in self.nodes:
                raise UnknownNodeError(center)
            keep = {center}
            frontier = {center}
            for _ in range(radius):
                nxt = set()
                for node_id in frontier:
                    nxt |= self.parents_of[node_id] | self.children_of[node_id]
                frontier = nxt - keep
                keep |= nxt

        lines = ["digraph lineage {", "  rankdir=TB;"]
        for node_id in sorted(keep):
            node = self.nodes[node_id]
            lines.append(f'  "{node_id}" [label="{node_id}\\n{node.intent.value}"];')
        for child, parent in sorted(self.edge_types):
            if child in keep and parent in keep:
                label = self.edge_types[(child, parent)].value
                lines.append(f'  "{parent}" -> "{child}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_graph(
    edges: Iterable[DerivationEdge],
    nodes: Iterable[ModelNode],
    strict: bool = False,
    family_fn: Optional[Callable[[str], Family]] = None,
) -> LineageGraph:
    """
    Assemble the lineage graph.

    Dataset edges and self-loops are dropped. An edge to an unknown node is
    rejected with a diagnostic in strict mode; in lenient mode a stub node
    with intent Unknown is created.

    Args:
        edges: Noise-filtered derivation edges
        nodes: Model nodes
        strict: Reject dangling edges instead of creating stubs
        family_fn: Family assignment; `assign_family` with defaults if omitted

    Returns:
        LineageGraph
    """
    family_fn = family_fn or assign_family
    graph = LineageGraph()
    for node in sorted(nodes, key=lambda n: n.node_id):
        node.family = family_fn(node.node_id)
        graph.add_node(node)

    for edge in sorted(edges, key=DerivationEdge.sort_key):
        if edge.edge_type is EdgeType.DATASET:
            graph.diagnostics.append(GraphDiagnostic("dataset_edge", edge.child, edge.parent, "dataset edge dropped"))
            continue
        if edge.child == edge.parent:
            graph.diagnostics.append(GraphDiagnostic("self_loop", edge.child, edge.parent, "self-loop dropped"))
            continue
        missing = [end for end in (edge.child, edge.parent) if end not in graph.nodes]
        if missing:
            if strict:
                graph.diagnostics.append(
                    GraphDiagnostic("unknown_node", edge.child, edge.parent, f"unknown node(s): {', '.join(missing)}")
                )
                continue
            for node_id in missing:
                graph.add_node(ModelNode(node_id=node_id, family=family_fn(node_id), stub=True))
                graph.diagnostics.append(GraphDiagnostic("stub_node", edge.child, edge.parent, f"stub created for {node_id}"))
        graph.add_edge(edge)

    if graph.diagnostics:
        logger.warning(f"Graph built with {len(graph.diagnostics)} diagnostic record(s)")
    logger.debug(f"Graph: {len(graph.nodes)} nodes, {graph.edge_count} edges")
    return graph


class IntentAggregation(str, Enum):
    """Rule for aggregating member intents of a strongly connected component."""
    RESTRICTIVE_FIRST = "restrictive_first"
    PERMISSIVE_FIRST = "permissive_first"


def _aggregate_intent(intents: Iterable[Intent], rule: IntentAggregation) -> Intent:
    present = set(intents)
    order = [Intent.RESTRICTIVE, Intent.PERMISSIVE]
    if rule is IntentAggregation.PERMISSIVE_FIRST:
        order.reverse()
    for intent in order:
        if intent in present:
            return intent
    return Intent.UNKNOWN


@dataclass
class CondensedDag:
    """
    Acyclic view of a lineage graph with one vertex per strongly connected
    component. Component indices follow the order of each component's
    smallest member id.
    """
    components: List[FrozenSet[str]]
    member_of: Dict[str, int]
    component_intent: List[Intent]
    component_is_merge: List[bool]
    component_evidence: List[MergeEvidence]
    component_passthrough: List[bool]
    parents: List[Tuple[int, ...]]
    children: List[Tuple[int, ...]]
    topo_order: List[int]
    source: Optional[LineageGraph] = None
    _ancestors: Dict[int, FrozenSet[int]] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.components)

    def ancestors(self, component: int) -> FrozenSet[int]:
        """All components upstream of `component`."""
        if not self._ancestors:
            for index in self.topo_order:
                upstream: Set[int] = set()
                for parent in self.parents[index]:
                    upstream.add(parent)
                    upstream |= self._ancestors[parent]
                self._ancestors[index] = frozenset(upstream)
        return self._ancestors[component]

    def dag_edges(self) -> List[Tuple[int, int]]:
        """(parent, child) component pairs."""
        return [(parent, child) for child in range(len(self.components)) for parent in self.parents[child]]

    def to_lineage_graph(self) -> LineageGraph:
        """View the condensation as a lineage graph with one node per component."""
        graph = LineageGraph()
        for index, members in enumerate(self.components):
            graph.add_node(ModelNode(
                node_id=min(members),
                intent=self.component_intent[index],
                passthrough=self.component_passthrough[index],
                merge_signals=set(self.component_evidence[index].signals),
            ))
        for parent, child in self.dag_edges():
            graph.add_edge(DerivationEdge(
                min(self.components[child]),
                min(self.components[parent]),
                EdgeType.BASE_MODEL,
                EvidenceSource.YAML_FIELD,
            ))
        return graph


def condense(
    graph: LineageGraph,
    aggregation: IntentAggregation = IntentAggregation.RESTRICTIVE_FIRST,
) -> CondensedDag:
    """
    Collapse strongly connected components into a DAG.

    Component intent is the most restrictive member intent (or permissive
    first under `IntentAggregation.PERMISSIVE_FIRST`); merge evidence is the
    union of member evidence; a component is passthrough-restrictive if any
    member is.
    """
    digraph = graph.to_networkx()
    components = sorted(
        (frozenset(scc) for scc in nx.strongly_connected_components(digraph)),
        key=min,
    )
    member_of = {node_id: index for index, members in enumerate(components) for node_id in members}

    parent_sets: List[Set[int]] = [set() for _ in components]
    child_sets: List[Set[int]] = [set() for _ in components]
    for child, parent in graph.edge_types:
        c_child, c_parent = member_of[child], member_of[parent]
        if c_child != c_parent:
            parent_sets[c_child].add(c_parent)
            child_sets[c_parent].add(c_child)

    component_dag = nx.DiGraph()
    component_dag.add_nodes_from(range(len(components)))
    for child, parents in enumerate(parent_sets):
        component_dag.add_edges_from((parent, child) for parent in parents)
    topo_order = list(nx.lexicographical_topological_sort(component_dag))

    intents, evidence, passthrough = [], [], []
    for members in components:
        ordered = sorted(members)
        intents.append(_aggregate_intent((graph.nodes[m].intent for m in ordered), aggregation))
        merged = MergeEvidence()
        for member in ordered:
            merged = merged.union(graph.merge_evidence(member))
        evidence.append(merged)
        passthrough.append(any(graph.nodes[m].passthrough for m in ordered))

    return CondensedDag(
        components=components,
        member_of=member_of,
        component_intent=intents,
        component_is_merge=[e.is_merge for e in evidence],
        component_evidence=evidence,
        component_passthrough=passthrough,
        parents=[tuple(sorted(p)) for p in parent_sets],
        children=[tuple(sorted(c)) for c in child_sets],
        topo_order=topo_order,
        source=graph,
    )


def ethical_sources(graph: LineageGraph) -> Set[str]:
    """Roots (no parents) whose intent is Restrictive."""
    return {
        node_id for node_id in graph.roots()
        if graph.nodes[node_id].intent is Intent.RESTRICTIVE
    }


def hop_distances(graph: LineageGraph, sources: Iterable[str], cutoff: int) -> Dict[str, int]:
    """
    Multi-source BFS downstream from `sources`.

    Args:
        graph: Lineage graph
        sources: Source node ids (hop 0)
        cutoff: Maximum hop kept

    Returns:
        node id -> shortest hop from the nearest source, within cutoff
    """
    hops: Dict[str, int] = {}
    frontier = []
    for source in sorted(set(sources)):
        if source not in graph.nodes:
            raise UnknownNodeError(source)
        hops[source] = 0
        frontier.append(source)

    hop = 0
    while frontier and hop < cutoff:
        hop += 1
        nxt = []
        for node_id in frontier:
            for child in sorted(graph.children_of[node_id]):
                if child not in hops:
                    hops[child] = hop
                    nxt.append(child)
        frontier = nxt
    return hops


@dataclass
class DepthResult:
    """Longest-path depths of the ancestors of one root."""
    root: str
    depths: Dict[str, int]
    truncated: bool
    steps: int

    @property
    def max_depth(self) -> int:
        return max(self.depths.values(), default=0)


def lineage_depth(
    graph: LineageGraph,
    root: str,
    max_hops: int = MAX_DEPTH_HOPS,
    max_steps: int = MAX_DEPTH_STEPS,
) -> DepthResult:
    """
    Longest-path distance from `root` to each reachable ancestor.

    Traverses upstream with a per-path visit set so cycles terminate. The
    traversal stops at `max_hops` hops or `max_steps` expansions and flags
    the result as truncated.
    """
    if root not in graph.nodes:
        raise UnknownNodeError(root)

    prune = graph.is_acyclic()
    depths: Dict[str, int] = {}
    truncated = False
    steps = 0
    stack: List[Tuple[str, int, FrozenSet[str]]] = [(root, 0, frozenset((root,)))]

    while stack:
        node_id, depth, path = stack.pop()
        steps += 1
        if steps > max_steps:
            truncated = True
            break
        for parent in sorted(graph.parents_of[node_id], reverse=True):
            if parent in path:
                continue
            nxt = depth + 1
            if nxt > max_hops:
                truncated = True
                continue
            best = depths.get(parent)
            if best is not None and prune and nxt <= best:
                continue
            if best is None or nxt > best:
                depths[parent] = nxt
            stack.append((parent, nxt, path | {parent}))

    if truncated:
        logger.warning(f"Lineage depth traversal truncated at root {root} after {steps} steps")
    return DepthResult(root=root, depths=depths, truncated=truncated, steps=steps)


def lineage_depth_summary(
    graph: LineageGraph,
    roots: Optional[Iterable[str]] = None,
    include_truncated: bool = False,
) -> Dict[str, float]:
    """
    Summarize maximum lineage depth over roots.

    Truncated roots are excluded unless `include_truncated` is set.
    """
    selected = sorted(roots) if roots is not None else sorted(graph.nodes)
    results = [lineage_depth(graph, root) for root in selected]
    kept = [r for r in results if include_truncated or not r.truncated]
    depths = [r.max_depth for r in kept]
    return {
        "roots": float(len(results)),
        "truncated": float(sum(r.truncated for r in results)),
        "mean_max_depth": float(sum(depths) / len(depths)) if depths else 0.0,
        "max_depth": float(max(depths, default=0)),
    }
