"""
Flat-file I/O

Nodes JSONL, edges CSV and report writers. Every writer emits UTF-8 with
"\\n" line endings, sorted JSON keys and fixed float formatting so reruns
produce byte-identical files.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import pandas as pd

from .graph import LineageGraph, build_graph
from .models import DerivationEdge, EdgeType, EvidenceSource, ModelNode

__all__ = [
    "EDGE_COLUMNS",
    "FLOAT_FORMAT",
    "write_csv",
    "write_json",
    "write_jsonl",
    "read_jsonl",
    "save_nodes",
    "load_nodes",
    "save_edges",
    "load_edges",
    "save_graph",
    "load_graph",
]

PathLike = Union[str, Path]

EDGE_COLUMNS = ["child", "parent", "edge_type", "evidence_source"]
FLOAT_FORMAT = "%.10g"


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format=FLOAT_FORMAT, encoding="utf-8")
    return path


def write_json(data: Any, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False))
        f.write("\n")
    return path


def write_jsonl(rows: Iterable[Dict[str, Any]], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            f.write("\n")
    return path


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    """
    Read a JSONL file, skipping blank lines.

    Raises:
        ValueError: a line is not valid JSON (message carries the line number)
    """
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {e.msg}") from e
    return rows


def save_nodes(nodes: Iterable[ModelNode], path: PathLike) -> Path:
    return write_jsonl((node.to_dict() for node in sorted(nodes, key=lambda n: n.node_id)), path)


def load_nodes(path: PathLike) -> List[ModelNode]:
    return [ModelNode.from_dict(row) for row in read_jsonl(path)]


def save_edges(edges: Iterable[DerivationEdge], path: PathLike) -> Path:
    rows = [
        {
            "child": edge.child,
            "parent": edge.parent,
            "edge_type": edge.edge_type.value,
            "evidence_source": edge.evidence_source.value,
        }
        for edge in sorted(edges, key=DerivationEdge.sort_key)
    ]
    return write_csv(pd.DataFrame(rows, columns=EDGE_COLUMNS), path)


def load_edges(path: PathLike) -> List[DerivationEdge]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [column for column in EDGE_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing edge column(s): {', '.join(missing)}")
    return [
        DerivationEdge(row.child, row.parent, EdgeType(row.edge_type), EvidenceSource(row.evidence_source))
        for row in frame.itertuples(index=False)
    ]


def save_graph(graph: LineageGraph, out_dir: PathLike, prefix: str = "") -> Tuple[Path, Path]:
    """Write `<prefix>nodes.jsonl` and `<prefix>edges.csv`; stub nodes are written like any other."""
    out_dir = Path(out_dir)
    nodes_path = save_nodes(graph.nodes.values(), out_dir / f"{prefix}nodes.jsonl")
    edges_path = save_edges(graph.edges(), out_dir / f"{prefix}edges.csv")
    return nodes_path, edges_path


def load_graph(nodes_path: PathLike, edges_path: PathLike, strict: bool = False, family_fn: Optional[Any] = None) -> LineageGraph:
    return build_graph(load_edges(edges_path), load_nodes(nodes_path), strict=strict, family_fn=family_fn)
