"""
Model Card Parser

Extracts parent candidates from three layers of repository evidence and
turns them into typed, noise-filtered derivation edges.

Layers:
- Structured metadata: YAML `base_model` / `base_models` fields and
  `base_model:<op>:<org>/<repo>` tags (retained unconditionally)
- README: prose patterns, hyperlinks to model repositories and
  derivation tables (self-row targeting, benchmark tables skipped)
- Name patterns: quantization suffixes such as -GGUF, -AWQ, -GPTQ

Usage:
    parser = CardParser(rules.vocabulary)
    universe = parser.build_universe(record.repo_id for record in records)
    extraction = parser.extract(record, universe)
"""

import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
import yaml
from joblib import Parallel, delayed
from pydantic import BaseModel, Field

from ..core.graph import assign_family
from ..core.models import (
    EDGE_TYPE_PRIORITY,
    EVIDENCE_TIER,
    DerivationEdge,
    EdgeType,
    EvidenceSource,
    Family,
    MergeSignal,
)
from ..licensing.rules import CardVocabulary
from ..utils.logger import get_logger
from .records import ParseWarning, RawReference, RepositoryRecord, ResolvedReference
from .resolver import UniverseIndex, similarity

__all__ = [
    "ParserConfig",
    "CardExtraction",
    "CardParser",
    "split_front_matter",
    "type_edges",
    "filter_noise",
]

logger = get_logger()

_FRONT_MATTER = re.compile(r"\A\ufeff?---[ \t]*\r?\n(.*?)\r?\n---[ \t]*(?:\r?\n|\Z)(.*)\Z", re.DOTALL)
_LINK = re.compile(r"\[([^\]]*)\]\(\s*<?([^)\s>]+)>?(?:\s+\"[^\"]*\")?\s*\)")
_BARE_URL = re.compile(r"https?://(?:www\.)?huggingface\.co/[^\s)\]>\"'`|]+", re.IGNORECASE)
_HF_PATH = re.compile(r"^https?://(?:www\.)?huggingface\.co/([^?#]*)", re.IGNORECASE)
_ID = re.compile(r"(?<![\w./\-:@])([A-Za-z0-9][\w.\-]*/[\w.\-]*\w)(?![\w/])")
_FULL_ID = re.compile(r"^[A-Za-z0-9][\w.\-]*/[\w.\-]*\w$")
_LIST_ITEM = re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+")
_SEPARATOR_CELL = re.compile(r"^:?-{3,}:?$")
_FENCE = re.compile(r"^\s*(```|~~~)")
_RESERVED_PATHS = {
    "datasets", "spaces", "docs", "blog", "papers", "organizations", "collections",
    "settings", "join", "login", "pricing", "models", "tasks", "learn", "posts",
}


class ParserConfig(BaseModel):
    """Card-parser behaviour switches."""
    tier_first: bool = Field(default=True, description="Evidence tier outranks edge-type priority")
    parse_tables: bool = Field(default=True, description="Read derivation tables in README files")
    sibling_filter: bool = Field(default=True, description="Drop uncorroborated list-context sibling links")


@dataclass
class CardExtraction:
    """Everything extracted from one repository."""
    repo_id: str
    edges: List[DerivationEdge]
    references: List[RawReference]
    resolved: List[ResolvedReference]
    merge_signals: Set[MergeSignal] = field(default_factory=set)
    licence_names: List[str] = field(default_factory=list)
    warnings: List[ParseWarning] = field(default_factory=list)


def split_front_matter(text: str) -> Tuple[Optional[str], str]:
    """Split a leading `---` fenced YAML block from markdown; (None, text) if absent."""
    match = _FRONT_MATTER.match(text or "")
    if match is None:
        return None, text or ""
    return match.group(1), match.group(2)


def _as_list(value: Any) -> List[str]:
    if isinstance(value, str):
        return [value] if value.strip() else []
    if isinstance(value, (list, tuple)):
        return [str(item) for item in value if isinstance(item, str) and item.strip()]
    return []


def _effective_type(ref: ResolvedReference) -> EdgeType:
    return ref.suggested_type or EdgeType.BASE_MODEL


def type_edges(refs: Iterable[ResolvedReference], tier_first: bool = True) -> List[DerivationEdge]:
    """
    Collapse resolved references into one typed edge per (child, parent).

    With `tier_first`, the type comes from the highest evidence tier present
    (yaml/tag, then README, then name pattern) and within that tier from the
    priority quantization > adapter > finetune > merge > ... > base_model.
    Untyped references count as base_model. Dataset references only produce
    a dataset edge when nothing else supports the pair.

    Returns:
        Edges in (child, parent) order; never self-loops
    """
    grouped: Dict[Tuple[str, str], List[ResolvedReference]] = {}
    for ref in refs:
        if ref.child != ref.parent:
            grouped.setdefault((ref.child, ref.parent), []).append(ref)

    def rank(ref: ResolvedReference) -> Tuple[int, int, str]:
        tier = EVIDENCE_TIER[ref.evidence_source]
        priority = EDGE_TYPE_PRIORITY[_effective_type(ref)]
        return (tier, priority, ref.evidence_source.value) if tier_first else (priority, tier, ref.evidence_source.value)

    edges = []
    for (child, parent), candidates in grouped.items():
        derivations = [ref for ref in candidates if ref.suggested_type is not EdgeType.DATASET]
        best = min(derivations or candidates, key=rank)
        edges.append(DerivationEdge(child, parent, _effective_type(best), best.evidence_source))
    return sorted(edges, key=DerivationEdge.sort_key)


def _org(repo_id: str) -> str:
    return repo_id.rpartition("/")[0].casefold()


def filter_noise(
    edges: Iterable[DerivationEdge],
    universe: UniverseIndex,
    refs: Sequence[ResolvedReference] = (),
    family_fn: Optional[Callable[[str], Family]] = None,
) -> List[DerivationEdge]:
    """
    Remove noisy edges.

    - dataset edges, self-loops and edges leaving the universe are dropped
    - a child with several quantization parents keeps only the parent with
      the highest normalized string similarity (ties to the lower ID)
    - an edge supported only by a bare README link found in list context
      (a list item or a line linking several models) is dropped when the
      parent is a sibling: same organization or same model family

    Args:
        edges: Typed edges
        universe: Universe index
        refs: Resolved references the edges were typed from, for list context
        family_fn: Family assignment used for the sibling test
    """
    family_fn = family_fn or assign_family
    list_pairs = {(ref.child, ref.parent) for ref in refs if ref.list_context}
    kept = [
        edge
        for edge in edges
        if edge.edge_type is not EdgeType.DATASET
        and edge.child != edge.parent
        and edge.child in universe
        and edge.parent in universe
    ]

    quantized: Dict[str, List[DerivationEdge]] = {}
    for edge in kept:
        if edge.edge_type is EdgeType.QUANTIZATION:
            quantized.setdefault(edge.child, []).append(edge)
    losers = set()
    for child, candidates in quantized.items():
        if len(candidates) > 1:
            best = min(candidates, key=lambda e: (-similarity(child, e.parent), e.parent))
            losers.update(edge for edge in candidates if edge is not best)

    def sibling(child: str, parent: str) -> bool:
        if _org(child) and _org(child) == _org(parent):
            return True
        family = family_fn(child)
        return family is not Family.OTHER and family is family_fn(parent)

    result = []
    for edge in kept:
        if edge in losers:
            continue
        if (
            edge.evidence_source is EvidenceSource.README_LINK
            and (edge.child, edge.parent) in list_pairs
            and sibling(edge.child, edge.parent)
        ):
            logger.debug(f"Dropped list-context sibling link {edge.child} -> {edge.parent}")
            continue
        result.append(edge)
    return sorted(result, key=DerivationEdge.sort_key)


class CardParser:
    """
    Parser for repository metadata layers.

    Regular expressions are compiled once from the card vocabulary; the
    parser holds no per-repository state and can be shared across threads.
    """

    def __init__(self, vocabulary: CardVocabulary, config: Optional[ParserConfig] = None):
        self.vocabulary = vocabulary
        self.config = config or ParserConfig()
        self._tag_ops = {op.casefold(): EdgeType(value) for op, value in vocabulary.tag_operations.items()}
        self._prose_types = {self._phrase_key(p): EdgeType(t) for p, t in vocabulary.prose_patterns.items()}
        phrases = sorted(vocabulary.prose_patterns, key=lambda p: (-len(p), p))
        self._prose = re.compile(
            r"(?<!\w)(?:" + "|".join(re.escape(p).replace(r"\ ", r"\s+") for p in phrases) + r")(?!\w)",
            re.IGNORECASE,
        )
        self._table_keywords = [(k.casefold(), EdgeType(t)) for k, t in vocabulary.table_keywords.items()]
        self._benchmark = re.compile(
            r"(?<![a-z0-9])(?:" + "|".join(re.escape(h.casefold()) for h in vocabulary.benchmark_headers) + r")(?![a-z0-9])"
        )
        self._merge_prose = re.compile(
            r"(?<!\w)(?:" + "|".join(re.escape(w) for w in vocabulary.merge_prose) + r")(?!\w)", re.IGNORECASE
        )
        self._merge_tags = {tag.casefold() for tag in vocabulary.merge_tags}
        self._quant_suffixes = sorted(vocabulary.quantization_suffixes, key=lambda s: (-len(s), s))
        self._dataset_markers = [marker.casefold() for marker in vocabulary.dataset_url_markers]

    @staticmethod
    def _phrase_key(phrase: str) -> str:
        return " ".join(phrase.casefold().split())

    def build_universe(self, ids: Iterable[str]) -> UniverseIndex:
        return UniverseIndex.from_vocabulary(ids, self.vocabulary)

    def family(self, repo_id: str) -> Family:
        return assign_family(repo_id, self.vocabulary.family_orgs, self.vocabulary.family_substrings)

    # Structured layer

    @staticmethod
    def load_front_matter(text: str) -> Tuple[Dict[str, Any], Optional[str]]:
        """Parse YAML front matter; returns ({}, message) when it is malformed."""
        if not text or not text.strip():
            return {}, None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            return {}, f"malformed YAML: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}"
        if data is None:
            return {}, None
        if not isinstance(data, dict):
            return {}, "front matter is not a mapping"
        return data, None

    def front_matter(self, record: RepositoryRecord) -> Tuple[Dict[str, Any], Optional[str]]:
        """YAML metadata from `yaml_text`, or from a fenced block atop the README."""
        text = record.yaml_text
        if not text.strip():
            text = split_front_matter(record.readme_text)[0] or ""
        return self.load_front_matter(text)

    def _structured(
        self, repo_id: str, data: Dict[str, Any], tags: Sequence[str]
    ) -> Tuple[List[RawReference], Set[MergeSignal]]:
        refs: List[RawReference] = []
        signals: Set[MergeSignal] = set()

        relation = data.get("base_model_relation")
        relation_type = self._tag_ops.get(relation.casefold()) if isinstance(relation, str) else None
        for key in ("base_model", "base_models"):
            for target in _as_list(data.get(key)):
                refs.append(RawReference(repo_id, target.strip(), EvidenceSource.YAML_FIELD, relation_type))
        for target in _as_list(data.get("datasets")):
            refs.append(RawReference(repo_id, target.strip(), EvidenceSource.YAML_FIELD, EdgeType.DATASET))
        if any(key in data for key in self.vocabulary.merge_yaml_keys):
            signals.add(MergeSignal.MERGE_YAML)
        if relation_type is EdgeType.MERGE:
            signals.add(MergeSignal.MERGE_TAG)

        for tag in tags:
            parts = tag.strip().split(":")
            head = parts[0].casefold()
            if head == "base_model" and len(parts) >= 2:
                if len(parts) == 2:
                    operation, target = None, parts[1]
                else:
                    operation, target = parts[1], ":".join(parts[2:])
                edge_type = self._tag_ops.get(operation.casefold()) if operation else None
                if target.strip():
                    refs.append(RawReference(repo_id, target.strip(), EvidenceSource.TAG, edge_type))
                if edge_type is EdgeType.MERGE:
                    signals.add(MergeSignal.MERGE_TAG)
            elif head == "dataset" and len(parts) >= 2 and ":".join(parts[1:]).strip():
                refs.append(RawReference(repo_id, ":".join(parts[1:]).strip(), EvidenceSource.TAG, EdgeType.DATASET))
            elif tag.strip().casefold() in self._merge_tags:
                signals.add(MergeSignal.MERGE_TAG)
        return refs, signals

    def parse_structured(self, yaml_frontmatter: str, tags: Sequence[str], source_repo: str = "") -> List[RawReference]:
        """
        References from YAML front matter and tags.

        Malformed YAML degrades to tag-only extraction with a logged warning.
        """
        data, problem = self.load_front_matter(yaml_frontmatter)
        if problem:
            logger.warning(f"{source_repo or '<record>'}: {problem}; using tags only")
        refs, _ = self._structured(source_repo, data, tags or [])
        return refs

    # README layer

    def _url_target(self, url: str) -> Tuple[Optional[str], bool]:
        """(identifier, is_dataset) for a Hugging Face URL; (None, False) otherwise."""
        match = _HF_PATH.match(url)
        if match is None:
            return None, False
        parts = [part for part in match.group(1).split("/") if part]
        folded = url.casefold()
        if any(marker in folded for marker in self._dataset_markers):
            if parts and parts[0].casefold() == "datasets" and len(parts) >= 3:
                return f"{parts[1]}/{parts[2]}", True
            return None, False
        if len(parts) < 2 or parts[0].casefold() in _RESERVED_PATHS:
            return None, False
        return f"{parts[0]}/{parts[1]}", False

    def _link_targets(self, line: str) -> List[Tuple[int, str, bool]]:
        """(position, identifier, is_dataset) for every model/dataset hyperlink on a line."""
        found: List[Tuple[int, str, bool]] = []
        spans = []
        for match in _LINK.finditer(line):
            spans.append(match.span())
            target, is_dataset = self._url_target(match.group(2))
            if target:
                found.append((match.start(), target, is_dataset))
        for match in _BARE_URL.finditer(line):
            if any(start <= match.start() < end for start, end in spans):
                continue
            target, is_dataset = self._url_target(match.group(0))
            if target:
                found.append((match.start(), target, is_dataset))
        return sorted(found)

    def _first_target(self, line: str, start: int, end: int) -> Optional[str]:
        segment = line[start:end]
        candidates: List[Tuple[int, str]] = []
        for match in _LINK.finditer(segment):
            target, is_dataset = self._url_target(match.group(2))
            if target is None and not is_dataset:
                text = match.group(1).strip().strip("`*_ ")
                target = text if _FULL_ID.match(text) else None
            if target and not is_dataset:
                candidates.append((match.start(), target))
        for match in _BARE_URL.finditer(segment):
            target, is_dataset = self._url_target(match.group(0))
            if target and not is_dataset:
                candidates.append((match.start(), target))
        for match in _ID.finditer(segment):
            candidates.append((match.start(), match.group(1)))
        return min(candidates)[1] if candidates else None

    @staticmethod
    def _is_self(target: str, self_id: str) -> bool:
        return target.strip().casefold() == self_id.casefold()

    def _line_refs(self, line: str, self_id: str) -> List[RawReference]:
        refs: List[RawReference] = []
        matches = list(self._prose.finditer(line))
        for index, match in enumerate(matches):
            limit = matches[index + 1].start() if index + 1 < len(matches) else len(line)
            target = self._first_target(line, match.end(), limit)
            if target and not self._is_self(target, self_id):
                edge_type = self._prose_types[self._phrase_key(match.group(0))]
                refs.append(RawReference(self_id, target, EvidenceSource.README_PROSE, edge_type))

        links = self._link_targets(line)
        models = {target.casefold() for _, target, is_dataset in links if not is_dataset and not self._is_self(target, self_id)}
        list_context = bool(_LIST_ITEM.match(line)) or len(models) >= 2
        for _, target, is_dataset in links:
            if is_dataset:
                refs.append(RawReference(self_id, target, EvidenceSource.README_LINK, EdgeType.DATASET))
            elif not self._is_self(target, self_id):
                refs.append(RawReference(self_id, target, EvidenceSource.README_LINK, None, list_context))
        return refs

    @staticmethod
    def _cells(row: str) -> List[str]:
        text = row.strip()
        if text.startswith("|"):
            text = text[1:]
        if text.endswith("|"):
            text = text[:-1]
        return [cell.strip() for cell in text.split("|")]

    def _cell_targets(self, cell: str) -> List[str]:
        targets = [target for _, target, is_dataset in self._link_targets(cell) if not is_dataset]
        if targets:
            return targets
        plain = _LINK.sub(lambda m: m.group(1), cell).strip().strip("`*_ ")
        return [plain] if _FULL_ID.match(plain) else []

    def _keyword_types(self, text: str) -> List[EdgeType]:
        folded = text.casefold()
        return [edge_type for keyword, edge_type in self._table_keywords if keyword in folded]

    def _table_refs(self, rows: Sequence[str], self_id: str) -> List[RawReference]:
        cells = [self._cells(row) for row in rows]
        if len(cells) < 2 or not all(_SEPARATOR_CELL.match(cell.replace(" ", "")) for cell in cells[1]):
            return []
        header = cells[0]
        if any(self._benchmark.search(cell.casefold()) for cell in header):
            return []

        self_folded = self_id.casefold()
        self_name = self_id.rpartition("/")[2].casefold()
        refs: List[RawReference] = []
        for row in cells[2:]:
            targets = [self._cell_targets(cell) for cell in row]
            plain = [_LINK.sub(lambda m: m.group(1), cell).strip().strip("`*_ ").casefold() for cell in row]
            self_cells = [
                any(self._is_self(t, self_id) for t in cell_targets) or text in (self_folded, self_name)
                for cell_targets, text in zip(targets, plain)
            ]
            if not any(self_cells):
                continue
            row_types = [
                edge_type
                for cell, cell_targets, is_self in zip(row, targets, self_cells)
                if not cell_targets and not is_self
                for edge_type in self._keyword_types(cell)
            ]
            for column, cell_targets in enumerate(targets):
                column_types = self._keyword_types(header[column]) if column < len(header) else []
                candidates = row_types + column_types
                edge_type = min(candidates, key=EDGE_TYPE_PRIORITY.__getitem__) if candidates else None
                for target in cell_targets:
                    if not self._is_self(target, self_id):
                        refs.append(RawReference(self_id, target, EvidenceSource.README_TABLE, edge_type))
        return refs

    def _readme(self, markdown: str, self_id: str) -> Tuple[List[RawReference], Set[MergeSignal]]:
        _, body = split_front_matter(markdown or "")
        lines = body.splitlines()
        refs: List[RawReference] = []
        in_fence = False
        index = 0
        while index < len(lines):
            line = lines[index]
            if _FENCE.match(line):
                in_fence = not in_fence
                index += 1
                continue
            if in_fence:
                index += 1
                continue
            if line.strip().startswith("|"):
                end = index
                while end < len(lines) and lines[end].strip().startswith("|"):
                    end += 1
                if self.config.parse_tables:
                    refs.extend(self._table_refs(lines[index:end], self_id))
                index = end
                continue
            refs.extend(self._line_refs(line, self_id))
            index += 1

        signals = {MergeSignal.README_MENTION} if self._merge_prose.search(body) else set()
        return refs, signals

    def parse_readme(self, markdown: str, self_id: str) -> List[RawReference]:
        """
        References from README prose, hyperlinks and derivation tables.

        Table rows count only when they name `self_id`; tables whose header
        uses benchmark vocabulary are skipped. Fenced code blocks are ignored.
        """
        refs, _ = self._readme(markdown, self_id)
        return refs

    # Name-pattern layer

    def name_pattern_refs(self, repo_id: str, universe: UniverseIndex) -> List[RawReference]:
        """Quantization candidate toward the suffix-stripped name, when it resolves."""
        org, _, name = repo_id.rpartition("/")
        for suffix in self._quant_suffixes:
            if name.casefold().endswith(suffix.casefold()) and len(name) > len(suffix):
                stem = name[: -len(suffix)]
                resolved = universe.resolve(f"{org}/{stem}" if org else stem)
                if resolved and resolved != repo_id:
                    return [RawReference(repo_id, resolved, EvidenceSource.NAME_PATTERN, EdgeType.QUANTIZATION)]
                return []
        return []

    # Whole-record extraction

    def licence_names(self, record: RepositoryRecord, data: Optional[Dict[str, Any]] = None) -> List[str]:
        """Declared licence names from `license:` tags, the YAML `license` field and the record."""
        if data is None:
            data, _ = self.front_matter(record)
        names: List[str] = []
        for tag in record.tags:
            head, _, value = tag.partition(":")
            if head.strip().casefold() == "license" and value.strip():
                names.append(value.strip())
        names.extend(name.strip() for name in _as_list(data.get("license")))
        names.extend(name.strip() for name in _as_list(record.license))
        seen: Set[str] = set()
        unique = []
        for name in names:
            if name.casefold() not in seen:
                seen.add(name.casefold())
                unique.append(name)
        return unique

    def extract(self, record: RepositoryRecord, universe: UniverseIndex) -> CardExtraction:
        """Parse, resolve, type and filter one repository."""
        repo_id = record.repo_id
        warnings: List[ParseWarning] = []
        data, problem = self.front_matter(record)
        if problem:
            warnings.append(ParseWarning(repo_id, "yaml", problem))
            logger.warning(f"{repo_id}: {problem}; using tags only")

        structured, structured_signals = self._structured(repo_id, data, record.tags)
        readme, readme_signals = self._readme(record.readme_text, repo_id)
        references = structured + readme + self.name_pattern_refs(repo_id, universe)

        resolved = []
        for ref in references:
            parent = universe.resolve(ref.target_string)
            if parent is not None:
                resolved.append(
                    ResolvedReference(repo_id, parent, ref.evidence_source, ref.suggested_type, ref.list_context)
                )
        edges = type_edges(resolved, self.config.tier_first)
        edges = filter_noise(edges, universe, resolved if self.config.sibling_filter else (), self.family)
        return CardExtraction(
            repo_id=repo_id,
            edges=edges,
            references=references,
            resolved=resolved,
            merge_signals=structured_signals | readme_signals,
            licence_names=self.licence_names(record, data),
            warnings=warnings,
        )

    def _extract_batch(self, records: Sequence[RepositoryRecord], universe: UniverseIndex) -> List[CardExtraction]:
        return [self.extract(record, universe) for record in records]

    def extract_all(
        self,
        records: Sequence[RepositoryRecord],
        universe: Optional[UniverseIndex] = None,
        n_jobs: int = 1,
    ) -> List[CardExtraction]:
        """
        Extract every record against a shared read-only universe.

        Args:
            records: Repository records
            universe: Universe index; built from the record IDs if omitted
            n_jobs: joblib workers

        Returns:
            Extractions in input order
        """
        if not records:
            return []
        if universe is None:
            universe = self.build_universe(record.repo_id for record in records)
        batches = [b for b in np.array_split(np.arange(len(records)), min(len(records), 16)) if len(b)]
        results = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(self._extract_batch)([records[i] for i in batch], universe) for batch in batches
        )
        extractions = [extraction for batch in results for extraction in batch]
        logger.info(
            f"Parsed {len(extractions)} repositories: {sum(len(e.edges) for e in extractions)} edges, "
            f"{sum(len(e.warnings) for e in extractions)} warning(s)"
        )
        return extractions
