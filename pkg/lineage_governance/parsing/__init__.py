"""Model-card parsing: reference extraction, entity resolution, edge typing and noise filtering."""

from .card_parser import (
    CardExtraction,
    CardParser,
    ParserConfig,
    filter_noise,
    split_front_matter,
    type_edges,
)
from .records import ParseWarning, RawReference, RepositoryRecord, ResolvedReference
from .resolver import UniverseIndex, clean_target, levenshtein, resolve_entity, similarity, strip_suffixes

__all__ = [
    "CardExtraction",
    "CardParser",
    "ParseWarning",
    "ParserConfig",
    "RawReference",
    "RepositoryRecord",
    "ResolvedReference",
    "UniverseIndex",
    "clean_target",
    "filter_noise",
    "levenshtein",
    "resolve_entity",
    "similarity",
    "split_front_matter",
    "strip_suffixes",
    "type_edges",
]
