"""
Rule Tables

Loads the versioned JSON rule tables used by the classifier, the card parser
and the comparator. A rules directory may override any subset of the shipped
files; files it does not provide fall back to `lineage_governance/data/`.

Resolution order: explicit `rules_dir` argument, then `LINEAGE_RULES_DIR`,
then the shipped tables.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Type, TypeVar

from pydantic import BaseModel, Field, ValidationError

from ..errors import RuleTableError
from ..utils.config import get_settings_manager
from ..utils.logger import get_logger

__all__ = [
    "SCHEMA_VERSION",
    "SHIPPED_RULES_DIR",
    "ClassWeights",
    "ClassifierRules",
    "LriEntry",
    "LriTable",
    "IdentifierList",
    "TemplateTable",
    "CardVocabulary",
    "RuleSet",
    "load_rule_set",
    "resolve_rules_dir",
]

SCHEMA_VERSION = 1
SHIPPED_RULES_DIR = Path(__file__).resolve().parent.parent / "data"

logger = get_logger()


class _VersionedTable(BaseModel):
    schema_version: int = Field(description="Rule table schema version")


class ClassWeights(BaseModel):
    """Score contribution of one rule class."""
    per_hit: float = 0.0
    first_hit: float = 0.0
    per_additional: float = 0.0
    cap: float


class ClassifierRules(_VersionedTable):
    """Pattern inventory and scoring scheme of the restriction classifier."""
    context_window: int = Field(default=800, description="Characters after a section hint")
    threshold: float = Field(default=1.0, description="Restrictive classification threshold")
    restriction_frames: List[str]
    policy_references: List[str]
    section_hints: List[str]
    hard_domains: List[str]
    soft_domains: List[str]
    brands: List[str]
    brand_context: List[str]
    exclusions: List[str]
    weights: Dict[str, ClassWeights]


class LriEntry(BaseModel):
    """One licence restrictiveness index mapping."""
    licence_name: str
    lri: float = Field(ge=0.0, le=1.0)


class LriTable(_VersionedTable):
    entries: List[LriEntry]


class IdentifierList(_VersionedTable):
    identifiers: List[str]


class TemplateTable(_VersionedTable):
    templates: Dict[str, str]


class CardVocabulary(_VersionedTable):
    """Vocabulary used by the card parser."""
    tag_operations: Dict[str, str]
    prose_patterns: Dict[str, str]
    table_keywords: Dict[str, str]
    benchmark_headers: List[str]
    quantization_suffixes: List[str]
    version_suffixes: List[str]
    official_orgs: List[str]
    family_orgs: Dict[str, str]
    family_substrings: Dict[str, str]
    merge_tags: List[str]
    merge_yaml_keys: List[str]
    merge_prose: List[str]
    dataset_url_markers: List[str]


T = TypeVar("T", bound=_VersionedTable)

_TABLE_FILES = {
    "classifier": ("classifier_rules.json", ClassifierRules),
    "lri": ("lri_table.json", LriTable),
    "permissive": ("permissive_licences.json", IdentifierList),
    "passthrough": ("passthrough_licences.json", IdentifierList),
    "templates": ("licence_templates.json", TemplateTable),
    "vocabulary": ("card_vocabulary.json", CardVocabulary),
}


@dataclass(frozen=True)
class RuleSet:
    """All rule tables loaded together."""
    classifier: ClassifierRules
    lri: LriTable
    permissive: IdentifierList
    passthrough: IdentifierList
    templates: TemplateTable
    vocabulary: CardVocabulary
    sources: Dict[str, Path]

    @property
    def permissive_set(self) -> frozenset:
        """Permissive identifiers, case-folded."""
        return frozenset(name.casefold() for name in self.permissive.identifiers)

    @property
    def passthrough_set(self) -> frozenset:
        """Passthrough-restrictive identifiers, case-folded."""
        return frozenset(name.casefold() for name in self.passthrough.identifiers)


def resolve_rules_dir(rules_dir: Optional[Path] = None) -> Optional[Path]:
    """Return the override directory in effect, if any."""
    if rules_dir is not None:
        return Path(rules_dir)
    return get_settings_manager().get_settings().rules_dir


def _load_table(path: Path, model: Type[T]) -> T:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise RuleTableError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e
    except OSError as e:
        raise RuleTableError(f"{path}: cannot read rule table: {e}") from e

    version = raw.get("schema_version") if isinstance(raw, dict) else None
    if version != SCHEMA_VERSION:
        raise RuleTableError(
            f"{path}: schema_version {version!r} is not supported (expected {SCHEMA_VERSION})"
        )
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise RuleTableError(f"{path}: {e}") from e


def load_rule_set(rules_dir: Optional[Path] = None) -> RuleSet:
    """
    Load every rule table.

    Args:
        rules_dir: Optional directory overriding shipped tables file by file

    Returns:
        RuleSet with the path each table was read from
    """
    override = resolve_rules_dir(rules_dir)
    if override is not None and not override.is_dir():
        raise RuleTableError(f"rules directory does not exist: {override}")

    tables = {}
    sources: Dict[str, Path] = {}
    for key, (filename, model) in _TABLE_FILES.items():
        path = SHIPPED_RULES_DIR / filename
        if override is not None and (override / filename).is_file():
            path = override / filename
            logger.debug(f"Rule table {filename} overridden from {override}")
        tables[key] = _load_table(path, model)
        sources[key] = path

    return RuleSet(sources=sources, **tables)
