"""
Entity Resolution

Maps raw reference strings onto repository identifiers in the universe:
exact match first, then a case-folded match, then a fuzzy match restricted
to official organizations with quantization/version suffix normalization.
"""

import re
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from ..licensing.rules import CardVocabulary

__all__ = [
    "UniverseIndex",
    "clean_target",
    "levenshtein",
    "resolve_entity",
    "similarity",
    "strip_suffixes",
]

_HF_PREFIX = re.compile(r"^https?://(?:www\.)?huggingface\.co/", re.IGNORECASE)
_TRAILING = ".,;:!?)]}>\"'`*_"


def clean_target(target: str) -> str:
    """Reduce a reference string (bare ID, URL, quoted text) to "org/name" or "name"."""
    text = target.strip().strip("`'\"<>*_ ")
    text = _HF_PREFIX.sub("", text)
    text = re.split(r"[?#\s]", text, maxsplit=1)[0]
    parts = [part for part in text.split("/") if part]
    if not parts:
        return ""
    return "/".join(parts[:2]).rstrip(_TRAILING)


def strip_suffixes(name: str, suffixes: Iterable[str]) -> str:
    """Case-fold `name` and strip known suffixes until none applies."""
    folded = name.casefold()
    ordered = sorted({suffix.casefold() for suffix in suffixes}, key=lambda s: (-len(s), s))
    changed = True
    while changed:
        changed = False
        for suffix in ordered:
            if folded.endswith(suffix) and len(folded) > len(suffix):
                folded = folded[: -len(suffix)]
                changed = True
                break
    return folded


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        curr = [i]
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            curr.append(min(prev[j] + 1, curr[j - 1] + 1, prev[j - 1] + cost))
        prev = curr
    return prev[-1]


def similarity(a: str, b: str) -> float:
    """Normalized Levenshtein similarity on case-folded strings, in [0, 1]."""
    a, b = a.casefold(), b.casefold()
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


class UniverseIndex:
    """
    Read-only index of known repository identifiers.

    Built once in a sequential pass and then shared by parser workers.
    """

    def __init__(
        self,
        ids: Iterable[str],
        official_orgs: Sequence[str] = (),
        suffixes: Sequence[str] = (),
    ):
        self.ids: FrozenSet[str] = frozenset(ids)
        self.official_orgs: Tuple[str, ...] = tuple(official_orgs)
        self.suffixes: Tuple[str, ...] = tuple(suffixes)
        self._folded: Dict[str, str] = {}
        for repo_id in sorted(self.ids):
            self._folded.setdefault(repo_id.casefold(), repo_id)
        self._official_cache: Dict[FrozenSet[str], Tuple[Dict[str, List[str]], Dict[str, List[str]]]] = {}

    @classmethod
    def from_vocabulary(cls, ids: Iterable[str], vocabulary: CardVocabulary) -> "UniverseIndex":
        return cls(
            ids,
            official_orgs=vocabulary.official_orgs,
            suffixes=list(vocabulary.quantization_suffixes) + list(vocabulary.version_suffixes),
        )

    def __contains__(self, repo_id: str) -> bool:
        return repo_id in self.ids

    def __len__(self) -> int:
        return len(self.ids)

    def _official(self, official_orgs: Sequence[str]):
        key = frozenset(org.casefold() for org in official_orgs)
        tables = self._official_cache.get(key)
        if tables is None:
            by_name: Dict[str, List[str]] = {}
            by_stem: Dict[str, List[str]] = {}
            for repo_id in sorted(self.ids):
                org, _, name = repo_id.rpartition("/")
                if org.casefold() not in key:
                    continue
                by_name.setdefault(name.casefold(), []).append(repo_id)
                by_stem.setdefault(strip_suffixes(name, self.suffixes), []).append(repo_id)
            tables = (by_name, by_stem)
            self._official_cache[key] = tables
        return tables

    def resolve(self, target: str, official_orgs: Optional[Sequence[str]] = None) -> Optional[str]:
        """
        Resolve a reference string.

        Returns:
            The matched identifier, or None when unresolved or ambiguous
        """
        cleaned = clean_target(target)
        if not cleaned:
            return None
        if cleaned in self.ids:
            return cleaned
        folded = self._folded.get(cleaned.casefold())
        if folded is not None:
            return folded

        org, _, name = cleaned.rpartition("/")
        by_name, by_stem = self._official(self.official_orgs if official_orgs is None else official_orgs)
        for table, key in ((by_name, name.casefold()), (by_stem, strip_suffixes(name, self.suffixes))):
            candidates = table.get(key, [])
            if org:
                same_org = [c for c in candidates if c.split("/")[0].casefold() == org.casefold()]
                if len(same_org) == 1:
                    return same_org[0]
            if len(candidates) == 1:
                return candidates[0]
        return None


def resolve_entity(
    target_string: str,
    universe: UniverseIndex,
    official_orgs: Optional[Sequence[str]] = None,
) -> Optional[str]:
    """
    Resolve `target_string` against the universe.

    Args:
        target_string: Raw reference text
        universe: Universe index
        official_orgs: Organizations eligible for fuzzy matching; the
            index's own list if omitted

    Returns:
        Identifier, or None (Unresolved)
    """
    return universe.resolve(target_string, official_orgs)
