"""
Restriction Classifier

Rule-scored detection of ethical-use restriction evidence in licence text.

Scoring layers (all on normalized text):
- Restriction frames define sentence-level restriction context
- Section hints at the start of a line open a fixed-size context window
- Policy references, hard and soft harm domains and brand context add
  capped per-class scores; harm domains only count inside a context
- Exclusion phrases suppress brand-only evidence

Usage:
    classifier = RestrictionClassifier(load_rule_set().classifier)
    score = classifier.score_text("you must not use this model for military purposes")
    classify_restrictive(score)  # True
"""

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Pattern, Sequence, Tuple

from pydantic import BaseModel, Field

from ..errors import MissingEvidenceError
from .rules import ClassifierRules, ClassWeights, load_rule_set

__all__ = [
    "ClassifierConfig",
    "LicenceSource",
    "LicenceEvidence",
    "RestrictionScore",
    "RestrictionClassifier",
    "normalize_licence_text",
    "score_restriction",
    "classify_restrictive",
    "build_evidence",
    "get_classifier",
]

POLICY_REFERENCE = "policy_reference"
HARD_DOMAIN = "hard_domain"
SOFT_DOMAIN = "soft_domain"
BRAND_CONTEXT = "brand_context"
RESTRICTION_FRAME = "restriction_frame"
SECTION_HINT = "section_hint"
EXCLUSION = "exclusion"

SCORING_CLASSES = (POLICY_REFERENCE, HARD_DOMAIN, SOFT_DOMAIN, BRAND_CONTEXT)

_QUOTES = str.maketrans({
    "\u2018": "'", "\u2019": "'", "\u201a": "'", "\u201b": "'", "\u2032": "'",
    "\u201c": '"', "\u201d": '"', "\u201e": '"', "\u201f": '"', "\u2033": '"',
    "\u2010": "-", "\u2011": "-", "\u2012": "-", "\u2013": "-", "\u2014": "-",
    "\u2015": "-", "\u2212": "-", "\ufe58": "-", "\ufe63": "-",
})
_LINE_BREAKS = re.compile(r"\r\n?|[\u2028\u2029\x0b\x0c\x85\x1c\x1d\x1e]")
_HORIZONTAL_SPACE = re.compile(r"[^\S\n]+")
_SENTENCE = re.compile(r"[^.;\n]+")
_HEADING_PREFIX = r"^(?:#+\s*)?(?:section\s+)?(?:\d+(?:\.\d+)*[.)]?\s*)?(?:\*\*)?"


class LicenceSource(Enum):
    """Level of the three-level licence evidence collection."""
    OWN_FILE = "own_file"
    CANONICAL_TEMPLATE = "canonical_template"
    NAME_ONLY = "name_only"
    ABSENT = "absent"


@dataclass(frozen=True)
class LicenceEvidence:
    """Licence evidence collected for one repository."""
    source: LicenceSource
    licence_names: Tuple[str, ...] = ()
    full_text: Optional[str] = None

    def __post_init__(self):
        has_text = bool(self.full_text)
        if self.source is LicenceSource.ABSENT and (self.licence_names or has_text):
            raise ValueError("absent evidence cannot carry names or text")
        if self.source is not LicenceSource.ABSENT and not (self.licence_names or has_text):
            raise ValueError(f"{self.source.value} evidence needs names or text")
        if self.source is LicenceSource.OWN_FILE and not has_text:
            raise ValueError("own_file evidence requires full_text")


@dataclass
class RestrictionScore:
    """Additive restriction score with per-class breakdown."""
    total: float
    components: Dict[str, float]
    matched_rules: List[Tuple[str, str, int]] = field(default_factory=list)


def _normalize_once(text: str) -> str:
    text = unicodedata.normalize("NFKC", text).translate(_QUOTES).lower()
    text = _LINE_BREAKS.sub("\n", text)
    text = _HORIZONTAL_SPACE.sub(" ", text)
    lines = (line.strip() for line in text.split("\n"))
    return "\n".join(line for line in lines if line)


def normalize_licence_text(raw: str) -> str:
    """
    Normalize licence text for pattern matching.

    Applies NFKC, straightens quotes and dashes, lowercases, collapses
    horizontal whitespace, strips lines and drops blank lines.

    Args:
        raw: Licence text

    Returns:
        Normalized text; normalizing it again returns it unchanged
    """
    text = raw
    for _ in range(5):
        normalized = _normalize_once(text)
        if normalized == text:
            break
        text = normalized
    return text


def _pattern_body(pattern: str) -> str:
    words = normalize_licence_text(pattern).split()
    return r"[\s\-]+".join(re.escape(word) for word in words)


def _compile(patterns: Iterable[str]) -> List[Tuple[str, Pattern[str]]]:
    compiled = []
    for pattern in patterns:
        body = _pattern_body(pattern)
        if body:
            compiled.append((pattern, re.compile(rf"(?<!\w){body}(?:s)?(?!\w)")))
    return compiled


def _class_score(weights: ClassWeights, hits: int) -> float:
    if hits <= 0:
        return 0.0
    if weights.first_hit:
        raw = weights.first_hit + weights.per_additional * (hits - 1)
    else:
        raw = weights.per_hit * hits
    return min(raw, weights.cap)


@dataclass(frozen=True)
class _Hit:
    rule_class: str
    pattern: str
    start: int
    end: int


class RestrictionClassifier:
    """
    Scores licence text against a compiled pattern inventory.

    Instances are immutable after construction and safe to share across
    worker threads.
    """

    def __init__(self, rules: ClassifierRules):
        """
        Compile the rule table.

        Args:
            rules: Classifier rule table
        """
        self.rules = rules
        self.threshold = rules.threshold
        self.context_window = rules.context_window
        self._frames = _compile(rules.restriction_frames)
        self._context_terms = _compile(rules.brand_context)
        self._exclusions = _compile(rules.exclusions)
        self._scoring = {
            POLICY_REFERENCE: _compile(rules.policy_references),
            HARD_DOMAIN: _compile(rules.hard_domains),
            SOFT_DOMAIN: _compile(rules.soft_domains),
            BRAND_CONTEXT: _compile(rules.brands),
        }
        self._hints = []
        for pattern in rules.section_hints:
            body = _pattern_body(pattern)
            if body:
                regex = re.compile(rf"{_HEADING_PREFIX}(?P<hint>{body})(?:s)?(?!\w)", re.MULTILINE)
                self._hints.append((pattern, regex))

    @staticmethod
    def _find(text: str, rule_class: str, compiled) -> List[_Hit]:
        return [
            _Hit(rule_class, pattern, m.start(), m.end())
            for pattern, regex in compiled
            for m in regex.finditer(text)
        ]

    @staticmethod
    def _deoverlap(hits: Sequence[_Hit]) -> List[_Hit]:
        accepted: List[_Hit] = []
        order = {name: rank for rank, name in enumerate(SCORING_CLASSES)}
        for hit in sorted(hits, key=lambda h: (-(h.end - h.start), h.start, order[h.rule_class])):
            if all(hit.end <= other.start or hit.start >= other.end for other in accepted):
                accepted.append(hit)
        return accepted

    def score_text(self, raw_text: str) -> RestrictionScore:
        """
        Score a licence text.

        Args:
            raw_text: Licence text (normalized internally)

        Returns:
            RestrictionScore with offsets into the normalized text
        """
        text = normalize_licence_text(raw_text)
        sentences = [(m.start(), m.end()) for m in _SENTENCE.finditer(text)]

        frame_hits = self._find(text, RESTRICTION_FRAME, self._frames)
        frame_sentences = [
            (start, end) for start, end in sentences
            if any(start <= hit.start and hit.end <= end for hit in frame_hits)
        ]

        hint_hits: List[_Hit] = []
        windows: List[Tuple[int, int]] = []
        for pattern, regex in self._hints:
            for m in regex.finditer(text):
                hint_hits.append(_Hit(SECTION_HINT, pattern, m.start("hint"), m.end("hint")))
                windows.append((m.start("hint"), m.end("hint") + self.context_window))

        def in_context(hit: _Hit) -> bool:
            if any(start <= hit.start and hit.end <= end for start, end in frame_sentences):
                return True
            return any(start <= hit.start < end for start, end in windows)

        def sentence_of(offset: int) -> Optional[Tuple[int, int]]:
            for start, end in sentences:
                if start <= offset < end:
                    return (start, end)
            return None

        candidates = []
        for rule_class, compiled in self._scoring.items():
            candidates.extend(self._find(text, rule_class, compiled))
        hits = self._deoverlap(candidates)

        exclusion_hits = self._find(text, EXCLUSION, self._exclusions)
        context_hits = self._find(text, "context", self._context_terms)

        contributing: List[_Hit] = []
        for hit in hits:
            if hit.rule_class in (HARD_DOMAIN, SOFT_DOMAIN):
                if in_context(hit):
                    contributing.append(hit)
            elif hit.rule_class == BRAND_CONTEXT:
                if exclusion_hits:
                    continue
                span = sentence_of(hit.start)
                if span and any(span[0] <= c.start and c.end <= span[1] for c in context_hits):
                    contributing.append(hit)
            else:
                contributing.append(hit)

        weights = self.rules.weights
        components: Dict[str, float] = {}
        for rule_class in SCORING_CLASSES:
            distinct = {hit.pattern for hit in contributing if hit.rule_class == rule_class}
            components[rule_class] = _class_score(weights[rule_class], len(distinct))

        reported = contributing + frame_hits + hint_hits + exclusion_hits
        matched = sorted(
            ((hit.rule_class, hit.pattern, hit.start) for hit in reported),
            key=lambda item: (item[2], item[0], item[1]),
        )
        return RestrictionScore(
            total=float(sum(components.values())),
            components=components,
            matched_rules=matched,
        )

    def score(self, evidence: LicenceEvidence) -> RestrictionScore:
        """
        Score licence evidence.

        Raises:
            MissingEvidenceError: evidence carries no text to score
        """
        if evidence.source is LicenceSource.ABSENT or not evidence.full_text:
            raise MissingEvidenceError(f"no licence text to score ({evidence.source.value})")
        return self.score_text(evidence.full_text)


class ClassifierConfig(BaseModel):
    """Threshold settings of the classify stage."""
    threshold: Optional[float] = Field(default=None, ge=0.0, description="Overrides the rule-table threshold")
    strict_threshold: bool = Field(default=False, description="Require a score strictly above the threshold")


_classifier: Optional[RestrictionClassifier] = None


def get_classifier() -> RestrictionClassifier:
    """Return a classifier over the default rule tables."""
    global _classifier
    if _classifier is None:
        _classifier = RestrictionClassifier(load_rule_set().classifier)
    return _classifier


def score_restriction(
    evidence: LicenceEvidence,
    classifier: Optional[RestrictionClassifier] = None,
) -> RestrictionScore:
    """Score evidence with the given classifier, or the default one."""
    return (classifier or get_classifier()).score(evidence)


def classify_restrictive(
    score: RestrictionScore,
    threshold: float = 1.0,
    strict_threshold: bool = False,
) -> bool:
    """
    Decide whether a score flags ethical-use restriction evidence.

    Args:
        score: Restriction score
        threshold: Classification threshold
        strict_threshold: Use `>` instead of `>=`
    """
    if strict_threshold:
        return score.total > threshold
    return score.total >= threshold


def build_evidence(
    licence_names: Iterable[str],
    licence_text: Optional[str],
    templates: Dict[str, str],
) -> LicenceEvidence:
    """
    Collect licence evidence in three levels.

    Own licence text wins; otherwise the first name with a canonical
    template substitutes the template text; otherwise names alone.

    Args:
        licence_names: Declared licence identifiers
        licence_text: Repository's own licence text, if any
        templates: Canonical template texts keyed by case-folded name

    Returns:
        LicenceEvidence
    """
    names: List[str] = []
    for name in licence_names:
        cleaned = (name or "").strip()
        if cleaned and cleaned not in names:
            names.append(cleaned)

    if licence_text and licence_text.strip():
        return LicenceEvidence(LicenceSource.OWN_FILE, tuple(names), licence_text)

    folded = {key.casefold(): text for key, text in templates.items()}
    for name in names:
        template = folded.get(name.casefold())
        if template:
            return LicenceEvidence(LicenceSource.CANONICAL_TEMPLATE, tuple(names), template)

    if names:
        return LicenceEvidence(LicenceSource.NAME_ONLY, tuple(names))
    return LicenceEvidence(LicenceSource.ABSENT)
