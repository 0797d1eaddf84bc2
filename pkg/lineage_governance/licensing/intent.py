"""Licence intent assignment and per-record licence classification."""

from dataclasses import dataclass
from typing import AbstractSet, Iterable, Optional

from ..core.models import Intent
from .classifier import (
    LicenceEvidence,
    LicenceSource,
    RestrictionClassifier,
    RestrictionScore,
    build_evidence,
    classify_restrictive,
    get_classifier,
)
from .rules import RuleSet

__all__ = ["LicenceClassification", "assign_intent", "classify_licence", "is_passthrough"]


@dataclass
class LicenceClassification:
    """Outcome of classifying one repository's licence evidence."""
    evidence: LicenceEvidence
    intent: Intent
    score: Optional[RestrictionScore]
    passthrough: bool


def _matches(names: Iterable[str], identifiers: AbstractSet[str]) -> bool:
    folded = {identifier.casefold() for identifier in identifiers}
    return any(name.strip().casefold() in folded for name in names)


def is_passthrough(licence_names: Iterable[str], passthrough_list: AbstractSet[str]) -> bool:
    """True if any licence name is a passthrough-restrictive (OpenRAIL-family) licence."""
    return _matches(licence_names, passthrough_list)


def assign_intent(
    evidence: LicenceEvidence,
    permissive_list: AbstractSet[str],
    classifier: Optional[RestrictionClassifier] = None,
    strict_threshold: bool = False,
) -> Intent:
    """
    Assign tri-valued intent, evaluated R then P then U.

    Args:
        evidence: Licence evidence
        permissive_list: Recognized permissive identifiers (case-insensitive)
        classifier: Classifier to score text with; default rule tables if omitted
        strict_threshold: Use `>` for the restrictive threshold

    Returns:
        Intent
    """
    intent, _ = _resolve(evidence, permissive_list, classifier, strict_threshold)
    return intent


def _resolve(evidence, permissive_list, classifier, strict_threshold):
    score = None
    if evidence.source is not LicenceSource.ABSENT and evidence.full_text:
        classifier = classifier or get_classifier()
        score = classifier.score(evidence)
        if classify_restrictive(score, classifier.threshold, strict_threshold):
            return Intent.RESTRICTIVE, score
    if evidence.licence_names and _matches(evidence.licence_names, permissive_list):
        return Intent.PERMISSIVE, score
    return Intent.UNKNOWN, score


def classify_licence(
    licence_names: Iterable[str],
    licence_text: Optional[str],
    rules: RuleSet,
    classifier: Optional[RestrictionClassifier] = None,
    strict_threshold: bool = False,
) -> LicenceClassification:
    """
    Build evidence for one repository and classify it.

    Args:
        licence_names: Declared licence identifiers
        licence_text: Own licence text, if any
        rules: Loaded rule tables
        classifier: Optional pre-built classifier over `rules.classifier`
        strict_threshold: Use `>` for the restrictive threshold
    """
    names = list(licence_names)
    evidence = build_evidence(names, licence_text, rules.templates.templates)
    classifier = classifier or RestrictionClassifier(rules.classifier)
    intent, score = _resolve(evidence, rules.permissive_set, classifier, strict_threshold)
    return LicenceClassification(
        evidence=evidence,
        intent=intent,
        score=score,
        passthrough=is_passthrough(names, rules.passthrough_set),
    )
