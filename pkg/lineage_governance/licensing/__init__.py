"""
Licence Intent

Restriction classification, intent assignment and the licence
restrictiveness index.
"""

from .classifier import (
    ClassifierConfig,
    LicenceEvidence,
    LicenceSource,
    RestrictionClassifier,
    RestrictionScore,
    build_evidence,
    classify_restrictive,
    get_classifier,
    normalize_licence_text,
    score_restriction,
)
from .intent import LicenceClassification, assign_intent, classify_licence, is_passthrough
from .lri import LriIndex, lri_lookup
from .rules import LriEntry, RuleSet, load_rule_set

__all__ = [
    "ClassifierConfig",
    "LicenceEvidence",
    "LicenceSource",
    "RestrictionClassifier",
    "RestrictionScore",
    "build_evidence",
    "classify_restrictive",
    "get_classifier",
    "normalize_licence_text",
    "score_restriction",
    "LicenceClassification",
    "assign_intent",
    "classify_licence",
    "is_passthrough",
    "LriIndex",
    "lri_lookup",
    "LriEntry",
    "RuleSet",
    "load_rule_set",
]
