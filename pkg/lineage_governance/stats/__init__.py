"""Merge-conflict causal estimators and evaluation metrics."""

from .causal import (
    CASE_COLUMNS,
    COVARIATE_NAMES,
    SUMMARY_COLUMNS,
    CaliperScale,
    CausalConfig,
    EffectEstimate,
    Estimator,
    LogisticFit,
    MatchResult,
    MergeCase,
    MergeStatsReport,
    PropensityModel,
    aipw_ate,
    balance_table,
    build_cases,
    cases_frame,
    cases_from_frame,
    covariate_vector,
    fit_logistic,
    fit_propensity,
    ipw_ate,
    match_cases,
    propensity_histogram,
    proportion_difference,
    psm_att,
    raw_difference,
    run_merge_stats,
    smd,
)
from .evaluation import (
    AgreementMetrics,
    ClassificationMetrics,
    Confusion,
    HTMetrics,
    Stratum,
    agreement_metrics,
    classification_metrics,
    confusion_from_labels,
    ht_micro_metrics,
    per_class_metrics,
)

__all__ = [
    "CASE_COLUMNS",
    "COVARIATE_NAMES",
    "SUMMARY_COLUMNS",
    "AgreementMetrics",
    "CaliperScale",
    "CausalConfig",
    "ClassificationMetrics",
    "Confusion",
    "EffectEstimate",
    "Estimator",
    "HTMetrics",
    "LogisticFit",
    "MatchResult",
    "MergeCase",
    "MergeStatsReport",
    "PropensityModel",
    "Stratum",
    "agreement_metrics",
    "aipw_ate",
    "balance_table",
    "build_cases",
    "cases_frame",
    "cases_from_frame",
    "classification_metrics",
    "confusion_from_labels",
    "covariate_vector",
    "fit_logistic",
    "fit_propensity",
    "ht_micro_metrics",
    "ipw_ate",
    "match_cases",
    "per_class_metrics",
    "propensity_histogram",
    "proportion_difference",
    "psm_att",
    "raw_difference",
    "run_merge_stats",
    "smd",
]
