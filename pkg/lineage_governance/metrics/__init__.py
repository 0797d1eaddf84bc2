"""Horizon metrics: retention, auditable proportion, governance horizon and decay fits."""

from .horizon import (
    DecayFit,
    HopSeries,
    HorizonConfig,
    HorizonEstimate,
    RetentionUnit,
    alpha_sweep,
    auditable_proportion,
    bootstrap_horizon,
    family_curves,
    fit_exponential,
    governance_horizon,
    normal_half_width,
    retention_curve,
)
from .sensitivity import SWEEP_COLUMNS, sensitivity_sweep

__all__ = [
    "DecayFit",
    "HopSeries",
    "HorizonConfig",
    "HorizonEstimate",
    "RetentionUnit",
    "alpha_sweep",
    "auditable_proportion",
    "bootstrap_horizon",
    "family_curves",
    "fit_exponential",
    "governance_horizon",
    "normal_half_width",
    "retention_curve",
    "sensitivity_sweep",
    "SWEEP_COLUMNS",
]
