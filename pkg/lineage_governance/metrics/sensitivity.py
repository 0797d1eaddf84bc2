"""Robustness sweep of the governance horizon over audit policy parameters."""

from itertools import product
from typing import Dict, Mapping, Sequence

import pandas as pd
from joblib import Parallel, delayed

from ..core.audit import (
    AuditConfig,
    Reconciliation,
    UpstreamMissingPolicy,
    assign_states,
    state_composition,
)
from ..core.graph import CondensedDag
from .horizon import auditable_proportion, governance_horizon

__all__ = ["sensitivity_sweep", "SWEEP_COLUMNS"]

SWEEP_COLUMNS = [
    "tau",
    "reconciliation",
    "upstream_missing",
    "h_star",
    "censored",
    "report_hop",
    "d_report",
]


def _evaluate(dag: CondensedDag, hops: Mapping[str, int], cfg: AuditConfig, report_hop: int) -> Dict[str, object]:
    result = assign_states(dag, cfg)
    composition = state_composition(result.node_states(dag), hops, cfg.max_hop)
    d = auditable_proportion(composition)
    horizon = governance_horizon(d, cfg.alpha, cfg.max_hop)
    d_report = d.value_at(report_hop)
    return {
        "tau": cfg.tau,
        "reconciliation": cfg.reconciliation.value,
        "upstream_missing": cfg.upstream_missing.value,
        "h_star": horizon.h_star,
        "censored": horizon.censored,
        "report_hop": report_hop,
        "d_report": float("nan") if d_report is None else d_report,
    }


def sensitivity_sweep(
    dag: CondensedDag,
    hops: Mapping[str, int],
    taus: Sequence[int] = (1, 2, 3, 4),
    reconciliations: Sequence[Reconciliation] = tuple(Reconciliation),
    policies: Sequence[UpstreamMissingPolicy] = tuple(UpstreamMissingPolicy),
    alpha: float = 0.20,
    max_hop: int = 10,
    report_hop: int = 6,
    n_jobs: int = 1,
) -> pd.DataFrame:
    """
    Evaluate H* and D(report_hop) for every (tau, reconciliation, policy)
    combination; 4 x 3 x 2 = 24 rows by default.

    Args:
        dag: Condensed lineage DAG
        hops: Node hop distances from ethical sources
        taus: Merge-evidence thresholds
        reconciliations: Reconciliation policies
        policies: Upstream-missing propagation policies
        alpha: Horizon threshold
        max_hop: Analysis window
        report_hop: Hop at which D is reported
        n_jobs: joblib workers

    Returns:
        DataFrame with SWEEP_COLUMNS
    """
    configs = [
        AuditConfig(tau=tau, reconciliation=rec, upstream_missing=policy, alpha=alpha, max_hop=max_hop)
        for tau, rec, policy in product(taus, reconciliations, policies)
    ]
    rows = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_evaluate)(dag, hops, cfg, report_hop) for cfg in configs
    )
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)
