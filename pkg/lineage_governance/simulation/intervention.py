"""
Intervention Simulation

Counterfactual platform interventions that resolve Unknown-intent
components, simulated under Bernoulli enforcement with Monte-Carlo
intervals on the governance horizon.

Designs:
- inherit_strictest: R if any P/R ancestor is R, else P if any is P
- auto_propagate: the unanimous P/R ancestor intent; mixed ancestors
  make the component Undecidable-Ambiguous
- mandatory_declaration: inherited intent when available, else the
  platform default

Usage:
    policy = InterventionPolicy(design="mandatory_declaration", enforcement_rate=0.5)
    result = simulate(dag, policy, AuditConfig())
    print(result.display_mean())
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Mapping, Optional, Sequence, Set

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, Field

from ..core.audit import AuditConfig, AuditStateValue, assign_states
from ..core.graph import CondensedDag, ethical_sources, hop_distances
from ..core.models import Intent
from ..utils.logger import get_logger

__all__ = [
    "InterventionDesign",
    "InterventionPolicy",
    "InterventionOutcome",
    "SimulationResult",
    "apply_intervention",
    "simulate",
    "run_intervention_grid",
    "GRID_COLUMNS",
]

logger = get_logger()

_AUDITABLE = (AuditStateValue.DECIDABLE, AuditStateValue.INCONSISTENT)


class InterventionDesign(str, Enum):
    INHERIT_STRICTEST = "inherit_strictest"
    AUTO_PROPAGATE = "auto_propagate"
    MANDATORY_DECLARATION = "mandatory_declaration"


class InterventionPolicy(BaseModel):
    """One intervention design at one enforcement rate."""
    design: InterventionDesign = Field(description="Counterfactual design")
    enforcement_rate: float = Field(default=1.0, ge=0.0, le=1.0)
    default_intent: Intent = Field(default=Intent.RESTRICTIVE, description="Platform default (mandatory only)")
    window: int = Field(default=30, ge=1, description="Evaluation window in hops")
    realizations: int = Field(default=500, ge=1)
    seed: int = Field(default=0, ge=0)
    cascade: bool = Field(default=True, description="Resolved intents are inheritable downstream")


@dataclass
class InterventionOutcome:
    """Component intents after one enforcement realization."""
    intents: List[Intent]
    forced_ambiguous: Set[int]
    targeted: Set[int]


def apply_intervention(
    dag: CondensedDag,
    policy: InterventionPolicy,
    realization_seed: int,
    baseline: Optional[Sequence[Intent]] = None,
) -> InterventionOutcome:
    """
    Resolve targeted Unknown components under one design.

    Each Unknown component is targeted independently with probability
    `enforcement_rate`, drawing in component-index order from a generator
    seeded by (policy.seed, realization_seed). Components are processed in
    topological order; with cascade, a resolved intent is inheritable by
    descendants in the same realization.

    Args:
        dag: Condensed lineage DAG
        policy: Intervention policy
        realization_seed: Realization index
        baseline: Baseline component intents; the DAG's own if omitted

    Returns:
        InterventionOutcome
    """
    baseline = list(baseline) if baseline is not None else list(dag.component_intent)
    unknown = [index for index, intent in enumerate(baseline) if intent is Intent.UNKNOWN]
    rng = np.random.default_rng([policy.seed, realization_seed])
    draws = rng.random(len(unknown))
    targeted = {index for index, u in zip(unknown, draws) if u < policy.enforcement_rate}

    current = list(baseline)
    inherit_from = current if policy.cascade else baseline
    forced: Set[int] = set()
    size = len(baseline)
    up_r = [False] * size
    up_p = [False] * size

    for index in dag.topo_order:
        for parent in dag.parents[index]:
            up_r[index] |= up_r[parent] or inherit_from[parent] is Intent.RESTRICTIVE
            up_p[index] |= up_p[parent] or inherit_from[parent] is Intent.PERMISSIVE
        if index not in targeted:
            continue

        design = policy.design
        if design is InterventionDesign.AUTO_PROPAGATE:
            if up_r[index] and up_p[index]:
                forced.add(index)
            elif up_r[index]:
                current[index] = Intent.RESTRICTIVE
            elif up_p[index]:
                current[index] = Intent.PERMISSIVE
        elif up_r[index]:
            current[index] = Intent.RESTRICTIVE
        elif up_p[index]:
            current[index] = Intent.PERMISSIVE
        elif design is InterventionDesign.MANDATORY_DECLARATION:
            current[index] = policy.default_intent

    return InterventionOutcome(intents=current, forced_ambiguous=forced, targeted=targeted)


@dataclass
class SimulationResult:
    """Monte-Carlo summary of H* under one policy."""
    design: str
    rate: float
    window: int
    samples: List[int] = field(repr=False)
    point: int
    mc_mean: float
    ci_low: float
    ci_high: float
    censored_fraction: float

    def _fmt(self, value: float) -> str:
        return f">{self.window}" if value > self.window else f"{value:.3f}"

    def display_point(self) -> str:
        return f">{self.window}" if self.point > self.window else str(self.point)

    def display_mean(self) -> str:
        return self._fmt(self.mc_mean)


class _HopMatrix:
    """Per-component node counts by hop, for fast D(h) evaluation."""

    def __init__(self, dag: CondensedDag, hops: Mapping[str, int], window: int):
        self.window = window
        self.counts = np.zeros((len(dag.components), window + 1), dtype=float)
        for node_id, hop in hops.items():
            if hop <= window and node_id in dag.member_of:
                self.counts[dag.member_of[node_id], hop] += 1
        self.totals = self.counts.sum(axis=0)

    def horizon(self, auditable: np.ndarray, alpha: float) -> int:
        numer = auditable.astype(float) @ self.counts
        observed = self.totals > 0
        d = np.divide(numer, self.totals, out=np.ones_like(numer), where=observed)
        crossing = np.flatnonzero(observed & (d <= alpha))
        return int(crossing[0]) if crossing.size else self.window + 1


def _realize(dag, policy, cfg, matrix, indices) -> List[int]:
    out = []
    for index in indices:
        outcome = apply_intervention(dag, policy, int(index))
        result = assign_states(dag, cfg, outcome.intents, outcome.forced_ambiguous)
        auditable = np.array([state.value in _AUDITABLE for state in result.states])
        out.append(matrix.horizon(auditable, cfg.alpha))
    return out


def simulate(
    dag: CondensedDag,
    policy: InterventionPolicy,
    audit_cfg: Optional[AuditConfig] = None,
    hops: Optional[Mapping[str, int]] = None,
    n_jobs: int = 1,
) -> SimulationResult:
    """
    Run `policy.realizations` enforcement realizations and summarize H*.

    Hop distances are computed once from the baseline ethical sources with
    cutoff equal to the window. Censored realizations count as window + 1.
    The point H* is the realization with sub-seed 0.

    Args:
        dag: Condensed lineage DAG (with its source graph)
        policy: Intervention policy
        audit_cfg: Audit configuration (its max_hop is replaced by the window)
        hops: Precomputed hop distances
        n_jobs: joblib workers
    """
    cfg = (audit_cfg or AuditConfig()).model_copy(update={"max_hop": policy.window})
    if hops is None:
        graph = dag.source
        if graph is None:
            raise ValueError("hops are required when the DAG has no source graph")
        hops = hop_distances(graph, ethical_sources(graph), policy.window)
    matrix = _HopMatrix(dag, hops, policy.window)

    batches = [b for b in np.array_split(np.arange(policy.realizations), min(policy.realizations, 16)) if len(b)]
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_realize)(dag, policy, cfg, matrix, batch) for batch in batches
    )
    samples = [h for batch in results for h in batch]
    values = np.asarray(samples, dtype=float)

    result = SimulationResult(
        design=policy.design.value,
        rate=policy.enforcement_rate,
        window=policy.window,
        samples=samples,
        point=samples[0],
        mc_mean=float(values.mean()),
        ci_low=float(np.percentile(values, 2.5)),
        ci_high=float(np.percentile(values, 97.5)),
        censored_fraction=float(np.mean(values > policy.window)),
    )
    logger.debug(
        f"Intervention {result.design} at rate {result.rate}: point {result.display_point()}, "
        f"mean {result.display_mean()}"
    )
    return result


GRID_COLUMNS = [
    "design",
    "rate",
    "point",
    "mc_mean",
    "ci_low",
    "ci_high",
    "censored_fraction",
    "point_display",
    "mc_mean_display",
]


def run_intervention_grid(
    dag: CondensedDag,
    designs: Sequence[InterventionDesign] = tuple(InterventionDesign),
    rates: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    realizations: int = 500,
    window: int = 30,
    seed: int = 0,
    audit_cfg: Optional[AuditConfig] = None,
    cascade: bool = True,
    n_jobs: int = 1,
) -> pd.DataFrame:
    """
    Baseline row ("none", rate 0) plus one row per (design, rate).

    Returns:
        DataFrame with GRID_COLUMNS
    """
    graph = dag.source
    hops = hop_distances(graph, ethical_sources(graph), window) if graph is not None else None

    def row(design_label: str, result: SimulationResult) -> dict:
        return {
            "design": design_label,
            "rate": result.rate,
            "point": result.point,
            "mc_mean": result.mc_mean,
            "ci_low": result.ci_low,
            "ci_high": result.ci_high,
            "censored_fraction": result.censored_fraction,
            "point_display": result.display_point(),
            "mc_mean_display": result.display_mean(),
        }

    base_policy = InterventionPolicy(
        design=InterventionDesign.INHERIT_STRICTEST,
        enforcement_rate=0.0,
        window=window,
        realizations=realizations,
        seed=seed,
        cascade=cascade,
    )
    rows = [row("none", simulate(dag, base_policy, audit_cfg, hops, n_jobs))]
    for design in designs:
        for rate in rates:
            policy = base_policy.model_copy(update={"design": InterventionDesign(design), "enforcement_rate": float(rate)})
            rows.append(row(InterventionDesign(design).value, simulate(dag, policy, audit_cfg, hops, n_jobs)))
    return pd.DataFrame(rows, columns=GRID_COLUMNS)
