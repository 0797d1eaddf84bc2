"""
Horizon Metrics

Retention curves, the auditable proportion D(h), the governance horizon
H*(alpha) with right-censoring and percentile bootstrap, and exponential
decay fits.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, Field, field_validator
from scipy.optimize import least_squares

from ..core.audit import AuditState, AuditStateValue
from ..core.graph import LineageGraph, hop_distances
from ..core.models import Family, Intent
from ..errors import DegenerateFitError, NoSourcesError
from ..utils.logger import get_logger

__all__ = [
    "HorizonConfig",
    "RetentionUnit",
    "HopSeries",
    "DecayFit",
    "HorizonEstimate",
    "retention_curve",
    "auditable_proportion",
    "governance_horizon",
    "bootstrap_horizon",
    "alpha_sweep",
    "fit_exponential",
    "family_curves",
    "normal_half_width",
]

logger = get_logger()

Z_95 = 1.96
AUDITABLE = (AuditStateValue.DECIDABLE, AuditStateValue.INCONSISTENT)


class RetentionUnit(str, Enum):
    PAIR = "pair"
    NODE = "node"


class HorizonConfig(BaseModel):
    """Settings of the horizon stage."""
    alpha: float = Field(default=0.20, gt=0.0, lt=1.0, description="Threshold of the headline horizon")
    alphas: List[float] = Field(default_factory=lambda: [0.10, 0.20, 0.30, 0.40])
    max_hop: int = Field(default=10, ge=0)
    resamples: int = Field(default=500, ge=1)
    unit: RetentionUnit = Field(default=RetentionUnit.PAIR)
    anchored_fit: bool = Field(default=False, description="Force the fitted amplitude to 1")
    weighted: bool = Field(default=False, description="Weight the fit by per-hop counts")

    @field_validator("alphas")
    @classmethod
    def _open_unit_interval(cls, value: List[float]) -> List[float]:
        if not value or any(not 0.0 < alpha < 1.0 for alpha in value):
            raise ValueError("alphas must be a nonempty list of values in (0, 1)")
        return value


@dataclass
class HopSeries:
    """Hop-indexed proportions with sample sizes and optional CI bounds."""
    hops: List[int]
    values: List[float]
    counts: List[int]
    ci_low: Optional[List[float]] = None
    ci_high: Optional[List[float]] = None

    def __post_init__(self):
        if not (len(self.hops) == len(self.values) == len(self.counts)):
            raise ValueError("hops, values and counts must have equal lengths")
        if any(b <= a for a, b in zip(self.hops, self.hops[1:])):
            raise ValueError("hops must be strictly increasing")

    def __len__(self) -> int:
        return len(self.hops)

    def value_at(self, hop: int) -> Optional[float]:
        for h, value in zip(self.hops, self.values):
            if h == hop:
                return value
        return None

    def to_frame(self) -> pd.DataFrame:
        """Frame with columns hop, value, count, ci_low, ci_high."""
        return pd.DataFrame({
            "hop": self.hops,
            "value": self.values,
            "count": self.counts,
            "ci_low": self.ci_low if self.ci_low is not None else [np.nan] * len(self.hops),
            "ci_high": self.ci_high if self.ci_high is not None else [np.nan] * len(self.hops),
        })


@dataclass
class DecayFit:
    """Fit of y = A * exp(-rate * h)."""
    amplitude: float
    rate: float
    half_life: float
    r_squared: float
    anchored: bool
    iterations: int

    def predict(self, hops: Sequence[float]) -> np.ndarray:
        return self.amplitude * np.exp(-self.rate * np.asarray(hops, dtype=float))

    def to_dict(self) -> Dict[str, float]:
        return {
            "amplitude": self.amplitude,
            "rate": self.rate,
            "half_life": self.half_life,
            "r_squared": self.r_squared,
            "anchored": self.anchored,
            "iterations": self.iterations,
        }


@dataclass
class HorizonEstimate:
    """Point governance horizon, optionally with bootstrap statistics."""
    h_star: int
    censored: bool
    alpha: float
    max_hop: int
    bootstrap_mean: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    resamples: int = 0
    samples: List[int] = field(default_factory=list, repr=False)

    def display(self) -> str:
        """H* as printed in reports (`>max_hop` when censored)."""
        return f">{self.max_hop}" if self.censored else str(self.h_star)

    def to_dict(self) -> Dict[str, object]:
        return {
            "h_star": self.h_star,
            "censored": self.censored,
            "alpha": self.alpha,
            "max_hop": self.max_hop,
            "bootstrap_mean": self.bootstrap_mean,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "resamples": self.resamples,
        }


def normal_half_width(p: float, n: int) -> float:
    """Half-width 1.96 * sqrt(p(1-p)/n) of a normal-approximation 95% CI."""
    if n <= 0:
        return 0.0
    return Z_95 * math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _per_source_reach(graph: LineageGraph, source: str, cutoff: int) -> List[str]:
    return sorted(hop_distances(graph, [source], cutoff))


def retention_curve(
    graph: LineageGraph,
    sources: Iterable[str],
    cutoff: int = 10,
    unit: Union[RetentionUnit, str] = RetentionUnit.PAIR,
    n_jobs: int = 1,
) -> HopSeries:
    """
    Fraction of descendants still carrying restriction evidence, by hop.

    Args:
        graph: Lineage graph with intents assigned
        sources: Ethical source ids
        cutoff: Maximum hop
        unit: `pair` counts (source, descendant) observations binned by the
            descendant's nearest-source hop; `node` counts unique descendants
        n_jobs: Workers for per-source traversals (pair unit)

    Raises:
        NoSourcesError: no sources given
    """
    sources = sorted(set(sources))
    if not sources:
        raise NoSourcesError("retention curve needs at least one ethical source")
    unit = RetentionUnit(unit)
    nearest = hop_distances(graph, sources, cutoff)

    totals: Dict[int, int] = {}
    restrictive: Dict[int, int] = {}

    def observe(node_id: str, weight: int) -> None:
        hop = nearest[node_id]
        totals[hop] = totals.get(hop, 0) + weight
        if graph.nodes[node_id].intent is Intent.RESTRICTIVE:
            restrictive[hop] = restrictive.get(hop, 0) + weight

    if unit is RetentionUnit.NODE:
        for node_id in sorted(nearest):
            observe(node_id, 1)
    else:
        reached = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_per_source_reach)(graph, source, cutoff) for source in sources
        )
        multiplicity: Dict[str, int] = {}
        for nodes in reached:
            for node_id in nodes:
                multiplicity[node_id] = multiplicity.get(node_id, 0) + 1
        for node_id in sorted(multiplicity):
            observe(node_id, multiplicity[node_id])

    hops = sorted(totals)
    return HopSeries(
        hops=hops,
        values=[restrictive.get(h, 0) / totals[h] for h in hops],
        counts=[totals[h] for h in hops],
    )


def auditable_proportion(composition: pd.DataFrame) -> HopSeries:
    """
    D(h) = Decidable(h) + Inconsistent(h) from a composition frame.

    Count columns are used when present so D(h) is exact.
    """
    frame = composition.sort_values("hop")
    if {"decidable_count", "inconsistent_count", "n"}.issubset(frame.columns):
        auditable = frame["decidable_count"] + frame["inconsistent_count"]
        values = (auditable / frame["n"]).tolist()
    else:
        values = (frame["decidable"] + frame["inconsistent"]).tolist()
    counts = frame["n"].astype(int).tolist() if "n" in frame.columns else [1] * len(frame)
    return HopSeries(hops=frame["hop"].astype(int).tolist(), values=[float(v) for v in values], counts=counts)


def governance_horizon(d: HopSeries, alpha: float = 0.20, max_hop: int = 10) -> HorizonEstimate:
    """
    Smallest hop with D(h) <= alpha, right-censored at max_hop + 1.

    Hops without observations are skipped; a tie D(h) == alpha crosses.
    """
    for hop, value, count in zip(d.hops, d.values, d.counts):
        if hop > max_hop:
            break
        if count > 0 and value <= alpha:
            return HorizonEstimate(h_star=hop, censored=False, alpha=alpha, max_hop=max_hop)
    return HorizonEstimate(h_star=max_hop + 1, censored=True, alpha=alpha, max_hop=max_hop)


def _auditable_flag(state: Union[AuditState, AuditStateValue, bool]) -> bool:
    if isinstance(state, AuditState):
        return state.value in AUDITABLE
    if isinstance(state, AuditStateValue):
        return state in AUDITABLE
    return bool(state)


def _horizon_from_counts(totals: np.ndarray, auditable: np.ndarray, alpha: float, max_hop: int) -> int:
    observed = totals > 0
    d = np.divide(auditable, totals, out=np.ones_like(auditable, dtype=float), where=observed)
    crossing = np.flatnonzero(observed & (d <= alpha))
    return int(crossing[0]) if crossing.size else max_hop + 1


def _resample_batch(hops, flags, indices, seed, alpha, max_hop) -> List[int]:
    n = hops.size
    size = max_hop + 1
    out = []
    for index in indices:
        rng = np.random.default_rng([seed, int(index)])
        draw = rng.integers(0, n, size=n)
        totals = np.bincount(hops[draw], minlength=size)
        auditable = np.bincount(hops[draw], weights=flags[draw], minlength=size)
        out.append(_horizon_from_counts(totals, auditable, alpha, max_hop))
    return out


def bootstrap_horizon(
    observations: Sequence[Tuple[int, Union[AuditState, AuditStateValue, bool]]],
    alpha: float = 0.20,
    max_hop: int = 10,
    resamples: int = 500,
    seed: int = 0,
    n_jobs: int = 1,
) -> HorizonEstimate:
    """
    Percentile bootstrap of H* over node-level (hop, state) observations.

    Each resample draws the full observation list with replacement from a
    generator seeded by (seed, resample index); censored resamples count as
    max_hop + 1.

    Args:
        observations: (hop, audit state or auditable flag) per node
        alpha: Horizon threshold
        max_hop: Analysis window
        resamples: Number of bootstrap resamples
        seed: Base seed
        n_jobs: joblib workers

    Returns:
        HorizonEstimate with point estimate and bootstrap statistics
    """
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    kept = [(hop, _auditable_flag(state)) for hop, state in observations if 0 <= hop <= max_hop]
    if not kept:
        raise ValueError("bootstrap needs at least one observation within the window")
    hops = np.array([hop for hop, _ in kept], dtype=np.int64)
    flags = np.array([flag for _, flag in kept], dtype=float)
    size = max_hop + 1

    point = _horizon_from_counts(
        np.bincount(hops, minlength=size),
        np.bincount(hops, weights=flags, minlength=size),
        alpha,
        max_hop,
    )

    batches = [list(chunk) for chunk in np.array_split(np.arange(resamples), max(1, min(resamples, 16))) if len(chunk)]
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_resample_batch)(hops, flags, batch, seed, alpha, max_hop) for batch in batches
    )
    samples = [h for batch in results for h in batch]
    values = np.asarray(samples, dtype=float)

    return HorizonEstimate(
        h_star=point,
        censored=point > max_hop,
        alpha=alpha,
        max_hop=max_hop,
        bootstrap_mean=float(values.mean()),
        ci_low=float(np.percentile(values, 2.5)),
        ci_high=float(np.percentile(values, 97.5)),
        resamples=resamples,
        samples=samples,
    )


def alpha_sweep(
    observations: Sequence[Tuple[int, Union[AuditState, AuditStateValue, bool]]],
    alphas: Sequence[float] = (0.10, 0.20, 0.30, 0.40),
    max_hop: int = 10,
    resamples: int = 500,
    seed: int = 0,
    n_jobs: int = 1,
) -> pd.DataFrame:
    """Point H*, bootstrap mean and CI for each alpha."""
    rows = []
    for alpha in alphas:
        estimate = bootstrap_horizon(observations, alpha, max_hop, resamples, seed, n_jobs)
        rows.append({
            "alpha": alpha,
            "h_star": estimate.h_star,
            "censored": estimate.censored,
            "bootstrap_mean": estimate.bootstrap_mean,
            "ci_low": estimate.ci_low,
            "ci_high": estimate.ci_high,
        })
    return pd.DataFrame(rows, columns=["alpha", "h_star", "censored", "bootstrap_mean", "ci_low", "ci_high"])


def fit_exponential(
    series: HopSeries,
    anchored: bool = False,
    weights: Optional[Sequence[float]] = None,
    max_iterations: int = 200,
    tolerance: float = 1e-10,
) -> DecayFit:
    """
    Least-squares fit of y = A * exp(-rate * h) on the original scale.

    Initialized by log-linear regression (through the origin when anchored)
    and refined by Levenberg-Marquardt damped Gauss-Newton. Hops with zero
    count are skipped.

    Args:
        series: Hop series to fit
        anchored: Force A = 1
        weights: Optional per-point weights (e.g. per-hop counts)
        max_iterations: Iteration cap
        tolerance: Relative tolerance on parameters and cost

    Raises:
        DegenerateFitError: fewer than 3 points, or a non-decaying fit
    """
    keep = [i for i, count in enumerate(series.counts) if count > 0]
    h = np.array([series.hops[i] for i in keep], dtype=float)
    y = np.array([series.values[i] for i in keep], dtype=float)
    w = np.ones_like(y) if weights is None else np.array([weights[i] for i in keep], dtype=float)
    if h.size < 3:
        raise DegenerateFitError(f"exponential fit needs at least 3 points, got {h.size}")

    positive = y > 0
    rate0, amp0 = 0.1, float(np.max(y))
    if positive.sum() >= 2:
        logs = np.log(y[positive])
        hp = h[positive]
        if anchored:
            denom = float(np.sum(hp * hp))
            rate0 = -float(np.sum(hp * logs)) / denom if denom > 0 else rate0
        else:
            slope, intercept = np.polyfit(hp, logs, 1)
            rate0, amp0 = -float(slope), float(np.exp(intercept))

    sqrt_w = np.sqrt(w)
    if anchored:
        def residuals(params):
            return sqrt_w * (np.exp(-params[0] * h) - y)
        x0 = [rate0]
    else:
        def residuals(params):
            return sqrt_w * (params[0] * np.exp(-params[1] * h) - y)
        x0 = [amp0, rate0]

    result = least_squares(
        residuals,
        x0,
        method="lm",
        xtol=tolerance,
        ftol=tolerance,
        gtol=tolerance,
        max_nfev=max_iterations * (len(x0) + 1),
    )
    amplitude, rate = (1.0, float(result.x[0])) if anchored else (float(result.x[0]), float(result.x[1]))
    if not np.isfinite(rate) or rate <= 1e-12:
        raise DegenerateFitError(f"fitted decay rate {rate:.3g} is not positive")

    fitted = amplitude * np.exp(-rate * h)
    mean = np.average(y, weights=w)
    ss_res = float(np.sum(w * (y - fitted) ** 2))
    ss_tot = float(np.sum(w * (y - mean) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)

    logger.debug(f"Exponential fit: A={amplitude:.6g} rate={rate:.6g} R2={r_squared:.6g} nfev={result.nfev}")
    return DecayFit(
        amplitude=amplitude,
        rate=rate,
        half_life=math.log(2) / rate,
        r_squared=r_squared,
        anchored=anchored,
        iterations=int(result.nfev),
    )


def family_curves(
    graph: LineageGraph,
    sources: Iterable[str],
    family_fn: Optional[Callable[[str], Family]] = None,
    cutoff: int = 10,
    unit: Union[RetentionUnit, str] = RetentionUnit.PAIR,
) -> Dict[str, HopSeries]:
    """
    Per-family retention curves with normal-approximation 95% CIs.

    Sources are grouped by family; families without sources are omitted.
    """
    family_fn = family_fn or (lambda node_id: graph.nodes[node_id].family)
    grouped: Dict[str, List[str]] = {}
    for source in sorted(set(sources)):
        grouped.setdefault(family_fn(source).value, []).append(source)

    curves: Dict[str, HopSeries] = {}
    for family in sorted(grouped):
        curve = retention_curve(graph, grouped[family], cutoff, unit)
        half = [normal_half_width(p, n) for p, n in zip(curve.values, curve.counts)]
        curve.ci_low = [max(0.0, p - hw) for p, hw in zip(curve.values, half)]
        curve.ci_high = [min(1.0, p + hw) for p, hw in zip(curve.values, half)]
        curves[family] = curve
    return curves
