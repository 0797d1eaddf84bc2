"""
Merge-Conflict Causal Analysis

Observational estimates of whether merging restrictive with non-restrictive
parents raises the odds of permissive relicensing.

Features:
- Merge-case construction from the lineage graph (treatment, outcome and
  nine pre-treatment covariates)
- Raw difference in proportions with a pooled two-sided z-test
- Scaled logistic propensity model with a weak ridge penalty
- 1:k nearest-neighbour matching with caliper (ATT, clustered bootstrap)
- Trimmed, refitted, Hajek-normalized IPW (ATE)
- Doubly robust AIPW with per-arm outcome regressions (ATE)
- Balance diagnostics (standardized mean differences) and overlap histograms

Usage:
    cases = build_cases(graph, rules.permissive_set)
    model = fit_propensity(cases)
    att = psm_att(cases, model, seed=7)
    print(att.estimate, att.ci_low, att.ci_high)
"""

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, Field, model_validator
from scipy import stats
from scipy.special import expit, logit
from sklearn.linear_model import LogisticRegression
from sklearn.preprocessing import StandardScaler

from ..core.graph import LineageGraph
from ..core.models import EdgeType
from ..errors import EstimationError, PropensityFitError
from ..utils.logger import get_logger

__all__ = [
    "CASE_COLUMNS",
    "COVARIATE_NAMES",
    "SUMMARY_COLUMNS",
    "CaliperScale",
    "CausalConfig",
    "EffectEstimate",
    "Estimator",
    "LogisticFit",
    "MatchResult",
    "MergeCase",
    "MergeStatsReport",
    "PropensityModel",
    "aipw_ate",
    "balance_table",
    "build_cases",
    "cases_frame",
    "cases_from_frame",
    "covariate_vector",
    "fit_logistic",
    "fit_propensity",
    "ipw_ate",
    "match_cases",
    "propensity_histogram",
    "proportion_difference",
    "psm_att",
    "raw_difference",
    "run_merge_stats",
    "smd",
]

logger = get_logger()

COVARIATE_NAMES = [
    "num_parents",
    "parent_missing_rate",
    "log_age",
    "log_lineage_size",
    "num_parents_sq",
    "parent_missing_rate_sq",
    "log_age_sq",
    "log_lineage_size_sq",
    "missing_rate_x_num_parents",
]

PROBABILITY_CLIP = 1e-3
BOOTSTRAP_BATCHES = 16
_DISTANCE_EPS = 1e-12

FeatureSpec = Optional[Sequence[Union[int, str]]]


class Estimator(str, Enum):
    RAW = "raw"
    PSM_ATT = "psm_att"
    IPW_ATE = "ipw_ate"
    AIPW_ATE = "aipw_ate"


class CaliperScale(str, Enum):
    """Units of the matching caliper."""
    PROPENSITY = "propensity"
    LOGIT_SD = "logit_sd"


@dataclass(frozen=True)
class MergeCase:
    """One merge-derived repository in the conflict analysis."""
    child_id: str
    treated: bool
    outcome: bool
    covariates: Tuple[float, ...]

    def __post_init__(self):
        if len(self.covariates) != len(COVARIATE_NAMES):
            raise ValueError(f"expected {len(COVARIATE_NAMES)} covariates, got {len(self.covariates)}")

    def to_dict(self) -> Dict[str, object]:
        row: Dict[str, object] = {"child_id": self.child_id, "treated": self.treated, "outcome": self.outcome}
        row.update(zip(COVARIATE_NAMES, self.covariates))
        return row


CASE_COLUMNS = ["child_id", "treated", "outcome"] + COVARIATE_NAMES


def cases_frame(cases: Sequence[MergeCase]) -> pd.DataFrame:
    """Cases as a frame with CASE_COLUMNS; booleans are written as 0/1."""
    rows = [case.to_dict() for case in cases]
    frame = pd.DataFrame(rows, columns=CASE_COLUMNS)
    frame["treated"] = frame["treated"].astype(int)
    frame["outcome"] = frame["outcome"].astype(int)
    return frame


def cases_from_frame(frame: pd.DataFrame) -> List[MergeCase]:
    missing = [column for column in CASE_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"missing case column(s): {', '.join(missing)}")
    covariates = frame[COVARIATE_NAMES].to_numpy(dtype=float)
    return [
        MergeCase(str(child_id), bool(int(treated)), bool(int(outcome)), tuple(float(v) for v in row))
        for child_id, treated, outcome, row in zip(frame["child_id"], frame["treated"], frame["outcome"], covariates)
    ]


def covariate_vector(num_parents: int, missing_rate: float, age_days: float, lineage_size: int) -> Tuple[float, ...]:
    """Four base covariates, their squares and the missing-rate x parents interaction."""
    base = (
        float(num_parents),
        float(missing_rate),
        math.log1p(max(float(age_days), 0.0)),
        math.log1p(float(lineage_size)),
    )
    return base + tuple(value * value for value in base) + (float(missing_rate) * float(num_parents),)


def _ages_in_days(graph: LineageGraph) -> Dict[str, float]:
    ids = sorted(graph.nodes)
    stamps = pd.to_datetime(
        pd.Series([graph.nodes[node_id].created_at for node_id in ids], index=ids, dtype=object),
        utc=True,
        errors="coerce",
        format="ISO8601",
    )
    if not stamps.notna().any():
        return {node_id: 0.0 for node_id in ids}
    ages = (stamps.max() - stamps).dt.total_seconds() / 86400.0
    return ages.fillna(0.0).to_dict()


def build_cases(
    graph: LineageGraph,
    permissive_list: AbstractSet[str],
    threshold: float = 1.0,
    strict_threshold: bool = False,
) -> List[MergeCase]:
    """
    Build merge cases from a classified lineage graph.

    A node is a case when at least one incoming edge is a merge edge and at
    least one parent carries a restriction score at or above `threshold`.
    Parents without a score are left out of the treatment definition and
    counted in the parent missing rate. A case is treated when its scored
    parents mix restrictive and non-restrictive scores.

    Args:
        graph: Lineage graph with restriction scores on nodes
        permissive_list: Recognized permissive identifiers; the outcome is a
            permissive declaration on the child
        threshold: Restrictive score threshold
        strict_threshold: Use `>` instead of `>=`

    Returns:
        Cases in child-id order
    """
    folded = {name.casefold() for name in permissive_list}
    ages = _ages_in_days(graph)
    cases: List[MergeCase] = []

    for child_id in sorted(graph.nodes):
        parents = sorted(graph.parents_of[child_id])
        if not any(graph.edge_types[(child_id, parent)] is EdgeType.MERGE for parent in parents):
            continue
        scored = [graph.nodes[p].restriction_score for p in parents if graph.nodes[p].restriction_score is not None]
        restrictive = [s > threshold if strict_threshold else s >= threshold for s in scored]
        if not any(restrictive):
            continue

        child = graph.nodes[child_id]
        outcome = any(name.strip().casefold() in folded for name in child.licence_names)
        missing_rate = (len(parents) - len(scored)) / len(parents)
        covariates = covariate_vector(
            len(parents), missing_rate, ages.get(child_id, 0.0), len(graph.ancestors(child_id))
        )
        cases.append(MergeCase(child_id, treated=not all(restrictive), outcome=outcome, covariates=covariates))

    logger.info(f"Merge cases: {len(cases)} ({sum(c.treated for c in cases)} treated)")
    return cases


@dataclass
class _Arrays:
    ids: np.ndarray
    treated: np.ndarray
    outcome: np.ndarray
    x: np.ndarray

    def __len__(self) -> int:
        return self.ids.size

    def take(self, index: np.ndarray) -> "_Arrays":
        return _Arrays(self.ids[index], self.treated[index], self.outcome[index], self.x[index])

    @property
    def n_treated(self) -> int:
        return int(self.treated.sum())

    @property
    def n_control(self) -> int:
        return int(self.treated.size - self.treated.sum())


def _arrays(cases: Sequence[MergeCase]) -> _Arrays:
    width = len(COVARIATE_NAMES)
    return _Arrays(
        ids=np.array([case.child_id for case in cases], dtype=object),
        treated=np.array([case.treated for case in cases], dtype=bool),
        outcome=np.array([case.outcome for case in cases], dtype=float),
        x=np.array([case.covariates for case in cases], dtype=float).reshape(len(cases), width),
    )


def _feature_columns(features: FeatureSpec) -> List[int]:
    if features is None:
        return list(range(len(COVARIATE_NAMES)))
    columns = []
    for feature in features:
        index = COVARIATE_NAMES.index(feature) if isinstance(feature, str) else int(feature)
        if not 0 <= index < len(COVARIATE_NAMES):
            raise ValueError(f"covariate index out of range: {feature}")
        columns.append(index)
    return columns


@dataclass
class LogisticFit:
    """Logistic regression on standardized features, kept as plain parameters."""
    features: List[int]
    intercept: float
    coefficients: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    iterations: int
    converged: bool
    messages: List[str] = field(default_factory=list)

    def linear_predictor(self, x: np.ndarray) -> np.ndarray:
        standardized = (x[:, self.features] - self.means) / self.scales
        return self.intercept + standardized @ self.coefficients

    def predict(self, x: np.ndarray) -> np.ndarray:
        return expit(self.linear_predictor(x))


def fit_logistic(
    x: np.ndarray,
    y: np.ndarray,
    features: Sequence[int],
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> LogisticFit:
    """
    Fit a scaled logistic regression of `y` on the selected columns of `x`.

    Columns without variance get a zero coefficient; with no varying column
    the model is intercept-only at the observed rate. A single-class `y`
    yields a constant prediction of that class.
    """
    features = list(features)
    columns = np.asarray(x, dtype=float)[:, features]
    y = np.asarray(y).astype(int)
    means = columns.mean(axis=0) if len(y) else np.zeros(len(features))
    scales = np.ones(len(features))
    coefficients = np.zeros(len(features))
    rate = float(y.mean()) if len(y) else 0.0

    if rate in (0.0, 1.0):
        intercept = math.inf if rate == 1.0 else -math.inf
        return LogisticFit(features, intercept, coefficients, means, scales, iterations=0, converged=True)

    varying = np.flatnonzero(columns.std(axis=0) > 1e-12) if features else np.array([], dtype=int)
    if varying.size == 0:
        return LogisticFit(features, float(logit(rate)), coefficients, means, scales, iterations=0, converged=True)

    scaler = StandardScaler().fit(columns[:, varying])
    model = LogisticRegression(C=1.0 / ridge, solver="newton-cholesky", tol=tol, max_iter=max_iter)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model.fit(scaler.transform(columns[:, varying]), y)
    messages = [str(warning.message) for warning in caught]
    for message in messages:
        logger.debug(f"Logistic fit: {message}")

    means[varying] = scaler.mean_
    scales[varying] = scaler.scale_
    coefficients[varying] = model.coef_[0]
    iterations = int(np.max(model.n_iter_))
    return LogisticFit(
        features,
        float(model.intercept_[0]),
        coefficients,
        means,
        scales,
        iterations=iterations,
        converged=iterations < max_iter,
        messages=messages,
    )


@dataclass
class PropensityModel:
    """Fitted treatment model; predictions are clipped to [0.001, 0.999]."""
    fit: LogisticFit
    n_treated: int
    n_control: int
    log_likelihood: float

    @property
    def intercept(self) -> float:
        return self.fit.intercept

    @property
    def coefficients(self) -> np.ndarray:
        return self.fit.coefficients

    @property
    def iterations(self) -> int:
        return self.fit.iterations

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.clip(self.fit.predict(x), PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP)

    def predict_cases(self, cases: Sequence[MergeCase]) -> np.ndarray:
        return self.predict(_arrays(cases).x)


def _fit_propensity(arrays: _Arrays, features: Sequence[int], ridge: float, tol: float, max_iter: int) -> PropensityModel:
    diagnostics = {"n_treated": arrays.n_treated, "n_control": arrays.n_control, "max_iter": max_iter}
    if arrays.n_treated < 2 or arrays.n_control < 2:
        raise PropensityFitError("propensity model needs at least 2 cases per arm", diagnostics)
    fit = fit_logistic(arrays.x, arrays.treated, features, ridge, tol, max_iter)
    if not fit.converged:
        diagnostics.update(iterations=fit.iterations, messages=fit.messages)
        raise PropensityFitError(f"propensity model did not converge within {max_iter} iterations", diagnostics)
    p = np.clip(fit.predict(arrays.x), 1e-15, 1 - 1e-15)
    t = arrays.treated
    log_likelihood = float(np.sum(np.where(t, np.log(p), np.log1p(-p))))
    return PropensityModel(fit, arrays.n_treated, arrays.n_control, log_likelihood)


def fit_propensity(
    cases: Sequence[MergeCase],
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 500,
    features: FeatureSpec = None,
) -> PropensityModel:
    """
    Fit the propensity model by maximum likelihood on standardized covariates.

    Args:
        cases: Merge cases
        ridge: L2 penalty strength (C = 1/ridge)
        tol: Gradient-norm convergence tolerance
        max_iter: Newton iteration limit
        features: Covariate subset by name or index; all nine if omitted

    Returns:
        PropensityModel

    Raises:
        PropensityFitError: fewer than 2 cases in an arm, or no convergence
    """
    return _fit_propensity(_arrays(cases), _feature_columns(features), ridge, tol, max_iter)


@dataclass
class EffectEstimate:
    """Point estimate with a percentile bootstrap interval."""
    estimator: Estimator
    estimate: float
    ci_low: float
    ci_high: float
    n_treated: int
    n_control: int
    resamples: int
    bootstrap_mean: float
    p_value: Optional[float] = None
    dropped: int = 0
    failed_resamples: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "estimator": self.estimator.value,
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "bootstrap_mean": self.bootstrap_mean,
            "p_value": self.p_value,
            "n_treated": self.n_treated,
            "n_control": self.n_control,
            "resamples": self.resamples,
            "dropped": self.dropped,
            "failed_resamples": self.failed_resamples,
        }


SUMMARY_COLUMNS = [
    "estimator",
    "estimate",
    "ci_low",
    "ci_high",
    "bootstrap_mean",
    "p_value",
    "n_treated",
    "n_control",
    "resamples",
    "dropped",
    "failed_resamples",
]


def _bootstrap(
    statistic: Callable[[np.ndarray], float],
    n: int,
    resamples: int,
    seed: int,
    n_jobs: int,
) -> Tuple[np.ndarray, int]:
    """Resample indices with per-resample generators seeded by (seed, index)."""
    if resamples < 1:
        raise ValueError("resamples must be >= 1")

    def run(indices: np.ndarray) -> Tuple[List[float], int]:
        values: List[float] = []
        failed = 0
        for index in indices:
            rng = np.random.default_rng([seed, int(index)])
            try:
                values.append(float(statistic(rng.integers(0, n, size=n))))
            except EstimationError:
                failed += 1
        return values, failed

    batches = [b for b in np.array_split(np.arange(resamples), min(resamples, BOOTSTRAP_BATCHES)) if len(b)]
    results = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(run)(batch) for batch in batches)
    samples = np.array([value for values, _ in results for value in values], dtype=float)
    failed = sum(count for _, count in results)
    if failed:
        logger.warning(f"Bootstrap skipped {failed} of {resamples} resamples")
    if samples.size == 0:
        raise EstimationError("every bootstrap resample failed")
    return samples, failed


def _summarize(
    estimator: Estimator,
    point: float,
    samples: np.ndarray,
    n_treated: int,
    n_control: int,
    resamples: int,
    **extra,
) -> EffectEstimate:
    return EffectEstimate(
        estimator=estimator,
        estimate=float(point),
        ci_low=float(np.percentile(samples, 2.5)),
        ci_high=float(np.percentile(samples, 97.5)),
        n_treated=n_treated,
        n_control=n_control,
        resamples=resamples,
        bootstrap_mean=float(samples.mean()),
        **extra,
    )


def proportion_difference(
    treated_events: int,
    n_treated: int,
    control_events: int,
    n_control: int,
    resamples: int = 2000,
    seed: int = 0,
) -> EffectEstimate:
    """
    Difference in proportions with a pooled two-sided z-test and a
    per-arm percentile bootstrap.

    Raises:
        EstimationError: an arm is empty
    """
    if n_treated < 1 or n_control < 1:
        raise EstimationError("raw difference needs both arms nonempty")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    p_t = treated_events / n_treated
    p_c = control_events / n_control
    delta = p_t - p_c

    pooled = (treated_events + control_events) / (n_treated + n_control)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n_treated + 1.0 / n_control))
    p_value = float(2.0 * stats.norm.sf(abs(delta) / se)) if se > 0 else 1.0

    rng = np.random.default_rng(seed)
    samples = rng.binomial(n_treated, p_t, size=resamples) / n_treated - rng.binomial(
        n_control, p_c, size=resamples
    ) / n_control
    return _summarize(Estimator.RAW, delta, samples, n_treated, n_control, resamples, p_value=p_value)


def raw_difference(cases: Sequence[MergeCase], resamples: int = 2000, seed: int = 0) -> EffectEstimate:
    """Unadjusted relicensing-rate difference between conflict and control cases."""
    arrays = _arrays(cases)
    t = arrays.treated
    return proportion_difference(
        int(arrays.outcome[t].sum()),
        arrays.n_treated,
        int(arrays.outcome[~t].sum()),
        arrays.n_control,
        resamples,
        seed,
    )


@dataclass
class MatchResult:
    """Nearest-neighbour matches for treated cases."""
    matches: Dict[str, List[str]]
    differences: np.ndarray
    weights: np.ndarray
    dropped: List[str]
    caliper: float
    caliper_scale: CaliperScale

    @property
    def n_matched(self) -> int:
        return len(self.matches)


def _id_ranks(ids: np.ndarray) -> np.ndarray:
    order = sorted(range(ids.size), key=lambda i: ids[i])
    ranks = np.empty(ids.size, dtype=np.int64)
    ranks[order] = np.arange(ids.size)
    return ranks


def _match(
    arrays: _Arrays,
    propensity: np.ndarray,
    k: int,
    caliper: float,
    caliper_scale: CaliperScale,
    with_replacement: bool,
) -> MatchResult:
    score = propensity if caliper_scale is CaliperScale.PROPENSITY else logit(propensity)
    width = caliper if caliper_scale is CaliperScale.PROPENSITY else caliper * float(np.std(score))
    ranks = _id_ranks(arrays.ids)

    treated = np.flatnonzero(arrays.treated)
    treated = treated[np.argsort(ranks[treated], kind="stable")]
    controls = np.flatnonzero(~arrays.treated)
    controls = controls[np.lexsort((ranks[controls], score[controls]))]
    control_scores = score[controls]
    control_ranks = ranks[controls]
    available = np.ones(controls.size, dtype=bool)

    matches: Dict[str, List[str]] = {}
    differences: List[float] = []
    weights = np.zeros(len(arrays))
    dropped: List[str] = []

    for unit in treated:
        s = score[unit]
        if with_replacement:
            pos = int(np.searchsorted(control_scores, s))
            window = np.abs(control_scores[max(0, pos - k): min(controls.size, pos + k)] - s)
            if window.size == 0:
                dropped.append(arrays.ids[unit])
                continue
            bound = min(float(np.sort(window)[min(k, window.size) - 1]), width)
            left = int(np.searchsorted(control_scores, s - bound - _DISTANCE_EPS, side="left"))
            right = int(np.searchsorted(control_scores, s + bound + _DISTANCE_EPS, side="right"))
            candidates = np.arange(left, right)
        else:
            candidates = np.flatnonzero(available)
        distance = np.abs(control_scores[candidates] - s)
        inside = distance <= width
        if with_replacement:
            inside &= distance <= bound
        candidates, distance = candidates[inside], distance[inside]
        if candidates.size == 0:
            dropped.append(arrays.ids[unit])
            continue

        chosen = candidates[np.lexsort((control_ranks[candidates], distance))][:k]
        if not with_replacement:
            available[chosen] = False
        members = controls[chosen]
        matches[arrays.ids[unit]] = [arrays.ids[c] for c in members]
        differences.append(arrays.outcome[unit] - arrays.outcome[members].mean())
        weights[unit] = 1.0
        weights[members] += 1.0 / members.size

    if dropped:
        logger.warning(f"Matching dropped {len(dropped)} treated case(s) with no control inside the caliper")
    return MatchResult(matches, np.asarray(differences, dtype=float), weights, dropped, width, caliper_scale)


def match_cases(
    cases: Sequence[MergeCase],
    model: PropensityModel,
    k: int = 3,
    caliper: float = 0.20,
    caliper_scale: CaliperScale = CaliperScale.PROPENSITY,
    with_replacement: bool = True,
) -> MatchResult:
    """
    Match each treated case to up to `k` nearest controls inside the caliper.

    Treated cases are processed in id order; ties in distance go to the
    lower control id.

    Args:
        cases: Merge cases
        model: Fitted propensity model
        k: Controls per treated case
        caliper: Maximum distance, in propensity units or SDs of the logit
        caliper_scale: Caliper convention
        with_replacement: Allow a control to serve several treated cases
    """
    arrays = _arrays(cases)
    return _match(arrays, model.predict(arrays.x), k, caliper, CaliperScale(caliper_scale), with_replacement)


def psm_att(
    cases: Sequence[MergeCase],
    model: PropensityModel,
    k: int = 3,
    caliper: float = 0.20,
    caliper_scale: CaliperScale = CaliperScale.PROPENSITY,
    with_replacement: bool = True,
    resamples: int = 2000,
    seed: int = 0,
    n_jobs: int = 1,
) -> EffectEstimate:
    """
    ATT by propensity-score matching with a bootstrap clustered on treated units.

    Returns:
        EffectEstimate; `dropped` counts treated cases without in-caliper controls
    """
    matching = match_cases(cases, model, k, caliper, caliper_scale, with_replacement)
    if matching.n_matched == 0:
        raise EstimationError("no treated case has a control inside the caliper")
    differences = matching.differences
    samples, failed = _bootstrap(lambda draw: differences[draw].mean(), differences.size, resamples, seed, n_jobs)
    n_control = int(np.count_nonzero(matching.weights[~_arrays(cases).treated]))
    return _summarize(
        Estimator.PSM_ATT,
        differences.mean(),
        samples,
        matching.n_matched,
        n_control,
        resamples,
        dropped=len(matching.dropped),
        failed_resamples=failed,
    )


def _trimmed(
    arrays: _Arrays,
    features: Sequence[int],
    trim: Tuple[float, float],
    refit: bool,
    ridge: float,
    tol: float,
    max_iter: int,
) -> Tuple[_Arrays, np.ndarray, int]:
    low, high = trim
    propensity = _fit_propensity(arrays, features, ridge, tol, max_iter).predict(arrays.x)
    keep = (propensity >= low) & (propensity <= high)
    subset = arrays.take(np.flatnonzero(keep))
    if subset.n_treated == 0 or subset.n_control == 0:
        raise EstimationError(f"trimming to [{low}, {high}] leaves an empty arm")
    if refit:
        propensity = _fit_propensity(subset, features, ridge, tol, max_iter).predict(subset.x)
    else:
        propensity = propensity[keep]
    return subset, np.clip(propensity, low, high), int(len(arrays) - len(subset))


def _hajek(treated: np.ndarray, outcome: np.ndarray, propensity: np.ndarray) -> float:
    w1 = treated / propensity
    w0 = (~treated) / (1.0 - propensity)
    return float(np.sum(w1 * outcome) / np.sum(w1) - np.sum(w0 * outcome) / np.sum(w0))


def _aipw(
    arrays: _Arrays,
    propensity: np.ndarray,
    outcome_features: Sequence[int],
    ridge: float,
    tol: float,
    max_iter: int,
) -> float:
    t = arrays.treated
    y = arrays.outcome
    m1 = fit_logistic(arrays.x[t], y[t], outcome_features, ridge, tol, max_iter).predict(arrays.x)
    m0 = fit_logistic(arrays.x[~t], y[~t], outcome_features, ridge, tol, max_iter).predict(arrays.x)
    tf = t.astype(float)
    psi = m1 - m0 + tf * (y - m1) / propensity - (1.0 - tf) * (y - m0) / (1.0 - propensity)
    return float(psi.mean())


def ipw_ate(
    cases: Sequence[MergeCase],
    trim: Tuple[float, float] = (0.05, 0.95),
    refit: bool = True,
    resamples: int = 800,
    seed: int = 0,
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 500,
    propensity_features: FeatureSpec = None,
    n_jobs: int = 1,
) -> EffectEstimate:
    """
    ATE by inverse-probability weighting on the trimmed sample.

    Cases with propensity outside `trim` are dropped, the model is refit on
    the remainder and its predictions are clipped to the trim bounds, so no
    retained unit weighs more than 1/trim[0] before normalization. Every
    bootstrap resample repeats fit, trim and refit.

    Raises:
        EstimationError: trimming leaves an empty arm
    """
    arrays = _arrays(cases)
    features = _feature_columns(propensity_features)

    def estimate(sample: _Arrays) -> Tuple[float, _Arrays, int]:
        subset, propensity, dropped = _trimmed(sample, features, trim, refit, ridge, tol, max_iter)
        return _hajek(subset.treated, subset.outcome, propensity), subset, dropped

    point, subset, dropped = estimate(arrays)
    samples, failed = _bootstrap(lambda draw: estimate(arrays.take(draw))[0], len(arrays), resamples, seed, n_jobs)
    return _summarize(
        Estimator.IPW_ATE,
        point,
        samples,
        subset.n_treated,
        subset.n_control,
        resamples,
        dropped=dropped,
        failed_resamples=failed,
    )


def aipw_ate(
    cases: Sequence[MergeCase],
    trim: Tuple[float, float] = (0.05, 0.95),
    resamples: int = 800,
    seed: int = 0,
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 500,
    propensity_features: FeatureSpec = None,
    outcome_features: FeatureSpec = None,
    n_jobs: int = 1,
) -> EffectEstimate:
    """
    Doubly robust ATE on the trimmed, refitted sample.

    Separate logistic outcome regressions are fit in each arm; an arm with a
    single outcome class predicts that class. The estimate stays consistent
    when either the propensity or the outcome model is correctly specified.
    """
    arrays = _arrays(cases)
    p_features = _feature_columns(propensity_features)
    o_features = _feature_columns(outcome_features)

    def estimate(sample: _Arrays) -> Tuple[float, _Arrays, int]:
        subset, propensity, dropped = _trimmed(sample, p_features, trim, True, ridge, tol, max_iter)
        return _aipw(subset, propensity, o_features, ridge, tol, max_iter), subset, dropped

    point, subset, dropped = estimate(arrays)
    samples, failed = _bootstrap(lambda draw: estimate(arrays.take(draw))[0], len(arrays), resamples, seed, n_jobs)
    return _summarize(
        Estimator.AIPW_ATE,
        point,
        samples,
        subset.n_treated,
        subset.n_control,
        resamples,
        dropped=dropped,
        failed_resamples=failed,
    )


def _smd_arrays(x: np.ndarray, treated: np.ndarray, weights: Optional[np.ndarray], columns: Sequence[int]) -> pd.Series:
    w = np.ones(treated.size) if weights is None else np.asarray(weights, dtype=float)
    w_t, w_c = w[treated], w[~treated]
    if w_t.sum() <= 0 or w_c.sum() <= 0:
        raise EstimationError("standardized mean differences need both arms nonempty")

    values = {}
    for column in columns:
        xt, xc = x[treated, column], x[~treated, column]
        mean_t = np.average(xt, weights=w_t)
        mean_c = np.average(xc, weights=w_c)
        var_t = np.average((xt - mean_t) ** 2, weights=w_t)
        var_c = np.average((xc - mean_c) ** 2, weights=w_c)
        pooled = math.sqrt((var_t + var_c) / 2.0)
        diff = float(mean_t - mean_c)
        if pooled > 0:
            values[COVARIATE_NAMES[column]] = diff / pooled
        elif diff == 0:
            values[COVARIATE_NAMES[column]] = 0.0
        else:
            logger.warning(f"Infinite SMD for {COVARIATE_NAMES[column]}: zero pooled variance")
            values[COVARIATE_NAMES[column]] = math.copysign(math.inf, diff)
    return pd.Series(values, name="smd", dtype=float)


def smd(
    cases: Sequence[MergeCase],
    weights: Optional[Sequence[float]] = None,
    features: FeatureSpec = None,
) -> pd.Series:
    """
    Standardized mean differences per covariate.

    SMD = (mean_t - mean_c) / sqrt((var_t + var_c) / 2), under optional
    per-case weights. Zero pooled variance gives 0 for equal means and a
    signed infinity otherwise.
    """
    arrays = _arrays(cases)
    w = None if weights is None else np.asarray(weights, dtype=float)
    return _smd_arrays(arrays.x, arrays.treated, w, _feature_columns(features))


def balance_table(
    cases: Sequence[MergeCase],
    matching: MatchResult,
    features: FeatureSpec = None,
) -> pd.DataFrame:
    """Covariate balance before and after matching (covariate, smd_pre, smd_post)."""
    arrays = _arrays(cases)
    columns = _feature_columns(features)
    pre = _smd_arrays(arrays.x, arrays.treated, None, columns)
    post = _smd_arrays(arrays.x, arrays.treated, matching.weights, columns)
    return pd.DataFrame({"covariate": pre.index, "smd_pre": pre.values, "smd_post": post.values})


def propensity_histogram(cases: Sequence[MergeCase], model: PropensityModel, bins: int = 20) -> pd.DataFrame:
    """Per-arm propensity counts on equal-width bins over [0, 1]."""
    arrays = _arrays(cases)
    propensity = model.predict(arrays.x)
    edges = np.linspace(0.0, 1.0, bins + 1)
    treated, _ = np.histogram(propensity[arrays.treated], bins=edges)
    control, _ = np.histogram(propensity[~arrays.treated], bins=edges)
    return pd.DataFrame({"bin_low": edges[:-1], "bin_high": edges[1:], "treated": treated, "control": control})


class CausalConfig(BaseModel):
    """Settings for the merge-conflict analysis."""
    estimators: List[Estimator] = Field(default_factory=lambda: list(Estimator))
    k: int = Field(default=3, ge=1, description="Controls per treated case")
    caliper: float = Field(default=0.20, gt=0)
    caliper_scale: CaliperScale = Field(default=CaliperScale.PROPENSITY)
    with_replacement: bool = True
    ridge: float = Field(default=1e-6, gt=0)
    tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=500, ge=1)
    trim_low: float = Field(default=0.05, ge=0.0, lt=0.5)
    trim_high: float = Field(default=0.95, gt=0.5, le=1.0)
    refit: bool = True
    raw_resamples: int = Field(default=2000, ge=1)
    psm_resamples: int = Field(default=2000, ge=1)
    weighting_resamples: int = Field(default=800, ge=1)
    histogram_bins: int = Field(default=20, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _ordered_trim(self) -> "CausalConfig":
        if self.trim_low >= self.trim_high:
            raise ValueError("trim_low must be below trim_high")
        return self

    @property
    def trim(self) -> Tuple[float, float]:
        return (self.trim_low, self.trim_high)


@dataclass
class MergeStatsReport:
    """Summary, balance and overlap tables from one analysis run."""
    summary: pd.DataFrame
    balance: pd.DataFrame
    histogram: pd.DataFrame
    estimates: Dict[Estimator, EffectEstimate]


def run_merge_stats(cases: Sequence[MergeCase], cfg: Optional[CausalConfig] = None, n_jobs: int = 1) -> MergeStatsReport:
    """
    Run the configured estimators and diagnostics.

    Returns:
        MergeStatsReport with SUMMARY_COLUMNS rows in estimator order
    """
    cfg = cfg or CausalConfig()
    fit_kwargs = {"ridge": cfg.ridge, "tol": cfg.tol, "max_iter": cfg.max_iter}
    model = fit_propensity(cases, **fit_kwargs)
    estimates: Dict[Estimator, EffectEstimate] = {}

    for estimator in cfg.estimators:
        if estimator is Estimator.RAW:
            estimates[estimator] = raw_difference(cases, cfg.raw_resamples, cfg.seed)
        elif estimator is Estimator.PSM_ATT:
            estimates[estimator] = psm_att(
                cases, model, cfg.k, cfg.caliper, cfg.caliper_scale, cfg.with_replacement,
                cfg.psm_resamples, cfg.seed, n_jobs,
            )
        elif estimator is Estimator.IPW_ATE:
            estimates[estimator] = ipw_ate(
                cases, cfg.trim, cfg.refit, cfg.weighting_resamples, cfg.seed, n_jobs=n_jobs, **fit_kwargs
            )
        else:
            estimates[estimator] = aipw_ate(
                cases, cfg.trim, cfg.weighting_resamples, cfg.seed, n_jobs=n_jobs, **fit_kwargs
            )
        logger.log_metric(f"{estimator.value}_estimate", estimates[estimator].estimate)

    matching = match_cases(cases, model, cfg.k, cfg.caliper, cfg.caliper_scale, cfg.with_replacement)
    summary = pd.DataFrame([estimates[e].to_dict() for e in cfg.estimators], columns=SUMMARY_COLUMNS)
    return MergeStatsReport(
        summary=summary,
        balance=balance_table(cases, matching),
        histogram=propensity_histogram(cases, model, cfg.histogram_bins),
        estimates=estimates,
    )
