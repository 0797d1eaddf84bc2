"""Classifier and annotation evaluation metrics."""

from dataclasses import dataclass
from typing import Dict, Hashable, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.metrics import cohen_kappa_score

from ..utils.logger import get_logger

__all__ = [
    "Confusion",
    "ClassificationMetrics",
    "AgreementMetrics",
    "Stratum",
    "HTMetrics",
    "classification_metrics",
    "per_class_metrics",
    "agreement_metrics",
    "ht_micro_metrics",
    "confusion_from_labels",
]

logger = get_logger()


@dataclass(frozen=True)
class Confusion:
    """Binary confusion counts; the positive class is ethical-use restriction."""
    tp: float
    fp: float
    fn: float
    tn: float = 0.0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class ClassificationMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float

    def to_dict(self) -> Dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "accuracy": self.accuracy}


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else 0.0


def _f1(precision: float, recall: float) -> float:
    return _ratio(2.0 * precision * recall, precision + recall)


def classification_metrics(confusion: Confusion) -> ClassificationMetrics:
    """
    Precision, recall, F1 and accuracy for the positive class.

    Undefined ratios (zero denominators) are reported as 0.0.
    """
    precision = _ratio(confusion.tp, confusion.tp + confusion.fp)
    recall = _ratio(confusion.tp, confusion.tp + confusion.fn)
    return ClassificationMetrics(
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        accuracy=_ratio(confusion.tp + confusion.tn, confusion.total),
    )


def per_class_metrics(confusion: Confusion, labels: Sequence[str] = ("ethical", "non_ethical")) -> pd.DataFrame:
    """Precision, recall, F1 and support for both classes (class, precision, recall, f1, support)."""
    positive = classification_metrics(confusion)
    negative_precision = _ratio(confusion.tn, confusion.tn + confusion.fn)
    negative_recall = _ratio(confusion.tn, confusion.tn + confusion.fp)
    return pd.DataFrame(
        [
            {
                "class": labels[0],
                "precision": positive.precision,
                "recall": positive.recall,
                "f1": positive.f1,
                "support": confusion.tp + confusion.fn,
            },
            {
                "class": labels[1],
                "precision": negative_precision,
                "recall": negative_recall,
                "f1": _f1(negative_precision, negative_recall),
                "support": confusion.tn + confusion.fp,
            },
        ]
    )


@dataclass
class AgreementMetrics:
    """Observed agreement and Cohen's kappa; kappa is None when undefined."""
    agreement: float
    expected: float
    kappa: Optional[float]
    n: int

    @property
    def kappa_defined(self) -> bool:
        return self.kappa is not None


def agreement_metrics(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> AgreementMetrics:
    """
    Inter-annotator agreement.

    Expected agreement is the sum over labels of the product of the two
    annotators' marginal frequencies. Kappa is undefined when it equals 1.

    Raises:
        ValueError: label lists are empty or differ in length
    """
    if len(labels_a) != len(labels_b):
        raise ValueError("label lists must have equal length")
    if not labels_a:
        raise ValueError("label lists must be nonempty")

    a = pd.Series(list(labels_a), dtype=object)
    b = pd.Series(list(labels_b), dtype=object)
    observed = float((a.values == b.values).mean())
    marginal_a = a.value_counts(normalize=True)
    marginal_b = b.value_counts(normalize=True)
    expected = float(marginal_a.mul(marginal_b, fill_value=0.0).sum())

    if np.isclose(expected, 1.0):
        logger.warning("Cohen's kappa undefined: expected agreement is 1")
        return AgreementMetrics(agreement=observed, expected=expected, kappa=None, n=len(a))
    kappa = float(cohen_kappa_score(a.astype(str), b.astype(str)))
    return AgreementMetrics(agreement=observed, expected=expected, kappa=kappa, n=len(a))


@dataclass(frozen=True)
class Stratum:
    """Sampled confusion counts for one stratum of size `population`."""
    population: int
    sampled: int
    tp: int
    fp: int
    fn: int
    tn: Optional[int] = None

    @property
    def weight(self) -> float:
        return self.population / self.sampled


@dataclass
class HTMetrics:
    """Horvitz-Thompson weighted micro metrics."""
    precision: float
    recall: float
    f1: float
    weighted: Confusion
    sample_accuracy: Optional[float] = None


def ht_micro_metrics(strata: Sequence[Stratum]) -> HTMetrics:
    """
    Micro precision, recall and F1 after expanding each stratum's counts by
    N_s / n_s.

    `sample_accuracy` is reported when every stratum carries TN counts.

    Raises:
        ValueError: a stratum has n_s <= 0 or N_s < n_s
    """
    for stratum in strata:
        if stratum.sampled <= 0 or stratum.population < stratum.sampled:
            raise ValueError(f"invalid stratum sizes N={stratum.population}, n={stratum.sampled}")

    tp = sum(s.weight * s.tp for s in strata)
    fp = sum(s.weight * s.fp for s in strata)
    fn = sum(s.weight * s.fn for s in strata)
    with_tn = all(s.tn is not None for s in strata) and bool(strata)
    tn = sum(s.weight * s.tn for s in strata) if with_tn else 0.0
    weighted = Confusion(tp=tp, fp=fp, fn=fn, tn=tn)
    metrics = classification_metrics(weighted)
    return HTMetrics(
        precision=metrics.precision,
        recall=metrics.recall,
        f1=metrics.f1,
        weighted=weighted,
        sample_accuracy=metrics.accuracy if with_tn else None,
    )


def confusion_from_labels(predicted: Sequence[bool], reference: Sequence[bool]) -> Confusion:
    """Confusion counts from paired boolean predictions and reference labels."""
    if len(predicted) != len(reference):
        raise ValueError("label lists must have equal length")
    p = np.asarray(predicted, dtype=bool)
    r = np.asarray(reference, dtype=bool)
    return Confusion(
        tp=int(np.sum(p & r)),
        fp=int(np.sum(p & ~r)),
        fn=int(np.sum(~p & r)),
        tn=int(np.sum(~p & ~r)),
    )
