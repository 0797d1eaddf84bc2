"""
Tests for classifier evaluation and annotation agreement metrics.
"""
import pytest

from lineage_governance.stats.evaluation import (
    Confusion,
    Stratum,
    agreement_metrics,
    classification_metrics,
    confusion_from_labels,
    ht_micro_metrics,
    per_class_metrics,
)


def test_classification_metrics_reference_counts():
    """TP 81, FN 8, FP 3, TN 108."""
    metrics = classification_metrics(Confusion(tp=81, fp=3, fn=8, tn=108))
    assert metrics.precision == pytest.approx(0.964, abs=1e-3)
    assert metrics.recall == pytest.approx(0.910, abs=1e-3)
    assert metrics.f1 == pytest.approx(0.936, abs=1e-3)
    assert metrics.accuracy == pytest.approx(0.945)


def test_zero_denominators_report_zero():
    """No predicted or actual positives gives zeros, not errors."""
    metrics = classification_metrics(Confusion(tp=0, fp=0, fn=0, tn=5))
    assert metrics.to_dict() == {"precision": 0.0, "recall": 0.0, "f1": 0.0, "accuracy": 1.0}


def test_negative_counts_rejected():
    """Counts must be nonnegative."""
    with pytest.raises(ValueError):
        Confusion(tp=-1, fp=0, fn=0)


def test_per_class_metrics():
    """The negative class swaps the roles of FP and FN."""
    frame = per_class_metrics(Confusion(tp=81, fp=3, fn=8, tn=108)).set_index("class")
    assert frame.loc["ethical", "support"] == 89
    assert frame.loc["non_ethical", "support"] == 111
    assert frame.loc["non_ethical", "precision"] == pytest.approx(108 / 116)
    assert frame.loc["non_ethical", "recall"] == pytest.approx(108 / 111)


def test_agreement_and_kappa():
    """Observed 0.75 against expected 0.5 gives kappa 0.5."""
    result = agreement_metrics(["x", "x", "y", "y"], ["x", "y", "y", "y"])
    assert result.agreement == pytest.approx(0.75)
    assert result.expected == pytest.approx(0.5)
    assert result.kappa == pytest.approx(0.5)
    assert result.n == 4


def test_kappa_undefined_for_single_label():
    """Both annotators using one label leaves kappa undefined."""
    result = agreement_metrics(["x"] * 3, ["x"] * 3)
    assert result.agreement == 1.0
    assert result.kappa is None
    assert not result.kappa_defined


def test_agreement_input_validation():
    """Label lists must be nonempty and aligned."""
    with pytest.raises(ValueError):
        agreement_metrics(["x"], ["x", "y"])
    with pytest.raises(ValueError):
        agreement_metrics([], [])


def test_ht_micro_metrics():
    """Stratum counts are expanded by population over sample size."""
    result = ht_micro_metrics([
        Stratum(population=100, sampled=10, tp=5, fp=1, fn=2),
        Stratum(population=20, sampled=20, tp=3, fp=0, fn=1),
    ])
    assert result.weighted.tp == pytest.approx(53)
    assert result.weighted.fp == pytest.approx(10)
    assert result.weighted.fn == pytest.approx(21)
    assert result.precision == pytest.approx(53 / 63)
    assert result.recall == pytest.approx(53 / 74)
    assert result.sample_accuracy is None


def test_ht_micro_metrics_with_true_negatives():
    """Accuracy is reported only when every stratum has TN counts."""
    result = ht_micro_metrics([Stratum(population=40, sampled=20, tp=8, fp=2, fn=2, tn=8)])
    assert result.sample_accuracy == pytest.approx(0.8)


@pytest.mark.parametrize("population,sampled", [(10, 0), (5, 10)])
def test_ht_invalid_strata(population, sampled):
    """Empty samples and samples larger than the stratum are rejected."""
    with pytest.raises(ValueError):
        ht_micro_metrics([Stratum(population=population, sampled=sampled, tp=0, fp=0, fn=0)])


def test_confusion_from_labels():
    """Paired booleans become confusion counts."""
    confusion = confusion_from_labels([True, True, False, False], [True, False, True, False])
    assert (confusion.tp, confusion.fp, confusion.fn, confusion.tn) == (1, 1, 1, 1)
    with pytest.raises(ValueError):
        confusion_from_labels([True], [])
