"""
Tests for the package-registry comparator.
"""
import math
import random

import pytest

from lineage_governance.comparator.registry import (
    SERIES_COLUMNS,
    ComparatorSeries,
    ReleaseRecord,
    comparator_curve,
    comparator_fit,
    dependency_graph,
    fnv1a_64,
    package_licences,
    stratified_sample,
)
from lineage_governance.errors import NoSourcesError
from lineage_governance.licensing.rules import LriEntry

LRI = [
    LriEntry(licence_name="GPL-3.0", lri=1.0),
    LriEntry(licence_name="LGPL-3.0", lri=0.75),
    LriEntry(licence_name="MPL-2.0", lri=0.5),
    LriEntry(licence_name="MIT", lri=0.0),
]


def _release(name, licence, deps=(), year=2023, version="1.0"):
    return ReleaseRecord(package_name=name, version=version, year=year, declared_deps=list(deps), licence_name=licence)


def test_fnv1a_reference_vectors():
    """Published FNV-1a 64-bit test vectors."""
    assert fnv1a_64("") == 0xCBF29CE484222325
    assert fnv1a_64("a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64("foobar") == 0x85944171F73967E8


def test_release_record_cleans_dependencies():
    """Blank dependency names are dropped and None means no dependencies."""
    record = ReleaseRecord.from_dict(
        {"package_name": "x", "version": "1", "year": 2020, "declared_deps": [" a ", ""], "extra": 1}
    )
    assert record.declared_deps == ("a",)
    assert ReleaseRecord(package_name="x", version="1", year=2020, declared_deps=None).declared_deps == ()
    assert record.sampling_key == "x|2020|1"


def test_sampling_one_release_per_year_is_identity():
    """Already-stratified input is returned unchanged."""
    releases = [_release("a", "MIT", year=2020), _release("a", "MIT", year=2021), _release("b", "MIT")]
    assert stratified_sample(releases) == releases


def test_sampling_keeps_minimum_hash():
    """Of several versions in a year exactly one survives: the smallest hash."""
    releases = [_release("pkg", "MIT", version=v) for v in ("1.0", "1.1", "1.2")]
    sampled = stratified_sample(releases)
    assert len(sampled) == 1
    assert sampled[0] == min(releases, key=lambda r: fnv1a_64(r.sampling_key))


def test_sampling_is_order_independent_and_idempotent():
    """Shuffled inputs give the same survivors; resampling changes nothing."""
    releases = [
        _release(f"pkg{p}", "MIT", year=year, version=f"{year}.{minor}")
        for p in range(5)
        for year in (2019, 2020, 2021)
        for minor in range(4)
    ]
    expected = stratified_sample(releases)
    assert len(expected) == 15
    rng = random.Random(0)
    for _ in range(100):
        shuffled = releases[:]
        rng.shuffle(shuffled)
        assert stratified_sample(shuffled) == expected
    assert stratified_sample(expected) == expected


def test_package_licence_from_latest_release():
    """The most recent sampled release decides the package licence."""
    sampled = [_release("a", "MIT", year=2019), _release("a", "GPL-3.0", year=2021), _release("b", "Custom")]
    assert package_licences(sampled, LRI) == {"a": 1.0, "b": None}


def test_package_licence_compares_versions_numerically():
    """Within a year, 10.0 is newer than 9.0 and unparseable versions rank last."""
    sampled = [
        _release("a", "GPL-3.0", year=2021, version="10.0"),
        _release("a", "MIT", year=2021, version="9.0"),
        _release("b", "MIT", year=2021, version="2.0"),
        _release("b", "GPL-3.0", year=2021, version="nightly"),
    ]
    assert package_licences(sampled, LRI) == {"a": 1.0, "b": 0.0}


def test_dependency_graph_direction():
    """Edges point from dependency to dependant; self-dependencies are ignored."""
    graph = dependency_graph([_release("app", "MIT", deps=["lib", "app"]), _release("lib", "GPL-3.0")])
    assert graph.has_edge("lib", "app")
    assert not graph.has_edge("app", "app")


def test_curve_on_chain():
    """gpl -> mit -> mit gives means 1, 0, 0."""
    sampled = [
        _release("gpl", "GPL-3.0"),
        _release("mit1", "MIT", deps=["gpl"]),
        _release("mit2", "MIT", deps=["mit1"]),
    ]
    series = comparator_curve(sampled, LRI)
    assert series.hops == [0, 1, 2]
    assert series.mean_lri == [1.0, 0.0, 0.0]
    assert series.ci_low == series.ci_high == [1.0, 0.0, 0.0]


def test_curve_per_hop_means_and_intervals():
    """Per-hop multisets reproduce the expected means with sample-SD intervals."""
    sampled = [_release("root", "GPL-3.0")]
    sampled += [_release(f"h1-{i:03d}", "GPL-3.0" if i < 53 else "MIT", deps=["root"]) for i in range(100)]
    sampled += [_release(f"h2-{i:03d}", "GPL-3.0" if i < 42 else "MIT", deps=["h1-000"]) for i in range(100)]
    frame = comparator_curve(sampled, LRI).to_frame().set_index("hop")
    assert frame.loc[0, "mean_lri"] == 1.0
    assert frame.loc[1, "mean_lri"] == pytest.approx(0.530)
    assert frame.loc[2, "mean_lri"] == pytest.approx(0.420)
    assert frame.loc[1, "n"] == 100
    half = 1.96 * math.sqrt(0.53 * 0.47 * 100 / 99) / 10
    assert frame.loc[1, "ci_high"] - frame.loc[1, "mean_lri"] == pytest.approx(half, rel=1e-3)


def test_curve_excludes_unresolvable_but_traverses_them():
    """Packages without a resolvable licence leave the means but still carry distance."""
    sampled = [
        _release("root", "GPL-3.0"),
        _release("mystery", "Proprietary", deps=["root"]),
        _release("leaf", "MPL-2.0", deps=["mystery"]),
    ]
    series = comparator_curve(sampled, LRI)
    assert series.hops == [0, 2]
    assert series.mean_lri == [1.0, 0.5]


def test_curve_cutoff():
    """Packages beyond the cutoff are not reported."""
    sampled = [_release("p0", "GPL-3.0")] + [_release(f"p{i}", "MIT", deps=[f"p{i - 1}"]) for i in range(1, 9)]
    assert comparator_curve(sampled, LRI, cutoff=6).hops == list(range(7))


def test_curve_without_gpl_roots():
    """A GPL package that depends on something is not a root."""
    sampled = [_release("lib", "MIT"), _release("gpl", "GPL-3.0", deps=["lib"])]
    with pytest.raises(NoSourcesError):
        comparator_curve(sampled, LRI)


def test_interval_shrinks_with_sample_size():
    """Quadrupling n with a fixed per-hop spread halves the interval."""
    def width(n):
        sampled = [_release("root", "GPL-3.0")]
        sampled += [_release(f"c{i:04d}", "GPL-3.0" if i % 2 else "MIT", deps=["root"]) for i in range(n)]
        series = comparator_curve(sampled, LRI)
        return series.ci_high[1] - series.ci_low[1]

    small, large = width(100), width(400)
    assert small / large == pytest.approx(2.0 * math.sqrt((100 / 99) / (400 / 399)))


def test_series_validation_and_frame():
    """Means outside [0, 1] are rejected; frames carry the documented columns."""
    with pytest.raises(ValueError):
        ComparatorSeries(hops=[0], n=[1], mean_lri=[1.5], ci_low=[1.5], ci_high=[1.5])
    series = ComparatorSeries(hops=[0, 1], n=[1, 2], mean_lri=[1.0, 0.5], ci_low=[1.0, 0.2], ci_high=[1.0, 0.8])
    assert list(series.to_frame().columns) == SERIES_COLUMNS


def test_comparator_fit_exact_decay():
    """Halving means fit a one-hop half-life."""
    series = ComparatorSeries(
        hops=[0, 1, 2, 3],
        n=[1, 10, 10, 10],
        mean_lri=[1.0, 0.5, 0.25, 0.125],
        ci_low=[1.0, 0.5, 0.25, 0.125],
        ci_high=[1.0, 0.5, 0.25, 0.125],
    )
    fit = comparator_fit(series)
    assert not fit.anchored
    assert fit.half_life == pytest.approx(1.0, rel=1e-4)
    assert fit.r_squared == pytest.approx(1.0)
