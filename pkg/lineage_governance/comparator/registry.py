"""
Package Registry Comparator

Runs the hop analysis on a software-dependency ecosystem where licences are
declared in machine-readable manifests:

- Time-stratified sampling keeps at most one release per package and
  calendar year, chosen by a 64-bit FNV-1a hash of "name|year|version"
- Dependency graph edges point from upstream dependencies to dependants
- Roots are in-degree-zero packages with LRI 1.0 (GPL family)
- Mean LRI per hop with normal-approximation 95% intervals, fitted with
  the same exponential model as the lineage retention curves

Usage:
    sampled = stratified_sample(releases)
    series = comparator_curve(sampled, rules.lri, cutoff=6)
    fit = comparator_fit(series)
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd
from packaging.version import InvalidVersion, Version
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import NoSourcesError
from ..licensing.lri import LriIndex
from ..licensing.rules import LriEntry, LriTable
from ..metrics.horizon import Z_95, DecayFit, HopSeries, fit_exponential
from ..utils.logger import get_logger

__all__ = [
    "ReleaseRecord",
    "ComparatorConfig",
    "ComparatorSeries",
    "fnv1a_64",
    "stratified_sample",
    "package_licences",
    "dependency_graph",
    "comparator_curve",
    "comparator_fit",
    "SERIES_COLUMNS",
]

logger = get_logger()

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK_64 = 0xFFFFFFFFFFFFFFFF

SERIES_COLUMNS = ["hop", "n", "mean_lri", "ci_low", "ci_high"]


class ReleaseRecord(BaseModel):
    """One package release as read from the releases JSONL."""

    model_config = ConfigDict(extra="ignore", frozen=True)

    package_name: str = Field(min_length=1)
    version: str = Field(min_length=1)
    year: int
    declared_deps: Tuple[str, ...] = Field(default=(), description="Names of declared upstream dependencies")
    licence_name: Optional[str] = Field(default=None, description="Declared licence field")

    @field_validator("declared_deps", mode="before")
    @classmethod
    def _deps(cls, value: Any) -> Tuple[str, ...]:
        if value is None:
            return ()
        return tuple(str(dep).strip() for dep in value if str(dep).strip())

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReleaseRecord":
        return cls.model_validate(data)

    @property
    def sampling_key(self) -> str:
        return f"{self.package_name}|{self.year}|{self.version}"


class ComparatorConfig(BaseModel):
    """Settings of the comparator stage."""
    cutoff: int = Field(default=6, ge=0, description="Maximum dependency distance from a source")
    root_lri: float = Field(default=1.0, ge=0.0, le=1.0, description="LRI a root needs to count as a source")
    weighted_fit: bool = Field(default=False, description="Weight the exponential fit by per-hop counts")


@dataclass
class ComparatorSeries:
    """Per-hop sample size, mean LRI and 95% interval."""
    hops: List[int]
    n: List[int]
    mean_lri: List[float]
    ci_low: List[float]
    ci_high: List[float]

    def __post_init__(self):
        if any(not 0.0 <= value <= 1.0 for value in self.mean_lri):
            raise ValueError("mean LRI must lie in [0, 1]")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"hop": self.hops, "n": self.n, "mean_lri": self.mean_lri, "ci_low": self.ci_low, "ci_high": self.ci_high},
            columns=SERIES_COLUMNS,
        )

    def to_hop_series(self) -> HopSeries:
        return HopSeries(
            hops=list(self.hops),
            values=list(self.mean_lri),
            counts=list(self.n),
            ci_low=list(self.ci_low),
            ci_high=list(self.ci_high),
        )


def fnv1a_64(text: str) -> int:
    """64-bit FNV-1a hash of the UTF-8 bytes of `text`."""
    value = FNV_OFFSET_BASIS
    for byte in text.encode("utf-8"):
        value ^= byte
        value = (value * FNV_PRIME) & _MASK_64
    return value


def stratified_sample(releases: Iterable[ReleaseRecord]) -> List[ReleaseRecord]:
    """
    Keep one release per (package, year): the one whose hashed
    "name|year|version" key is smallest.

    The result is ordered by (package, year) and does not depend on the
    input order; sampling a sampled list returns it unchanged.
    """
    chosen: Dict[Tuple[str, int], Tuple[int, str, ReleaseRecord]] = {}
    for release in releases:
        key = (release.package_name, release.year)
        candidate = (fnv1a_64(release.sampling_key), release.version, release)
        current = chosen.get(key)
        if current is None or candidate[:2] < current[:2]:
            chosen[key] = candidate
    return [chosen[key][2] for key in sorted(chosen)]


def _index(lri_table: Union[LriTable, Iterable[LriEntry], LriIndex]) -> LriIndex:
    if isinstance(lri_table, LriIndex):
        return lri_table
    if isinstance(lri_table, LriTable):
        return LriIndex(lri_table.entries)
    return LriIndex(lri_table)


def _version_key(version: str) -> Tuple[int, Any]:
    # Unparseable versions sort below every PEP 440 version, then by text.
    try:
        return (1, Version(version))
    except InvalidVersion:
        return (0, version)


def package_licences(
    sampled: Sequence[ReleaseRecord],
    lri_table: Union[LriTable, Iterable[LriEntry], LriIndex],
) -> Dict[str, Optional[float]]:
    """
    Package-level LRI taken from each package's most recent sampled release.

    Returns:
        package name -> LRI, or None when the licence is not resolvable
    """
    index = _index(lri_table)
    latest: Dict[str, ReleaseRecord] = {}
    for release in sampled:
        current = latest.get(release.package_name)
        if current is None or (release.year, _version_key(release.version)) > (
            current.year, _version_key(current.version)
        ):
            latest[release.package_name] = release
    return {name: index.lookup(latest[name].licence_name) for name in sorted(latest)}


def dependency_graph(sampled: Sequence[ReleaseRecord]) -> nx.DiGraph:
    """Package-level graph with edges from each declared dependency to its dependant."""
    graph = nx.DiGraph()
    for release in sampled:
        graph.add_node(release.package_name)
        for dep in release.declared_deps:
            if dep != release.package_name:
                graph.add_edge(dep, release.package_name)
    return graph


def comparator_curve(
    sampled: Sequence[ReleaseRecord],
    lri_table: Union[LriTable, Iterable[LriEntry], LriIndex],
    cutoff: int = 6,
    root_lri: float = 1.0,
) -> ComparatorSeries:
    """
    Mean LRI by dependency distance from the nearest GPL-family root.

    Packages whose licence does not resolve are traversed but excluded from
    the means. Hops with no resolvable package are omitted. The interval
    half-width is 1.96 * sd / sqrt(n) with the sample standard deviation,
    and zero when n == 1.

    Args:
        sampled: Stratified releases
        lri_table: LRI table, entries or index
        cutoff: Maximum hop
        root_lri: LRI value that qualifies an in-degree-zero package as a source

    Raises:
        NoSourcesError: no in-degree-zero package has LRI equal to `root_lri`
    """
    lri = package_licences(sampled, lri_table)
    graph = dependency_graph(sampled)
    roots = sorted(
        name for name, degree in graph.in_degree()
        if degree == 0 and lri.get(name) is not None and math.isclose(lri[name], root_lri)
    )
    if not roots:
        raise NoSourcesError(f"no dependency root has LRI {root_lri}")

    distances = nx.multi_source_dijkstra_path_length(graph, roots, cutoff=cutoff)
    by_hop: Dict[int, List[float]] = {}
    for name in sorted(distances):
        value = lri.get(name)
        if value is None:
            continue
        by_hop.setdefault(int(distances[name]), []).append(value)

    hops, counts, means, lows, highs = [], [], [], [], []
    for hop in sorted(by_hop):
        values = np.asarray(by_hop[hop], dtype=float)
        mean = float(values.mean())
        half = Z_95 * float(values.std(ddof=1)) / math.sqrt(values.size) if values.size > 1 else 0.0
        hops.append(hop)
        counts.append(int(values.size))
        means.append(mean)
        lows.append(mean - half)
        highs.append(mean + half)

    excluded = sum(1 for name in distances if lri.get(name) is None)
    if excluded:
        logger.info(f"Comparator excluded {excluded} reachable package(s) without a resolvable licence")
    logger.debug(f"Comparator: {len(roots)} root(s), {len(distances)} reachable package(s)")
    return ComparatorSeries(hops=hops, n=counts, mean_lri=means, ci_low=lows, ci_high=highs)


def comparator_fit(series: ComparatorSeries, weighted: bool = False) -> DecayFit:
    """Unanchored exponential fit of the per-hop mean LRI."""
    return fit_exponential(series.to_hop_series(), anchored=False, weights=series.n if weighted else None)
