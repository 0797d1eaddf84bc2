"""Software-dependency comparator ecosystem."""

from .registry import (
    SERIES_COLUMNS,
    ComparatorConfig,
    ComparatorSeries,
    ReleaseRecord,
    comparator_curve,
    comparator_fit,
    dependency_graph,
    fnv1a_64,
    package_licences,
    stratified_sample,
)

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
