"""
Pipeline stages.

Each stage reads its declared input files, writes its reports into an
output directory and returns the paths it wrote. Stages share nothing in
memory, so any stage can run on files saved by an earlier run.
"""

from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import pandas as pd

from ..comparator.registry import (
    ComparatorConfig,
    ReleaseRecord,
    comparator_curve,
    comparator_fit,
    stratified_sample,
)
from ..core.audit import (
    AuditConfig,
    AuditReason,
    AuditState,
    AuditStateValue,
    assign_states,
    conditional_composition,
    state_composition,
)
from ..core.graph import (
    IntentAggregation,
    LineageGraph,
    assign_family,
    build_graph,
    condense,
    ethical_sources,
    hop_distances,
    lineage_depth_summary,
)
from ..core.io import (
    load_edges,
    load_graph,
    load_nodes,
    read_jsonl,
    save_edges,
    save_graph,
    save_nodes,
    write_csv,
    write_json,
    write_jsonl,
)
from ..core.models import Family, MergeSignal, ModelNode
from ..errors import DegenerateFitError, NoSourcesError
from ..licensing.classifier import ClassifierConfig, RestrictionClassifier
from ..licensing.intent import classify_licence
from ..licensing.rules import RuleSet
from ..metrics.horizon import (
    HorizonConfig,
    alpha_sweep,
    auditable_proportion,
    family_curves,
    fit_exponential,
    governance_horizon,
    retention_curve,
)
from ..metrics.sensitivity import sensitivity_sweep
from ..parsing.card_parser import CardParser, ParserConfig
from ..parsing.records import RepositoryRecord
from ..simulation.intervention import InterventionDesign, run_intervention_grid
from ..stats.causal import CausalConfig, build_cases, cases_frame, cases_from_frame, run_merge_stats
from ..synthetic.generator import GeneratorSpec, generate, write_outputs
from ..utils.logger import get_logger

__all__ = [
    "STATE_COLUMNS",
    "CLASSIFICATION_COLUMNS",
    "read_records",
    "read_releases",
    "family_function",
    "classify_stage",
    "parse_cards_stage",
    "build_graph_stage",
    "audit_stage",
    "horizon_stage",
    "simulate_stage",
    "merge_stats_stage",
    "comparator_stage",
    "generate_stage",
]

logger = get_logger()

PathLike = Union[str, Path]

CLASSIFICATION_COLUMNS = ["id", "intent", "restriction_score", "evidence_source", "passthrough", "licence_names"]
STATE_COLUMNS = ["id", "component", "hop", "intent", "state", "reason"]
WARNING_COLUMNS = ["repo_id", "layer", "message"]
DIAGNOSTIC_COLUMNS = ["kind", "child", "parent", "message"]


def read_records(path: PathLike) -> List[RepositoryRecord]:
    return [RepositoryRecord.from_dict(row) for row in read_jsonl(path)]


def read_releases(path: PathLike) -> List[ReleaseRecord]:
    """
    Read releases JSONL.

    Raises:
        ValueError: a (package_name, version) pair appears twice
    """
    releases = [ReleaseRecord.from_dict(row) for row in read_jsonl(path)]
    seen = set()
    for release in releases:
        key = (release.package_name, release.version)
        if key in seen:
            raise ValueError(f"{path}: duplicate release {release.package_name}=={release.version}")
        seen.add(key)
    return releases


def family_function(rules: RuleSet) -> Callable[[str], Family]:
    return partial(
        assign_family,
        family_orgs=rules.vocabulary.family_orgs,
        family_substrings=rules.vocabulary.family_substrings,
    )


def _load(nodes_path: PathLike, edges_path: PathLike, rules: RuleSet) -> LineageGraph:
    return load_graph(nodes_path, edges_path, family_fn=family_function(rules))


def classify_stage(records_path: PathLike, out_dir: PathLike, rules: RuleSet, cfg: Optional[ClassifierConfig] = None) -> List[Path]:
    """Classify every record's licence evidence into nodes with intents."""
    cfg = cfg or ClassifierConfig()
    out_dir = Path(out_dir)
    records = read_records(records_path)
    parser = CardParser(rules.vocabulary)
    classifier = RestrictionClassifier(rules.classifier)
    if cfg.threshold is not None:
        classifier.threshold = cfg.threshold

    nodes, rows = [], []
    for record in records:
        data, _ = parser.front_matter(record)
        names = parser.licence_names(record, data)
        result = classify_licence(names, record.licence_text, rules, classifier, cfg.strict_threshold)
        score = result.score.total if result.score is not None else None
        nodes.append(ModelNode(
            node_id=record.repo_id,
            created_at=record.created_at,
            intent=result.intent,
            restriction_score=score,
            licence_names=names,
            downloads=record.downloads,
            likes=record.likes,
            passthrough=result.passthrough,
        ))
        rows.append({
            "id": record.repo_id,
            "intent": result.intent.value,
            "restriction_score": score,
            "evidence_source": result.evidence.source.value,
            "passthrough": result.passthrough,
            "licence_names": ";".join(names),
        })

    frame = pd.DataFrame(rows, columns=CLASSIFICATION_COLUMNS).sort_values("id", kind="mergesort")
    counts = frame["intent"].value_counts().to_dict()
    logger.info(f"Classified {len(frame)} repositories: {counts}")
    return [
        save_nodes(nodes, out_dir / "classified_nodes.jsonl"),
        write_csv(frame, out_dir / "classification.csv"),
    ]


def parse_cards_stage(
    records_path: PathLike,
    out_dir: PathLike,
    rules: RuleSet,
    cfg: Optional[ParserConfig] = None,
    n_jobs: int = 1,
) -> List[Path]:
    """Extract typed derivation edges and merge signals from model cards."""
    out_dir = Path(out_dir)
    records = read_records(records_path)
    parser = CardParser(rules.vocabulary, cfg)
    extractions = parser.extract_all(records, n_jobs=n_jobs)

    edges = [edge for extraction in extractions for edge in extraction.edges]
    signals = [
        {"id": x.repo_id, "merge_signals": sorted(signal.value for signal in x.merge_signals)}
        for x in sorted(extractions, key=lambda x: x.repo_id)
        if x.merge_signals
    ]
    warnings = [w.to_dict() for x in extractions for w in x.warnings]
    return [
        save_edges(edges, out_dir / "parsed_edges.csv"),
        write_jsonl(signals, out_dir / "merge_signals.jsonl"),
        write_csv(pd.DataFrame(warnings, columns=WARNING_COLUMNS), out_dir / "parse_warnings.csv"),
    ]


def build_graph_stage(
    nodes_path: PathLike,
    edges_path: PathLike,
    out_dir: PathLike,
    rules: RuleSet,
    strict: bool = False,
    signals_path: Optional[PathLike] = None,
) -> List[Path]:
    """Assemble, validate and save the lineage graph with its diagnostics and depth summary."""
    out_dir = Path(out_dir)
    nodes = load_nodes(nodes_path)
    if signals_path is not None and Path(signals_path).is_file():
        by_id: Dict[str, ModelNode] = {node.node_id: node for node in nodes}
        for row in read_jsonl(signals_path):
            node = by_id.get(row["id"])
            if node is not None:
                node.merge_signals |= {MergeSignal(value) for value in row.get("merge_signals", [])}

    graph = build_graph(load_edges(edges_path), nodes, strict=strict, family_fn=family_function(rules))
    nodes_out, edges_out = save_graph(graph, out_dir, prefix="graph_")
    diagnostics = pd.DataFrame([d.__dict__ for d in graph.diagnostics], columns=DIAGNOSTIC_COLUMNS)

    leaves = [node_id for node_id, children in graph.children_of.items() if not children]
    summary = {
        "nodes": len(graph.nodes),
        "edges": graph.edge_count,
        "acyclic": graph.is_acyclic(),
        "ethical_sources": len(ethical_sources(graph)),
        "diagnostics": len(graph.diagnostics),
        "depth": lineage_depth_summary(graph, leaves),
    }
    return [
        nodes_out,
        edges_out,
        write_csv(diagnostics, out_dir / "graph_diagnostics.csv"),
        write_json(summary, out_dir / "graph_summary.json"),
    ]


def _states_frame(graph: LineageGraph, states: Dict[str, AuditState], dag, hops: Dict[str, int]) -> pd.DataFrame:
    rows = [
        {
            "id": node_id,
            "component": dag.member_of[node_id],
            "hop": hops.get(node_id),
            "intent": graph.nodes[node_id].intent.value,
            "state": states[node_id].value.value,
            "reason": states[node_id].reason.value,
        }
        for node_id in sorted(states)
    ]
    frame = pd.DataFrame(rows, columns=STATE_COLUMNS)
    frame["hop"] = frame["hop"].astype("Int64")
    return frame


def audit_stage(
    nodes_path: PathLike,
    edges_path: PathLike,
    out_dir: PathLike,
    rules: RuleSet,
    cfg: Optional[AuditConfig] = None,
    aggregation: IntentAggregation = IntentAggregation.RESTRICTIVE_FIRST,
    sweep: bool = True,
    report_hop: int = 6,
    n_jobs: int = 1,
) -> List[Path]:
    """Assign audit states and write per-node states, per-hop compositions and the policy sweep."""
    out_dir = Path(out_dir)
    base = AuditConfig.model_validate((cfg or AuditConfig()).model_dump(include=set(AuditConfig.model_fields)))
    graph = _load(nodes_path, edges_path, rules)
    dag = condense(graph, aggregation)
    hops = hop_distances(graph, ethical_sources(graph), base.max_hop)
    states = assign_states(dag, base).node_states(dag)

    paths = [
        write_csv(_states_frame(graph, states, dag, hops), out_dir / "audit_states.csv"),
        write_csv(state_composition(states, hops, base.max_hop), out_dir / "state_composition.csv"),
        write_csv(conditional_composition(states, hops, base.max_hop), out_dir / "conditional_composition.csv"),
    ]
    if sweep:
        frame = sensitivity_sweep(dag, hops, alpha=base.alpha, max_hop=base.max_hop, report_hop=report_hop, n_jobs=n_jobs)
        paths.append(write_csv(frame, out_dir / "sensitivity.csv"))
    return paths


def _read_states(states_path: PathLike) -> Dict[str, AuditState]:
    frame = pd.read_csv(states_path, dtype={"id": str, "state": str, "reason": str}, keep_default_na=False)
    return {
        row.id: AuditState(AuditStateValue(row.state), AuditReason(row.reason))
        for row in frame.itertuples(index=False)
    }


def horizon_stage(
    nodes_path: PathLike,
    edges_path: PathLike,
    states_path: PathLike,
    out_dir: PathLike,
    rules: RuleSet,
    cfg: Optional[HorizonConfig] = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> List[Path]:
    """
    Retention curves, D(h), H* with bootstrap intervals over alpha, and the
    exponential decay fit.

    Raises:
        NoSourcesError: the graph has no ethical source
    """
    cfg = cfg or HorizonConfig()
    out_dir = Path(out_dir)
    graph = _load(nodes_path, edges_path, rules)
    sources = ethical_sources(graph)
    if not sources:
        raise NoSourcesError("the lineage graph has no restrictive root")
    hops = hop_distances(graph, sources, cfg.max_hop)
    states = _read_states(states_path)
    missing = sorted(node_id for node_id in hops if node_id not in states)
    if missing:
        raise ValueError(f"{states_path}: no audit state for {len(missing)} reachable node(s), e.g. {missing[0]}")

    d = auditable_proportion(state_composition(states, hops, cfg.max_hop))
    point = governance_horizon(d, cfg.alpha, cfg.max_hop)
    observations = [(hops[node_id], states[node_id]) for node_id in sorted(hops)]
    sweep = alpha_sweep(observations, cfg.alphas, cfg.max_hop, cfg.resamples, seed, n_jobs)

    retention = retention_curve(graph, sources, cfg.max_hop, cfg.unit, n_jobs)
    fit, fit_error = None, None
    try:
        fit = fit_exponential(
            retention,
            anchored=cfg.anchored_fit,
            weights=retention.counts if cfg.weighted else None,
        ).to_dict()
        logger.log_metric("retention_half_life", fit["half_life"], anchored=cfg.anchored_fit)
    except DegenerateFitError as e:
        fit_error = str(e)
        logger.warning(f"Retention fit skipped: {e}")

    family_frames = []
    for family, curve in family_curves(graph, sources, cutoff=cfg.max_hop, unit=cfg.unit).items():
        frame = curve.to_frame()
        frame.insert(0, "family", family)
        family_frames.append(frame)
    families = pd.concat(family_frames, ignore_index=True) if family_frames else pd.DataFrame(
        columns=["family", "hop", "value", "count", "ci_low", "ci_high"]
    )

    logger.log_metric("h_star", point.display(), alpha=cfg.alpha, max_hop=cfg.max_hop)
    summary = {"horizon": point.to_dict(), "display": point.display(), "fit": fit, "fit_error": fit_error}
    return [
        write_csv(retention.to_frame(), out_dir / "retention.csv"),
        write_csv(families, out_dir / "family_retention.csv"),
        write_csv(d.to_frame(), out_dir / "auditable.csv"),
        write_csv(sweep, out_dir / "horizon.csv"),
        write_json(summary, out_dir / "horizon_summary.json"),
    ]


def simulate_stage(
    nodes_path: PathLike,
    edges_path: PathLike,
    out_dir: PathLike,
    rules: RuleSet,
    designs: Optional[List[InterventionDesign]] = None,
    rates: Optional[List[float]] = None,
    realizations: int = 500,
    window: int = 30,
    cascade: bool = True,
    audit_cfg: Optional[AuditConfig] = None,
    aggregation: IntentAggregation = IntentAggregation.RESTRICTIVE_FIRST,
    seed: int = 0,
    n_jobs: int = 1,
) -> List[Path]:
    """Monte-Carlo intervention grid (baseline row plus design x rate rows)."""
    graph = _load(nodes_path, edges_path, rules)
    dag = condense(graph, aggregation)
    grid = run_intervention_grid(
        dag,
        designs=designs if designs is not None else list(InterventionDesign),
        rates=rates if rates is not None else [0.0, 0.25, 0.5, 0.75, 1.0],
        realizations=realizations,
        window=window,
        seed=seed,
        audit_cfg=audit_cfg,
        cascade=cascade,
        n_jobs=n_jobs,
    )
    return [write_csv(grid, Path(out_dir) / "interventions.csv")]


def merge_stats_stage(
    out_dir: PathLike,
    rules: RuleSet,
    cfg: Optional[CausalConfig] = None,
    seed: int = 0,
    cases_path: Optional[PathLike] = None,
    nodes_path: Optional[PathLike] = None,
    edges_path: Optional[PathLike] = None,
    n_jobs: int = 1,
) -> List[Path]:
    """
    Merge-conflict effect estimates with balance and overlap diagnostics.

    Cases come from `cases_path` when given, otherwise from the graph.
    """
    out_dir = Path(out_dir)
    cfg = (cfg or CausalConfig()).model_copy(update={"seed": seed})
    paths: List[Path] = []
    if cases_path is not None:
        cases = cases_from_frame(pd.read_csv(cases_path, dtype={"child_id": str}))
    elif nodes_path is not None and edges_path is not None:
        graph = _load(nodes_path, edges_path, rules)
        cases = build_cases(graph, rules.permissive_set, threshold=rules.classifier.threshold)
        paths.append(write_csv(cases_frame(cases), out_dir / "merge_cases.csv"))
    else:
        raise ValueError("merge-stats needs a merge cases file or a lineage graph")

    report = run_merge_stats(cases, cfg, n_jobs)
    return paths + [
        write_csv(report.summary, out_dir / "merge_stats_summary.csv"),
        write_csv(report.balance, out_dir / "balance.csv"),
        write_csv(report.histogram, out_dir / "propensity_histogram.csv"),
    ]


def comparator_stage(
    releases_path: PathLike,
    out_dir: PathLike,
    rules: RuleSet,
    cfg: Optional[ComparatorConfig] = None,
) -> List[Path]:
    """Stratified sampling, per-hop mean LRI and the exponential fit for the dependency comparator."""
    cfg = cfg or ComparatorConfig()
    out_dir = Path(out_dir)
    releases = read_releases(releases_path)
    sampled = stratified_sample(releases)
    series = comparator_curve(sampled, rules.lri, cfg.cutoff, cfg.root_lri)
    fit, fit_error = None, None
    try:
        fit = comparator_fit(series, cfg.weighted_fit).to_dict()
    except DegenerateFitError as e:
        fit_error = str(e)
        logger.warning(f"Comparator fit skipped: {e}")
    summary = {"releases": len(releases), "sampled_releases": len(sampled), "fit": fit, "fit_error": fit_error}
    return [
        write_csv(series.to_frame(), out_dir / "comparator.csv"),
        write_json(summary, out_dir / "comparator_fit.json"),
    ]


def generate_stage(spec: GeneratorSpec, out_dir: PathLike) -> List[Path]:
    """Generate a synthetic ecosystem into `out_dir`."""
    return write_outputs(generate(spec), out_dir)
