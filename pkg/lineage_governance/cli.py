"""
Command-line interface.

Every analysis stage is exposed as a subcommand working on files; `run`
executes a whole pipeline config and writes a run manifest.

Exit codes: 0 on success, 1 when a stage fails, 2 for invalid
configuration or options.
"""

from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .comparator import ComparatorConfig
from .core.audit import AuditConfig, Reconciliation, UpstreamMissingPolicy
from .core.graph import IntentAggregation
from .errors import ConfigValidationError, LineageGovernanceError
from .licensing.classifier import ClassifierConfig
from .licensing.rules import RuleSet, load_rule_set
from .metrics.horizon import HorizonConfig, RetentionUnit
from .parsing.card_parser import ParserConfig
from .pipeline import stages
from .pipeline.config import load_pipeline_config
from .pipeline.orchestrator import PipelineRunner
from .simulation.intervention import InterventionDesign
from .stats.causal import CausalConfig
from .synthetic.generator import GeneratorSpec
from .utils.config import get_settings_manager
from .utils.logger import get_logger

app = typer.Typer(
    name="lineage-governance",
    help="Governance audits of model derivation lineages",
    add_completion=False,
)
console = Console()
logger = get_logger()

EXIT_STAGE_FAILURE = 1
EXIT_INVALID_CONFIG = 2


@dataclass
class CliState:
    rules_dir: Optional[Path] = None
    seed: Optional[int] = None
    threads: Optional[int] = None
    _rules: Optional[RuleSet] = None

    @property
    def rules(self) -> RuleSet:
        if self._rules is None:
            self._rules = load_rule_set(self.rules_dir)
        return self._rules

    @property
    def n_jobs(self) -> int:
        return get_settings_manager().get_settings().n_jobs

    def seed_or(self, default: int = 0) -> int:
        return self.seed if self.seed is not None else default


@contextmanager
def _guarded(stage: str) -> Iterator[None]:
    """Map engine errors to exit codes and print them."""
    try:
        yield
    except ConfigValidationError as e:
        for message in e.messages:
            console.print(f"[bold red]{message}[/bold red]")
        raise typer.Exit(code=EXIT_INVALID_CONFIG)
    except ValidationError as e:
        console.print(f"[bold red]Invalid options for {stage}:[/bold red]\n{e}")
        raise typer.Exit(code=EXIT_INVALID_CONFIG)
    except (LineageGovernanceError, ValueError, OSError, KeyError) as e:
        console.print(f"[bold red]{stage} failed:[/bold red] {e}")
        raise typer.Exit(code=EXIT_STAGE_FAILURE)


def _report(title: str, paths: List[Path]) -> None:
    table = Table(title=title)
    table.add_column("Output", style="cyan")
    for path in paths:
        table.add_row(str(path))
    console.print(table)


@app.callback()
def main(
    ctx: typer.Context,
    rules_dir: Optional[Path] = typer.Option(None, "--rules-dir", help="Directory overriding the shipped rule tables"),
    threads: Optional[int] = typer.Option(None, "--threads", min=0, help="Worker count; 0 uses all logical cores"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Random seed"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    """Governance audits of model derivation lineages."""
    settings = get_settings_manager().update_settings(threads=threads, rules_dir=rules_dir)
    logger.set_level("DEBUG" if verbose else settings.log_level)
    ctx.obj = CliState(rules_dir=rules_dir, seed=seed, threads=threads)


@app.command()
def classify(
    ctx: typer.Context,
    records: Path = typer.Option(..., "--records", exists=True, dir_okay=False, help="Repository records JSONL"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    threshold: Optional[float] = typer.Option(None, "--threshold", help="Override the restriction threshold"),
    strict_threshold: bool = typer.Option(False, "--strict-threshold", help="Require a score above the threshold"),
):
    """Classify licence evidence into R/P/U intents."""
    state: CliState = ctx.obj
    with _guarded("classify"):
        cfg = ClassifierConfig(threshold=threshold, strict_threshold=strict_threshold)
        _report("classify", stages.classify_stage(records, out, state.rules, cfg))


@app.command("parse-cards")
def parse_cards(
    ctx: typer.Context,
    records: Path = typer.Option(..., "--records", exists=True, dir_okay=False, help="Repository records JSONL"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    type_priority_first: bool = typer.Option(False, "--type-priority-first", help="Edge-type priority outranks evidence tier"),
    no_tables: bool = typer.Option(False, "--no-tables", help="Ignore derivation tables in READMEs"),
    no_sibling_filter: bool = typer.Option(False, "--no-sibling-filter", help="Keep list-context sibling links"),
):
    """Extract derivation edges and merge signals from model cards."""
    state: CliState = ctx.obj
    with _guarded("parse-cards"):
        cfg = ParserConfig(
            tier_first=not type_priority_first,
            parse_tables=not no_tables,
            sibling_filter=not no_sibling_filter,
        )
        _report("parse-cards", stages.parse_cards_stage(records, out, state.rules, cfg, state.n_jobs))


@app.command("build-graph")
def build_graph(
    ctx: typer.Context,
    nodes: Path = typer.Option(..., "--nodes", exists=True, dir_okay=False, help="Nodes JSONL"),
    edges: Path = typer.Option(..., "--edges", exists=True, dir_okay=False, help="Edges CSV"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    signals: Optional[Path] = typer.Option(None, "--signals", help="Merge signals JSONL from parse-cards"),
    strict: bool = typer.Option(False, "--strict", help="Fail on edges to unknown nodes"),
):
    """Assemble and validate the lineage graph."""
    state: CliState = ctx.obj
    with _guarded("build-graph"):
        _report("build-graph", stages.build_graph_stage(nodes, edges, out, state.rules, strict, signals))


@app.command()
def audit(
    ctx: typer.Context,
    nodes: Path = typer.Option(..., "--nodes", exists=True, dir_okay=False, help="Nodes JSONL"),
    edges: Path = typer.Option(..., "--edges", exists=True, dir_okay=False, help="Edges CSV"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    tau: int = typer.Option(2, "--tau", help="Merge-evidence threshold"),
    reconciliation: Reconciliation = typer.Option(Reconciliation.STRICT, "--reconciliation"),
    upstream_missing: UpstreamMissingPolicy = typer.Option(UpstreamMissingPolicy.AMBIGUOUS, "--upstream-missing"),
    max_hop: int = typer.Option(10, "--max-hop"),
    alpha: float = typer.Option(0.20, "--alpha"),
    aggregation: IntentAggregation = typer.Option(IntentAggregation.RESTRICTIVE_FIRST, "--aggregation"),
    sweep: bool = typer.Option(True, "--sweep/--no-sweep", help="Run the policy sensitivity sweep"),
    report_hop: int = typer.Option(6, "--report-hop"),
):
    """Assign audit states and write per-hop compositions."""
    state: CliState = ctx.obj
    with _guarded("audit"):
        cfg = AuditConfig(
            tau=tau, reconciliation=reconciliation, upstream_missing=upstream_missing, max_hop=max_hop, alpha=alpha
        )
        paths = stages.audit_stage(
            nodes, edges, out, state.rules, cfg, aggregation, sweep=sweep, report_hop=report_hop, n_jobs=state.n_jobs
        )
        _report("audit", paths)


@app.command()
def horizon(
    ctx: typer.Context,
    nodes: Path = typer.Option(..., "--nodes", exists=True, dir_okay=False, help="Nodes JSONL"),
    edges: Path = typer.Option(..., "--edges", exists=True, dir_okay=False, help="Edges CSV"),
    states: Path = typer.Option(..., "--states", exists=True, dir_okay=False, help="audit_states.csv"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    alpha: float = typer.Option(0.20, "--alpha"),
    max_hop: int = typer.Option(10, "--max-hop"),
    resamples: int = typer.Option(500, "--resamples"),
    unit: RetentionUnit = typer.Option(RetentionUnit.PAIR, "--unit"),
    anchored: bool = typer.Option(False, "--anchored", help="Fix the fitted amplitude at 1"),
    weighted: bool = typer.Option(False, "--weighted", help="Weight the fit by per-hop counts"),
):
    """Retention curves, governance horizon and decay fit."""
    state: CliState = ctx.obj
    with _guarded("horizon"):
        cfg = HorizonConfig(
            alpha=alpha, max_hop=max_hop, resamples=resamples, unit=unit, anchored_fit=anchored, weighted=weighted
        )
        paths = stages.horizon_stage(nodes, edges, states, out, state.rules, cfg, state.seed_or(), state.n_jobs)
        _report("horizon", paths)


@app.command()
def simulate(
    ctx: typer.Context,
    nodes: Path = typer.Option(..., "--nodes", exists=True, dir_okay=False, help="Nodes JSONL"),
    edges: Path = typer.Option(..., "--edges", exists=True, dir_okay=False, help="Edges CSV"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    design: Optional[List[InterventionDesign]] = typer.Option(None, "--design", help="Repeatable; default all"),
    rate: Optional[List[float]] = typer.Option(None, "--rate", help="Repeatable enforcement rate"),
    realizations: int = typer.Option(500, "--realizations"),
    window: int = typer.Option(30, "--window"),
    cascade: bool = typer.Option(True, "--cascade/--no-cascade"),
    aggregation: IntentAggregation = typer.Option(IntentAggregation.RESTRICTIVE_FIRST, "--aggregation"),
):
    """Monte-Carlo intervention grid."""
    state: CliState = ctx.obj
    with _guarded("simulate"):
        if rate and any(not 0.0 <= r <= 1.0 for r in rate):
            raise ConfigValidationError(["--rate: enforcement rates must lie in [0, 1]"])
        paths = stages.simulate_stage(
            nodes, edges, out, state.rules,
            designs=design or None, rates=rate or None, realizations=realizations, window=window,
            cascade=cascade, aggregation=aggregation, seed=state.seed_or(), n_jobs=state.n_jobs,
        )
        _report("simulate", paths)


@app.command("merge-stats")
def merge_stats(
    ctx: typer.Context,
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    cases: Optional[Path] = typer.Option(None, "--cases", exists=True, dir_okay=False, help="Merge cases CSV"),
    nodes: Optional[Path] = typer.Option(None, "--nodes", exists=True, dir_okay=False, help="Nodes JSONL"),
    edges: Optional[Path] = typer.Option(None, "--edges", exists=True, dir_okay=False, help="Edges CSV"),
    k: int = typer.Option(3, "--k", help="Controls per treated case"),
    caliper: float = typer.Option(0.20, "--caliper"),
    resamples: Optional[int] = typer.Option(None, "--resamples", help="Bootstrap resamples for every estimator"),
):
    """Merge-conflict effect estimates with balance and overlap diagnostics."""
    state: CliState = ctx.obj
    with _guarded("merge-stats"):
        updates = {"k": k, "caliper": caliper}
        if resamples is not None:
            updates.update(raw_resamples=resamples, psm_resamples=resamples, weighting_resamples=resamples)
        cfg = CausalConfig(**updates)
        paths = stages.merge_stats_stage(
            out, state.rules, cfg, seed=state.seed_or(),
            cases_path=cases, nodes_path=nodes, edges_path=edges, n_jobs=state.n_jobs,
        )
        _report("merge-stats", paths)


@app.command()
def comparator(
    ctx: typer.Context,
    releases: Path = typer.Option(..., "--releases", exists=True, dir_okay=False, help="Package releases JSONL"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    cutoff: int = typer.Option(6, "--cutoff", help="Maximum hop"),
    weighted: bool = typer.Option(False, "--weighted", help="Weight the fit by per-hop counts"),
):
    """Dependency-graph LRI decay comparator."""
    state: CliState = ctx.obj
    with _guarded("comparator"):
        cfg = ComparatorConfig(cutoff=cutoff, weighted_fit=weighted)
        _report("comparator", stages.comparator_stage(releases, out, state.rules, cfg))


@app.command()
def generate(
    ctx: typer.Context,
    out: Path = typer.Option(Path("out/synthetic"), "--out", "-o", help="Output directory"),
    spec: Optional[Path] = typer.Option(None, "--spec", exists=True, dir_okay=False, help="GeneratorSpec JSON"),
    n_roots: Optional[int] = typer.Option(None, "--n-roots"),
    generations: Optional[int] = typer.Option(None, "--generations"),
    branching: Optional[float] = typer.Option(None, "--branching"),
    restatement_prob: Optional[float] = typer.Option(None, "--restatement-prob"),
    missing_prob: Optional[float] = typer.Option(None, "--missing-prob"),
    merge_prob: Optional[float] = typer.Option(None, "--merge-prob"),
    orphans: Optional[int] = typer.Option(None, "--orphans", help="Orphan component count"),
    merge_cases: Optional[int] = typer.Option(None, "--merge-cases", help="Also generate this many merge cases"),
):
    """Generate a synthetic lineage ecosystem with ground truth."""
    state: CliState = ctx.obj
    with _guarded("generate"):
        base = GeneratorSpec.model_validate_json(spec.read_text(encoding="utf-8")) if spec else GeneratorSpec()
        overrides = {
            "n_roots": n_roots,
            "generations": generations,
            "branching": branching,
            "restatement_prob": restatement_prob,
            "missing_prob": missing_prob,
            "merge_prob": merge_prob,
            "orphan_component_count": orphans,
            "seed": state.seed,
        }
        data = base.model_dump()
        data.update({key: value for key, value in overrides.items() if value is not None})
        if merge_cases is not None:
            data["causal"] = {**(data.get("causal") or {}), "n_cases": merge_cases}
        _report("generate", stages.generate_stage(GeneratorSpec.model_validate(data), out))


@app.command()
def run(
    ctx: typer.Context,
    config: Path = typer.Argument(..., help="Pipeline config JSON"),
):
    """Run a pipeline config and write its manifest."""
    state: CliState = ctx.obj
    with _guarded("run"):
        pipeline, raw = load_pipeline_config(config)
        if state.seed is not None:
            pipeline = pipeline.model_copy(update={"seed": state.seed})
            raw = {**raw, "seed": state.seed}
        if state.rules_dir is not None:
            pipeline = pipeline.model_copy(update={"rules_dir": state.rules_dir})
        runner = PipelineRunner(pipeline, raw, n_jobs=state.n_jobs if state.threads is not None else None)
        console.print(Panel(f"[bold blue]Running pipeline:[/bold blue] {config}"))
        manifest = runner.run()
        console.print(f"[bold green]Completed stages:[/bold green] {', '.join(manifest.completed_stages)}")
        console.print(f"Manifest: {Path(pipeline.output_dir) / 'manifest.json'}")


@app.command()
def version():
    """Print the tool version."""
    console.print(__version__)


if __name__ == "__main__":
    app()
