"""
Pipeline Orchestrator

Runs the configured stages in their fixed order, wiring each stage's
outputs into the next one's inputs, and always leaves a run manifest
behind, including when a stage fails.

Usage:
    from lineage_governance.pipeline import run_pipeline

    manifest = run_pipeline("pipeline.json")
    print(manifest.completed_stages)
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from .. import __version__
from ..errors import LineageGovernanceError, StageError
from ..licensing.rules import RuleSet, load_rule_set
from ..utils.config import get_settings_manager
from ..utils.logger import get_logger
from . import stages
from .config import PipelineConfig, Stage, load_pipeline_config
from .manifest import RunManifest, sha256_file, stage_seed

__all__ = ["PipelineRunner", "run_pipeline", "SEEDED_STAGES"]

logger = get_logger()

SEEDED_STAGES = (Stage.GENERATE, Stage.HORIZON, Stage.SIMULATE, Stage.MERGE_STATS)
STAGE_FAILURES = (LineageGovernanceError, ValueError, OSError, KeyError)

SYNTHETIC_DIR = "synthetic"


class PipelineRunner:
    """
    Executes one validated pipeline config.

    Stage inputs come from earlier stages of the same run when they are
    selected, otherwise from the `inputs` section of the config.
    """

    def __init__(
        self,
        config: PipelineConfig,
        raw: Optional[Dict[str, Any]] = None,
        rules: Optional[RuleSet] = None,
        n_jobs: Optional[int] = None,
    ):
        self.config = config
        self.raw = raw if raw is not None else config.model_dump(mode="json")
        self.out_dir = Path(config.output_dir)
        self.rules = rules
        self.n_jobs = n_jobs if n_jobs is not None else self._default_jobs()
        self.selected = set(config.stages)
        self.seeds = {stage.value: stage_seed(stage.value, config.seed) for stage in SEEDED_STAGES}

    def _default_jobs(self) -> int:
        settings = get_settings_manager().get_settings()
        if self.config.threads is not None:
            settings = settings.model_copy(update={"threads": self.config.threads})
        return settings.n_jobs

    def _out(self, name: str) -> Path:
        return self.out_dir / name

    def _pick(self, *candidates: Optional[Path], what: str) -> Path:
        for candidate in candidates:
            if candidate is not None:
                return candidate
        raise ValueError(f"no {what} available: select the producing stage or set it under inputs")

    def _ran(self, stage: Stage, path: Path) -> Optional[Path]:
        return path if stage in self.selected else None

    def _graph_paths(self):
        inputs = self.config.inputs
        nodes = self._pick(self._ran(Stage.BUILD_GRAPH, self._out("graph_nodes.jsonl")), inputs.nodes, what="graph nodes")
        edges = self._pick(self._ran(Stage.BUILD_GRAPH, self._out("graph_edges.csv")), inputs.edges, what="graph edges")
        return nodes, edges

    def _run_generate(self) -> List[Path]:
        spec = self.config.generate.model_copy(update={"seed": self.seeds[Stage.GENERATE.value]})
        return stages.generate_stage(spec, self._out(SYNTHETIC_DIR))

    def _run_parse_cards(self) -> List[Path]:
        records = self._pick(self.config.inputs.records, what="repository records")
        return stages.parse_cards_stage(records, self.out_dir, self.rules, self.config.parser, self.n_jobs)

    def _run_classify(self) -> List[Path]:
        records = self._pick(self.config.inputs.records, what="repository records")
        return stages.classify_stage(records, self.out_dir, self.rules, self.config.classify)

    def _run_build_graph(self) -> List[Path]:
        inputs = self.config.inputs
        nodes = self._pick(
            self._ran(Stage.CLASSIFY, self._out("classified_nodes.jsonl")),
            self._ran(Stage.GENERATE, self._out(SYNTHETIC_DIR) / "nodes.jsonl"),
            inputs.nodes,
            what="nodes",
        )
        edges = self._pick(
            self._ran(Stage.PARSE_CARDS, self._out("parsed_edges.csv")),
            self._ran(Stage.GENERATE, self._out(SYNTHETIC_DIR) / "edges.csv"),
            inputs.edges,
            what="edges",
        )
        signals = self._ran(Stage.PARSE_CARDS, self._out("merge_signals.jsonl"))
        return stages.build_graph_stage(nodes, edges, self.out_dir, self.rules, self.config.graph.strict, signals)

    def _run_audit(self) -> List[Path]:
        nodes, edges = self._graph_paths()
        cfg = self.config.audit
        return stages.audit_stage(
            nodes, edges, self.out_dir, self.rules, cfg, self.config.graph.aggregation,
            sweep=cfg.sweep, report_hop=cfg.report_hop, n_jobs=self.n_jobs,
        )

    def _run_horizon(self) -> List[Path]:
        nodes, edges = self._graph_paths()
        states = self._pick(self._ran(Stage.AUDIT, self._out("audit_states.csv")), what="audit states")
        return stages.horizon_stage(
            nodes, edges, states, self.out_dir, self.rules, self.config.horizon,
            seed=self.seeds[Stage.HORIZON.value], n_jobs=self.n_jobs,
        )

    def _run_simulate(self) -> List[Path]:
        nodes, edges = self._graph_paths()
        cfg = self.config.simulate
        return stages.simulate_stage(
            nodes, edges, self.out_dir, self.rules,
            designs=cfg.designs, rates=cfg.rates, realizations=cfg.realizations, window=cfg.window,
            cascade=cfg.cascade, audit_cfg=self.config.audit, aggregation=self.config.graph.aggregation,
            seed=self.seeds[Stage.SIMULATE.value], n_jobs=self.n_jobs,
        )

    def _run_merge_stats(self) -> List[Path]:
        cases = self.config.inputs.merge_cases
        if cases is None:
            cases = self._ran(Stage.GENERATE, self._out(SYNTHETIC_DIR) / "merge_cases.csv")
            if cases is not None and not cases.is_file():
                cases = None
        nodes = edges = None
        if cases is None:
            nodes, edges = self._graph_paths()
        return stages.merge_stats_stage(
            self.out_dir, self.rules, self.config.merge_stats, seed=self.seeds[Stage.MERGE_STATS.value],
            cases_path=cases, nodes_path=nodes, edges_path=edges, n_jobs=self.n_jobs,
        )

    def _run_comparator(self) -> List[Path]:
        releases = self._pick(self.config.inputs.releases, what="package releases")
        return stages.comparator_stage(releases, self.out_dir, self.rules, self.config.comparator)

    def _handlers(self) -> Dict[Stage, Callable[[], List[Path]]]:
        return {
            Stage.GENERATE: self._run_generate,
            Stage.PARSE_CARDS: self._run_parse_cards,
            Stage.CLASSIFY: self._run_classify,
            Stage.BUILD_GRAPH: self._run_build_graph,
            Stage.AUDIT: self._run_audit,
            Stage.HORIZON: self._run_horizon,
            Stage.SIMULATE: self._run_simulate,
            Stage.MERGE_STATS: self._run_merge_stats,
            Stage.COMPARATOR: self._run_comparator,
        }

    def _input_digests(self) -> Dict[str, Dict[str, str]]:
        given = self.raw.get("inputs") or {}
        digests = {}
        for name, path in self.config.inputs.given().items():
            if path.is_file():
                digests[name] = {"path": str(given.get(name, path)), "sha256": sha256_file(path)}
        return digests

    def run(self) -> RunManifest:
        """
        Run every selected stage in canonical order.

        Returns:
            The written manifest; `failed_stage` is set when a stage failed

        Raises:
            StageError: after the manifest is written, when a stage failed
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(
            config=self.raw,
            tool_version=__version__,
            seed=self.config.seed,
            stage_seeds={stage.value: self.seeds[stage.value] for stage in SEEDED_STAGES if stage in self.selected},
        )
        failure: Optional[StageError] = None
        try:
            if self.rules is None:
                self.rules = load_rule_set(self.config.rules_dir)
            manifest.inputs = self._input_digests()
            handlers = self._handlers()
            for stage in Stage:
                if stage not in self.selected:
                    continue
                logger.log_stage_event(stage.value, "started")
                try:
                    written = handlers[stage]()
                except STAGE_FAILURES as e:
                    failure = e if isinstance(e, StageError) else StageError(stage.value, str(e))
                    manifest.failed_stage = stage.value
                    manifest.error = str(e)
                    logger.log_stage_event(stage.value, "failed", level=logging.ERROR, error=e)
                    break
                manifest.completed_stages.append(stage.value)
                logger.log_stage_event(stage.value, "completed", files=len(written))
        except STAGE_FAILURES as e:
            failure = StageError("setup", str(e))
            manifest.failed_stage = "setup"
            manifest.error = str(e)
        finally:
            manifest.write(self.out_dir)
        if failure is not None:
            raise failure
        return manifest


def run_pipeline(config_path: Union[str, Path], n_jobs: Optional[int] = None, rules: Optional[RuleSet] = None) -> RunManifest:
    """
    Load a config file and run it.

    Raises:
        ConfigValidationError: the config is invalid; nothing is written
        StageError: a stage failed; the manifest records which one
    """
    config, raw = load_pipeline_config(config_path)
    return PipelineRunner(config, raw, rules=rules, n_jobs=n_jobs).run()
