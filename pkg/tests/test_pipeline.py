"""
Tests for pipeline configuration, stage wiring and run manifests.
"""
import json
import shutil

import pandas as pd
import pytest

from lineage_governance.core.io import write_jsonl
from lineage_governance.errors import ConfigValidationError, StageError
from lineage_governance.pipeline import stages
from lineage_governance.pipeline.config import Stage, load_pipeline_config
from lineage_governance.pipeline.manifest import MANIFEST_NAME, stage_seed
from lineage_governance.pipeline.orchestrator import run_pipeline

SYNTHETIC_CONFIG = {
    "schema_version": 1,
    "seed": 7,
    "output_dir": "out",
    "stages": ["generate", "build-graph", "audit", "horizon", "simulate", "merge-stats"],
    "generate": {
        "n_roots": 12,
        "generations": 4,
        "branching": 1.5,
        "merge_prob": 0.2,
        "orphan_component_count": 2,
        "causal": {"n_cases": 400, "true_ate": 0.05, "base_rate": 0.2},
    },
    "audit": {"max_hop": 6, "report_hop": 2},
    "horizon": {"max_hop": 6, "resamples": 20, "alphas": [0.2, 0.4]},
    "simulate": {"rates": [0.0, 1.0], "realizations": 5, "window": 6},
    "merge_stats": {"raw_resamples": 20, "psm_resamples": 20, "weighting_resamples": 3},
}


def _write_config(directory, config):
    path = directory / "pipeline.json"
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path


def test_load_config_resolves_relative_paths(tmp_path):
    """Paths are anchored at the config file's directory."""
    config, raw = load_pipeline_config(_write_config(tmp_path, {
        "schema_version": 1,
        "stages": ["audit"],
        "inputs": {"nodes": "data/nodes.jsonl", "edges": "/abs/edges.csv"},
    }))
    assert config.output_dir == tmp_path.resolve() / "out"
    assert config.inputs.nodes == tmp_path.resolve() / "data" / "nodes.jsonl"
    assert str(config.inputs.edges) == "/abs/edges.csv"
    assert raw["inputs"]["nodes"] == "data/nodes.jsonl"
    assert config.stages == [Stage.AUDIT]


def test_invalid_config_reports_line(tmp_path):
    """Schema violations name the file, the line and the field."""
    text = '{\n  "schema_version": 1,\n  "stages": ["audit"],\n  "audit": {"tau": 0}\n}\n'
    path = tmp_path / "bad.json"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigValidationError) as info:
        load_pipeline_config(path)
    assert any(":4: audit.tau:" in message for message in info.value.messages)


@pytest.mark.parametrize(
    "document",
    [
        '{"schema_version": 2, "stages": ["audit"]}',
        '{"schema_version": 1, "stages": []}',
        '{"schema_version": 1, "stages": ["audit", "audit"]}',
        '{"schema_version": 1, "stages": ["audit"], "unknown": true}',
        '{"schema_version": 1, "stages": ["audit"], "simulate": {"rates": [1.5]}}',
        '{"schema_version": 1, "stages": ["audit"]',
        '[1, 2]',
    ],
    ids=["version", "no-stages", "repeated", "extra-key", "rate", "json", "not-object"],
)
def test_config_rejections(tmp_path, document):
    """Malformed documents raise a validation error."""
    path = tmp_path / "bad.json"
    path.write_text(document, encoding="utf-8")
    with pytest.raises(ConfigValidationError):
        load_pipeline_config(path)


def test_missing_config_file(tmp_path):
    """An unreadable config is a validation error too."""
    with pytest.raises(ConfigValidationError):
        load_pipeline_config(tmp_path / "absent.json")


def test_stage_seeds_are_independent():
    """Each stage derives its own seed from the run seed."""
    assert stage_seed("horizon", 7) == stage_seed("horizon", 7)
    assert stage_seed("horizon", 7) != stage_seed("simulate", 7)
    assert stage_seed("horizon", 7) != stage_seed("horizon", 8)
    assert 0 <= stage_seed("generate", 0) < 2 ** 32


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    """One full synthetic pipeline run."""
    directory = tmp_path_factory.mktemp("synthetic")
    manifest = run_pipeline(_write_config(directory, SYNTHETIC_CONFIG), n_jobs=1)
    return directory, manifest


def test_pipeline_runs_every_stage(synthetic_run):
    """All selected stages complete and the manifest lists their outputs."""
    directory, manifest = synthetic_run
    assert manifest.completed_stages == SYNTHETIC_CONFIG["stages"]
    assert manifest.failed_stage is None
    assert set(manifest.stage_seeds) == {"generate", "horizon", "simulate", "merge-stats"}
    for name in [
        "synthetic/nodes.jsonl",
        "graph_nodes.jsonl",
        "graph_summary.json",
        "audit_states.csv",
        "sensitivity.csv",
        "horizon.csv",
        "horizon_summary.json",
        "interventions.csv",
        "merge_stats_summary.csv",
    ]:
        assert name in manifest.outputs
    written = json.loads((directory / "out" / MANIFEST_NAME).read_text(encoding="utf-8"))
    assert written["config"] == SYNTHETIC_CONFIG
    assert "created_at" not in written


def test_pipeline_outputs_are_consistent(synthetic_run):
    """Audit states cover the graph and the sweep has the full default grid."""
    directory, _ = synthetic_run
    out = directory / "out"
    states = pd.read_csv(out / "audit_states.csv")
    summary = json.loads((out / "graph_summary.json").read_text(encoding="utf-8"))
    assert len(states) == summary["nodes"]
    assert set(states["state"]) <= {"Decidable", "Inconsistent", "UndecidableMissing", "UndecidableAmbiguous"}
    assert len(pd.read_csv(out / "sensitivity.csv")) == 24
    assert pd.read_csv(out / "interventions.csv")["design"].iloc[0] == "none"
    assert len(pd.read_csv(out / "horizon.csv")) == 2


def test_pipeline_rerun_is_byte_identical(synthetic_run):
    """Rerunning the same config reproduces the manifest byte for byte."""
    directory, _ = synthetic_run
    out = directory / "out"
    before = (out / MANIFEST_NAME).read_bytes()
    shutil.rmtree(out)
    run_pipeline(directory / "pipeline.json", n_jobs=2)
    assert (out / MANIFEST_NAME).read_bytes() == before


def test_audit_only_rerun_reproduces_states(synthetic_run, tmp_path):
    """An audit-only run on the saved graph matches the full run."""
    directory, _ = synthetic_run
    out = directory / "out"
    manifest = run_pipeline(_write_config(tmp_path, {
        "schema_version": 1,
        "output_dir": "audit",
        "stages": ["audit"],
        "inputs": {"nodes": str(out / "graph_nodes.jsonl"), "edges": str(out / "graph_edges.csv")},
        "audit": {"max_hop": 6, "report_hop": 2},
    }), n_jobs=1)
    assert set(manifest.inputs) == {"nodes", "edges"}
    assert (tmp_path / "audit" / "audit_states.csv").read_bytes() == (out / "audit_states.csv").read_bytes()


def test_failed_stage_still_writes_manifest(tmp_path):
    """A stage without inputs fails, and the manifest records where."""
    path = _write_config(tmp_path, {"schema_version": 1, "stages": ["audit"]})
    with pytest.raises(StageError) as info:
        run_pipeline(path, n_jobs=1)
    assert info.value.stage == "audit"
    manifest = json.loads((tmp_path / "out" / MANIFEST_NAME).read_text(encoding="utf-8"))
    assert manifest["failed_stage"] == "audit"
    assert manifest["completed_stages"] == []
    assert manifest["error"]


def test_card_stages_feed_graph(tmp_path, rules):
    """Classification and card parsing produce the inputs of the graph stage."""
    records = tmp_path / "records.jsonl"
    write_jsonl([
        {"id": "meta-llama/Llama-3-8B", "license": "llama3"},
        {"id": "alice/chat", "license": "mit", "tags": ["base_model:finetune:meta-llama/Llama-3-8B"]},
        {"id": "bob/quiet", "yaml_text": "base_model: alice/chat"},
    ], records)
    manifest = run_pipeline(_write_config(tmp_path, {
        "schema_version": 1,
        "stages": ["parse-cards", "classify", "build-graph", "audit"],
        "inputs": {"records": "records.jsonl"},
    }), n_jobs=1, rules=rules)
    assert manifest.completed_stages == ["parse-cards", "classify", "build-graph", "audit"]
    states = pd.read_csv(tmp_path / "out" / "audit_states.csv").set_index("id")
    assert states.loc["meta-llama/Llama-3-8B", "intent"] == "R"
    assert states.loc["alice/chat", "state"] == "Decidable"
    assert states.loc["bob/quiet", "state"] == "UndecidableMissing"
    classification = pd.read_csv(tmp_path / "out" / "classification.csv").set_index("id")
    assert classification.loc["alice/chat", "intent"] == "P"


def test_comparator_stage(tmp_path, rules):
    """The comparator stage samples, summarizes and fits."""
    releases = tmp_path / "releases.jsonl"
    rows = [{"package_name": "root", "version": "1.0", "year": 2020, "licence_name": "GPL-3.0"}]
    rows += [
        {"package_name": f"dep{i}", "version": "1.0", "year": 2021, "declared_deps": [f"dep{i - 1}" if i else "root"],
         "licence_name": "GPL-3.0" if i % 3 == 0 else "MIT"}
        for i in range(6)
    ]
    write_jsonl(rows, releases)
    paths = stages.comparator_stage(releases, tmp_path / "out", rules)
    frame = pd.read_csv(paths[0])
    assert frame["hop"].tolist() == list(range(7))
    assert frame.loc[0, "mean_lri"] == 1.0
    summary = json.loads(paths[1].read_text(encoding="utf-8"))
    assert summary["sampled_releases"] == 7


def test_duplicate_releases_rejected(tmp_path):
    """The same package version twice is a malformed input."""
    releases = tmp_path / "releases.jsonl"
    write_jsonl([{"package_name": "a", "version": "1", "year": 2020}] * 2, releases)
    with pytest.raises(ValueError):
        stages.read_releases(releases)
