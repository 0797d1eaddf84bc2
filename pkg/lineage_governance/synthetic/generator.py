"""
Synthetic Ecosystems

Seeded lineage ecosystems with known ground truth for oracle tests:

- Layered DAG grown generation by generation from Restrictive roots; the
  generation index equals the hop distance from the nearest source
- Restriction is restated with probability q while the primary parent still
  carries it, so expected retention at hop h is q^h
- A fraction of children get a second parent from the previous generation
  (merge products, some with merge-typed edges)
- Disconnected Unknown-intent orphan components
- Optional confounded merge-case sample with a calibrated treatment effect

Usage:
    result = generate(GeneratorSpec(n_roots=50, restatement_prob=0.5, seed=3))
    write_outputs(result, "out/synthetic")
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from pydantic import BaseModel, Field, model_validator
from scipy.optimize import brentq
from scipy.special import expit

from ..core.io import save_edges, save_nodes, write_csv, write_json
from ..core.models import DerivationEdge, EdgeType, EvidenceSource, Intent, MergeSignal, ModelNode
from ..stats.causal import MergeCase, cases_frame
from ..utils.logger import get_logger

__all__ = [
    "CausalSpec",
    "GeneratorSpec",
    "GenerationResult",
    "generate",
    "generate_merge_cases",
    "write_outputs",
]

logger = get_logger()

ROOT_ORGS = ("meta-llama", "mistralai", "qwen", "synthetic-lab")
RESTRICTIVE_LICENCE = "llama3"
PASSTHROUGH_LICENCE = "openrail"
PERMISSIVE_LICENCE = "apache-2.0"
EPOCH = np.datetime64("2023-01-01")
DAYS_PER_GENERATION = 60
QUADRATURE_POINTS = 64


class CausalSpec(BaseModel):
    """Confounded merge-case sample with a known average treatment effect."""
    n_cases: int = Field(default=20_000, ge=10)
    true_ate: float = Field(default=0.03, description="Population risk difference of treatment")
    confounder_strength: float = Field(default=1.0, ge=0.0)
    base_rate: float = Field(default=0.05, gt=0.0, lt=1.0, description="Mean untreated outcome rate")

    @model_validator(mode="after")
    def _reachable_effect(self) -> "CausalSpec":
        if not -self.base_rate < self.true_ate < 1.0 - self.base_rate:
            raise ValueError("true_ate must keep treated outcome rates inside (0, 1)")
        return self


class GeneratorSpec(BaseModel):
    """Parameters of one synthetic lineage ecosystem."""
    n_roots: int = Field(default=20, ge=1)
    generations: int = Field(default=6, ge=0)
    branching: float = Field(default=1.5, ge=0.0, description="Mean children per node")
    restatement_prob: float = Field(default=0.5, ge=0.0, le=1.0, description="q: chance a child restates restriction")
    merge_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    merge_tag_prob: float = Field(default=0.5, ge=0.0, le=1.0, description="Share of merges with merge-typed edges")
    orphan_component_count: int = Field(default=0, ge=0)
    missing_prob: float = Field(default=0.3, ge=0.0, le=1.0, description="Chance a non-restating child declares nothing")
    openrail_root_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    hub_bias: float = Field(default=0.0, ge=0.0, description="Zipf exponent of parent reuse; 0 spreads children evenly")
    max_nodes: int = Field(default=2_000_000, ge=1)
    causal: Optional[CausalSpec] = None
    seed: int = Field(default=0, ge=0)


@dataclass
class GenerationResult:
    nodes: List[ModelNode]
    edges: List[DerivationEdge]
    ground_truth: Dict[str, Any]
    merge_cases: List[MergeCase] = field(default_factory=list)


def _created_at(rng: np.random.Generator, generation: int) -> str:
    offset = generation * DAYS_PER_GENERATION + int(rng.integers(0, DAYS_PER_GENERATION))
    return str(EPOCH + np.timedelta64(offset, "D"))


def _parent_indices(rng: np.random.Generator, size: int, branching: float, hub_bias: float) -> np.ndarray:
    whole = math.floor(branching)
    counts = whole + (rng.random(size) < branching - whole).astype(int)
    if hub_bias == 0:
        return np.repeat(np.arange(size), counts)
    ranks = rng.permutation(size)
    weights = (ranks + 1.0) ** (-hub_bias)
    return np.sort(rng.choice(size, size=int(counts.sum()), p=weights / weights.sum()))


def generate(spec: GeneratorSpec) -> GenerationResult:
    """
    Generate one ecosystem.

    Every random draw comes from one generator seeded with `spec.seed` in a
    fixed order, so the same spec always yields the same output.

    Raises:
        ValueError: the ecosystem would exceed `spec.max_nodes`
    """
    rng = np.random.default_rng(spec.seed)
    nodes: Dict[str, ModelNode] = {}
    edges: List[DerivationEdge] = []
    generation_of: Dict[str, int] = {}
    restated: Dict[str, bool] = {}
    merge_children: List[str] = []

    passthrough_roots = rng.random(spec.n_roots) < spec.openrail_root_fraction
    layer: List[str] = []
    for r in range(spec.n_roots):
        node_id = f"{ROOT_ORGS[r % len(ROOT_ORGS)]}/base-{r:05d}"
        licence = PASSTHROUGH_LICENCE if passthrough_roots[r] else RESTRICTIVE_LICENCE
        nodes[node_id] = ModelNode(
            node_id=node_id,
            created_at=_created_at(rng, 0),
            intent=Intent.RESTRICTIVE,
            restriction_score=2.0,
            licence_names=[licence],
            passthrough=bool(passthrough_roots[r]),
        )
        generation_of[node_id] = 0
        restated[node_id] = True
        layer.append(node_id)

    counter = 0
    for generation in range(1, spec.generations + 1):
        if not layer:
            break
        parents = _parent_indices(rng, len(layer), spec.branching, spec.hub_bias)
        if len(nodes) + parents.size > spec.max_nodes:
            raise ValueError(f"ecosystem exceeds max_nodes={spec.max_nodes} at generation {generation}")
        next_layer: List[str] = []
        for p_index in parents:
            node_id = f"derived-g{generation:02d}/model-{counter:07d}"
            counter += 1
            primary = layer[int(p_index)]
            u_restate, u_merge, u_missing = rng.random(3)
            restates = restated[primary] and u_restate < spec.restatement_prob

            second: Optional[str] = None
            tagged = False
            if u_merge < spec.merge_prob and len(layer) > 1:
                other = int(rng.integers(0, len(layer) - 1))
                second = layer[other + 1 if other >= p_index else other]
                tagged = bool(rng.random() < spec.merge_tag_prob)

            if restates:
                parent_node = nodes[primary]
                node = ModelNode(
                    node_id=node_id,
                    intent=Intent.RESTRICTIVE,
                    restriction_score=2.0,
                    licence_names=list(parent_node.licence_names),
                    passthrough=parent_node.passthrough,
                )
            elif u_missing < spec.missing_prob:
                node = ModelNode(node_id=node_id, intent=Intent.UNKNOWN)
            else:
                node = ModelNode(
                    node_id=node_id,
                    intent=Intent.PERMISSIVE,
                    restriction_score=0.0,
                    licence_names=[PERMISSIVE_LICENCE],
                )
            node.created_at = _created_at(rng, generation)

            if second is None:
                edges.append(DerivationEdge(node_id, primary, EdgeType.FINETUNE, EvidenceSource.YAML_FIELD))
            else:
                merge_children.append(node_id)
                if tagged:
                    node.merge_signals = {MergeSignal.MERGE_YAML}
                    edges.append(DerivationEdge(node_id, primary, EdgeType.MERGE, EvidenceSource.YAML_FIELD))
                    edges.append(DerivationEdge(node_id, second, EdgeType.MERGE, EvidenceSource.YAML_FIELD))
                else:
                    edges.append(DerivationEdge(node_id, primary, EdgeType.FINETUNE, EvidenceSource.YAML_FIELD))
                    edges.append(DerivationEdge(node_id, second, EdgeType.BASE_MODEL, EvidenceSource.README_PROSE))

            nodes[node_id] = node
            generation_of[node_id] = generation
            restated[node_id] = bool(restates)
            next_layer.append(node_id)
        layer = next_layer

    orphans = []
    for k in range(spec.orphan_component_count):
        node_id = f"orphan/model-{k:05d}"
        nodes[node_id] = ModelNode(node_id=node_id, created_at=_created_at(rng, 0), intent=Intent.UNKNOWN)
        orphans.append(node_id)

    merge_cases: List[MergeCase] = []
    causal_truth: Optional[Dict[str, float]] = None
    if spec.causal is not None:
        merge_cases, causal_truth = generate_merge_cases(spec.causal, spec.seed)

    q = spec.restatement_prob
    ground_truth = {
        "spec": spec.model_dump(mode="json"),
        "n_nodes": len(nodes),
        "n_edges": len(edges),
        "sources": sorted(node_id for node_id, g in generation_of.items() if g == 0),
        "orphans": orphans,
        "generation": dict(sorted(generation_of.items())),
        "restated": dict(sorted(restated.items())),
        "merge_children": sorted(merge_children),
        "expected_retention": [q ** h for h in range(spec.generations + 1)],
        "half_life": (-math.log(2) / math.log(q)) if 0.0 < q < 1.0 else None,
        "causal": causal_truth,
    }
    logger.info(
        f"Generated {len(nodes)} nodes, {len(edges)} edges, {len(merge_children)} merges, "
        f"{len(orphans)} orphan(s)"
    )
    return GenerationResult(
        nodes=sorted(nodes.values(), key=lambda n: n.node_id),
        edges=sorted(edges, key=DerivationEdge.sort_key),
        ground_truth=ground_truth,
        merge_cases=merge_cases,
    )


def _standard_normal_quadrature() -> Tuple[np.ndarray, np.ndarray]:
    points, weights = hermegauss(QUADRATURE_POINTS)
    return points, weights / math.sqrt(2.0 * math.pi)


def generate_merge_cases(causal: CausalSpec, seed: int = 0) -> Tuple[List[MergeCase], Dict[str, float]]:
    """
    Confounded merge cases with logistic potential outcomes.

    One standard-normal confounder z drives both treatment,
    logit P(T=1) = 0.8 * s * z, and outcome,
    logit P(Y=1) = b0 + s * z + gamma * T, where s is the confounder
    strength. b0 is solved so the untreated rate averages `base_rate` and
    gamma so the population risk difference equals `true_ate`. Potential
    outcomes share one uniform draw per case. Three pure-noise covariates
    fill the remaining slots; the covariate layout is
    (z, n1, n2, n3, z^2, n1^2, n2^2, n3^2, z * n1).

    Returns:
        (cases, truth) with population ATE/ATT and sample ATE/ATT
    """
    rng = np.random.default_rng([seed, 1])
    n = causal.n_cases
    s = causal.confounder_strength
    a = 0.8 * s

    points, weights = _standard_normal_quadrature()
    b0 = brentq(lambda b: float(weights @ expit(b + s * points)) - causal.base_rate, -40.0, 40.0)
    baseline = expit(b0 + s * points)
    gamma = brentq(lambda g: float(weights @ (expit(b0 + s * points + g) - baseline)) - causal.true_ate, -40.0, 40.0)
    effect = expit(b0 + s * points + gamma) - baseline
    e = expit(a * points)
    att = float((weights * e) @ effect / (weights @ e))

    z = rng.standard_normal(n)
    noise = rng.standard_normal((n, 3))
    treated = rng.random(n) < expit(a * z)
    u = rng.random(n)
    y0 = u < expit(b0 + s * z)
    y1 = u < expit(b0 + s * z + gamma)
    outcome = np.where(treated, y1, y0)

    base = np.column_stack([z, noise])
    x = np.column_stack([base, base ** 2, z * noise[:, 0]])
    cases = [
        MergeCase(f"synthetic/merge-{i:06d}", bool(treated[i]), bool(outcome[i]), tuple(float(v) for v in x[i]))
        for i in range(n)
    ]
    diff = y1.astype(float) - y0.astype(float)
    truth = {
        "ate": float(causal.true_ate),
        "att": att,
        "sample_ate": float(diff.mean()),
        "sample_att": float(diff[treated].mean()) if treated.any() else float("nan"),
        "intercept": float(b0),
        "confounder_coefficient": float(s),
        "treatment_coefficient": float(gamma),
        "propensity_coefficient": float(a),
        "n_treated": int(treated.sum()),
        "n_control": int(n - treated.sum()),
    }
    logger.debug(f"Merge cases: gamma={gamma:.6g}, b0={b0:.6g}, ATT={att:.6g}")
    return cases, truth


def write_outputs(result: GenerationResult, out_dir: Union[str, Path]) -> List[Path]:
    """Write nodes.jsonl, edges.csv, ground_truth.json and, when present, merge_cases.csv."""
    out_dir = Path(out_dir)
    paths = [
        save_nodes(result.nodes, out_dir / "nodes.jsonl"),
        save_edges(result.edges, out_dir / "edges.csv"),
        write_json(result.ground_truth, out_dir / "ground_truth.json"),
    ]
    if result.merge_cases:
        paths.append(write_csv(cases_frame(result.merge_cases), out_dir / "merge_cases.csv"))
    return paths
