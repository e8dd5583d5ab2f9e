"""Scenario generation: seeded random networks satisfying family assumptions.

The generator retries with derived seeds until the graph satisfies the
neighbor-count assumptions of the requested measurement family (or the
attempt budget runs out, in which case the violated assumption is named).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .builders import enumerate_tuples
from .errors import ValidationError
from .geometry import (
    MeasurementKind,
    MeasurementSet,
    NetworkGraph,
    NoiseSpec,
    complete_edges,
    make_graph,
    random_rotation,
    synthesize_measurements,
)

_ANCHOR_SPREAD_TOL = 0.15


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of a synthetic localization scenario."""

    n_nodes: int
    n_anchors: int
    kind: MeasurementKind
    graph_model: str = "complete"  # complete | geometric | explicit
    radius: float = 0.0
    edges: Tuple[Tuple[int, int], ...] = ()
    coplanar: bool = False
    sigma: float = 0.0
    seed: int = 0
    max_attempts: int = 50

    def __post_init__(self):
        if self.n_nodes <= 0:
            raise ValidationError("node count must be positive")
        if self.n_anchors < 2:
            raise ValidationError("at least two anchors are required")
        if self.n_anchors >= self.n_nodes:
            raise ValidationError("need at least one free node")
        if self.graph_model not in ("complete", "geometric", "explicit"):
            raise ValidationError(f"unknown graph model {self.graph_model!r}")
        if self.graph_model == "geometric" and self.radius <= 0:
            raise ValidationError("geometric graphs need radius > 0")
        if self.sigma < 0:
            raise ValidationError("noise sigma must be >= 0")
        object.__setattr__(self, "kind", MeasurementKind(self.kind))


def min_neighbor_count(coplanar: bool) -> int:
    return 3 if coplanar else 4


def check_assumptions(
    graph: NetworkGraph, kind: MeasurementKind, coplanar: bool
) -> List[str]:
    """Named violations of the family's connectivity assumptions."""
    violations = []
    need = min_neighbor_count(coplanar)
    for v in graph.anchors:
        if sum(1 for u in graph.neighbors(v) if u in graph.anchors) < 2:
            violations.append(f"anchor node {v} has fewer than 2 anchor neighbors")
    covered = {t.center for t in enumerate_tuples(graph, kind, coplanar, max_per_center=1)}
    for v in graph.free:
        if len(graph.neighbors(v)) < need:
            violations.append(
                f"free node {v} has fewer than {need} neighbors "
                f"({len(graph.neighbors(v))})"
            )
        elif v not in covered:
            violations.append(
                f"free node {v} admits no valid tuple for family {kind.value}"
            )
    return violations


def _anchor_spread_ok(points: np.ndarray, coplanar: bool) -> bool:
    if len(points) < (3 if coplanar else 4):
        return True
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    need = 2 if coplanar else 3
    return len(s) >= need and s[need - 1] > _ANCHOR_SPREAD_TOL


def generate_network(config: ScenarioConfig):
    """Returns ``(graph, truth, measurements)`` for a valid scenario.

    Deterministic for a given config; raises ``ValidationError`` naming the
    violated assumption when the attempt budget is exhausted.
    """
    last_violation = "no attempt made"
    for attempt in range(config.max_attempts):
        rng = np.random.default_rng([config.seed, attempt])
        pts = rng.uniform(0.0, 1.0, size=(config.n_nodes, 3))
        if config.coplanar:
            pts[:, 2] = 0.0
        anchors = list(range(config.n_anchors))
        if not _anchor_spread_ok(pts[anchors], config.coplanar):
            last_violation = "anchor nodes are (nearly) affinely degenerate"
            continue
        nodes = list(range(config.n_nodes))
        if config.graph_model == "complete":
            edges = complete_edges(nodes)
        elif config.graph_model == "explicit":
            edges = frozenset(tuple(sorted(e)) for e in config.edges)
        else:
            edges = frozenset(
                (a, b)
                for a in nodes
                for b in nodes
                if a < b and np.linalg.norm(pts[a] - pts[b]) <= config.radius
            )
        frames = {v: random_rotation(rng) for v in nodes}
        graph = make_graph(nodes, anchors, edges, frames)
        violations = check_assumptions(graph, config.kind, config.coplanar)
        if violations:
            last_violation = violations[0]
            continue
        truth = {v: pts[v] for v in nodes}
        meas = synthesize_measurements(
            graph,
            truth,
            config.kind,
            noise=NoiseSpec(config.sigma),
            seed=config.seed,
        )
        return graph, truth, meas
    raise ValidationError(
        f"could not generate a valid scenario in {config.max_attempts} attempts; "
        f"last violation: {last_violation}"
    )
