"""Ground-truth geometry, local frames, and synthetic measurement generation.

Positions are plain ``numpy`` arrays of shape ``(3,)``.  Everything here is a
pure function of its inputs; graphs and measurement sets are frozen after
construction and safe to share between threads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Dict, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DegenerateGeometryError, ValidationError

Vec3 = np.ndarray
Edge = Tuple[int, int]

_ORTHO_TOL = 1e-12
_UNIT_TOL = 1e-9


def _as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise ValidationError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("position components must be finite")
    return a


def edge_key(a: int, b: int) -> Edge:
    """Canonical (sorted) key for an undirected edge."""
    return (a, b) if a < b else (b, a)


def pairwise_distance(a, b) -> float:
    """Euclidean distance between two points."""
    return float(np.linalg.norm(_as_point(b) - _as_point(a)))


def relative_bearing(a, b) -> np.ndarray:
    """Unit vector pointing from ``a`` toward ``b``.

    Raises ``DegenerateGeometryError`` if the points coincide.
    """
    e = _as_point(b) - _as_point(a)
    d = float(np.linalg.norm(e))
    if d == 0.0:
        raise DegenerateGeometryError("bearing undefined for coincident points")
    return e / d


def interior_angle(at, u, v) -> float:
    """Angle at vertex ``at`` subtended by ``u`` and ``v``, in [0, pi].

    The cosine is clamped to [-1, 1] before the inverse cosine so that
    near-colinear configurations land exactly on 0 or pi instead of NaN.
    """
    g1 = relative_bearing(at, u)
    g2 = relative_bearing(at, v)
    c = float(np.clip(np.dot(g1, g2), -1.0, 1.0))
    return math.acos(c)


def cos_angle_from_local_bearings(g1, g2) -> float:
    """Cosine of the angle between two bearings measured in the same frame.

    Because the frame rotation is orthogonal it cancels in the dot product,
    so the result equals the cosine of the globally-subtended angle.
    """
    g1 = _as_point(g1)
    g2 = _as_point(g2)
    for g in (g1, g2):
        if abs(np.linalg.norm(g) - 1.0) > _UNIT_TOL:
            raise ValidationError("bearings must be unit vectors")
    return float(np.dot(g1, g2))


@dataclass(frozen=True)
class LocalFrame:
    """Per-node rotation relating global vectors to the node's local frame."""

    rotation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        if r.shape != (3, 3):
            raise ValidationError("frame rotation must be a 3x3 matrix")
        if np.linalg.norm(r.T @ r - np.eye(3)) > 1e-9:
            raise ValidationError("frame rotation must be orthogonal")
        if np.linalg.det(r) < 0:
            raise ValidationError("frame rotation must have determinant +1")
        r.flags.writeable = False
        object.__setattr__(self, "rotation", r)

    @classmethod
    def identity(cls) -> "LocalFrame":
        return cls(np.eye(3))

    @classmethod
    def from_quaternion(cls, wxyz: Sequence[float]) -> "LocalFrame":
        w, x, y, z = (float(v) for v in wxyz)
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if n == 0.0:
            raise ValidationError("zero quaternion")
        return cls(Rotation.from_quat([x / n, y / n, z / n, w / n]).as_matrix())

    def quaternion(self) -> Tuple[float, float, float, float]:
        """(w, x, y, z) with a canonical sign (w >= 0)."""
        x, y, z, w = Rotation.from_matrix(self.rotation).as_quat()
        if w < 0 or (w == 0 and (x < 0 or (x == 0 and (y < 0 or (y == 0 and z < 0))))):
            w, x, y, z = -w, -x, -y, -z
        return (float(w), float(x), float(y), float(z))

    def apply(self, v) -> np.ndarray:
        return self.rotation @ _as_point(v)


def random_rotation(rng: np.random.Generator) -> LocalFrame:
    """Rotation drawn uniformly from SO(3) via a normalized quaternion."""
    q = rng.standard_normal(4)
    while np.linalg.norm(q) < 1e-6:
        q = rng.standard_normal(4)
    return LocalFrame.from_quaternion(q)


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected graph with an anchor/free node partition and local frames."""

    nodes: Tuple[int, ...]
    anchors: frozenset
    edges: frozenset
    frames: Mapping[int, LocalFrame]

    def __post_init__(self):
        nodes = tuple(sorted(int(v) for v in self.nodes))
        if len(set(nodes)) != len(nodes):
            raise ValidationError("duplicate node ids")
        if any(v < 0 for v in nodes):
            raise ValidationError("node ids must be non-negative")
        node_set = set(nodes)
        anchors = frozenset(int(v) for v in self.anchors)
        if not anchors <= node_set:
            raise ValidationError("anchors must be a subset of nodes")
        edges = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValidationError(f"self-edge at node {a}")
            if a not in node_set or b not in node_set:
                raise ValidationError(f"edge ({a},{b}) references unknown node")
            edges.add(edge_key(a, b))
        frames = dict(self.frames)
        for v in nodes:
            frames.setdefault(v, LocalFrame.identity())
        if set(frames) - node_set:
            raise ValidationError("frame for unknown node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "edges", frozenset(edges))
        object.__setattr__(self, "frames", MappingProxyType(frames))

    @property
    def free(self) -> Tuple[int, ...]:
        return tuple(v for v in self.nodes if v not in self.anchors)

    @property
    def adjacency(self) -> Mapping[int, Tuple[int, ...]]:
        adj = self.__dict__.get("_adjacency")
        if adj is None:
            tmp: Dict[int, list] = {v: [] for v in self.nodes}
            for a, b in self.edges:
                tmp[a].append(b)
                tmp[b].append(a)
            adj = {v: tuple(sorted(ns)) for v, ns in tmp.items()}
            self.__dict__["_adjacency"] = adj
        return adj

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return self.adjacency[v]

    def has_edge(self, a: int, b: int) -> bool:
        return edge_key(a, b) in self.edges


def make_graph(nodes, anchors=(), edges=(), frames=None) -> NetworkGraph:
    """Convenience constructor with identity frames by default."""
    return NetworkGraph(
        nodes=tuple(nodes),
        anchors=frozenset(anchors),
        edges=frozenset(tuple(e) for e in edges),
        frames=dict(frames or {}),
    )


def complete_edges(nodes) -> frozenset:
    return frozenset(itertools.combinations(sorted(nodes), 2))


def triangles(graph: NetworkGraph) -> Iterator[Tuple[int, int, int]]:
    """All node triples whose three edges are present, in sorted order."""
    for a, b, c in itertools.combinations(graph.nodes, 3):
        if graph.has_edge(a, b) and graph.has_edge(a, c) and graph.has_edge(b, c):
            yield (a, b, c)


class MeasurementKind(str, Enum):
    RELATIVE_POSITION = "relative_position"
    DISTANCE = "distance"
    RATIO = "ratio"
    BEARING = "bearing"
    ANGLE = "angle"


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise level; bearings are perturbed and renormalized."""

    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError("noise sigma must be >= 0")


@dataclass(frozen=True)
class MeasurementSet:
    """Per-edge or per-triple measurements of a single family.

    Keys are ordered pairs ``(observer, target)`` for bearings and relative
    positions, sorted pairs for distances and ratios, and ``(vertex, a, b)``
    with ``a < b`` for interior angles.
    """

    kind: MeasurementKind
    data: Mapping
    ref_edge: Optional[Edge] = None

    def __post_init__(self):
        data = dict(self.data)
        kind = MeasurementKind(self.kind)
        for key, value in data.items():
            if kind is MeasurementKind.DISTANCE:
                if value <= 0:
                    raise ValidationError(f"distance for {key} must be > 0")
            elif kind is MeasurementKind.RATIO:
                if value <= 0:
                    raise ValidationError(f"distance ratio for {key} must be > 0")
            elif kind is MeasurementKind.ANGLE:
                if not (0.0 <= value <= math.pi):
                    raise ValidationError(f"angle for {key} must lie in [0, pi]")
            elif kind is MeasurementKind.BEARING:
                v = np.asarray(value, dtype=float)
                if abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
                    raise ValidationError(f"bearing for {key} must be a unit vector")
                v.flags.writeable = False
                data[key] = v
            else:
                v = np.asarray(value, dtype=float)
                if v.shape != (3,):
                    raise ValidationError(f"relative position for {key} must be a 3-vector")
                v.flags.writeable = False
                data[key] = v
        if kind is MeasurementKind.RATIO:
            if self.ref_edge is None:
                raise ValidationError("ratio measurements need a declared reference edge")
            ref = edge_key(*self.ref_edge)
            if ref in data and abs(data[ref] - 1.0) > 1e-9:
                raise ValidationError(
                    f"reference edge {ref} must have ratio 1, got {data[ref]}"
                )
            object.__setattr__(self, "ref_edge", ref)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "data", MappingProxyType(data))


def synthesize_measurements(
    graph: NetworkGraph,
    truth: Mapping[int, Vec3],
    kind: MeasurementKind,
    noise: Optional[NoiseSpec] = None,
    seed: int = 0,
    ref_edge: Optional[Edge] = None,
) -> MeasurementSet:
    """Generate measurements of one family from ground-truth positions.

    Deterministic given ``seed``; with ``sigma == 0`` the output reproduces
    the ground-truth quantities exactly.  Bearings and relative positions are
    expressed in the observer's local frame.
    """
    kind = MeasurementKind(kind)
    missing = [v for v in graph.nodes if v not in truth]
    if missing:
        raise ValidationError(f"missing ground-truth positions for nodes {missing}")
    pos = {v: _as_point(truth[v]) for v in graph.nodes}
    sigma = (noise or NoiseSpec()).sigma
    rng = np.random.default_rng(seed)
    data: Dict = {}

    if kind is MeasurementKind.DISTANCE:
        for a, b in sorted(graph.edges):
            d = pairwise_distance(pos[a], pos[b])
            if sigma:
                d += sigma * rng.standard_normal()
            data[(a, b)] = max(d, 1e-12)
    elif kind is MeasurementKind.RATIO:
        ref = edge_key(*ref_edge) if ref_edge else min(sorted(graph.edges))
        if ref not in graph.edges:
            raise ValidationError(f"reference edge {ref} is not in the graph")
        base = pairwise_distance(pos[ref[0]], pos[ref[1]])
        for a, b in sorted(graph.edges):
            r = pairwise_distance(pos[a], pos[b]) / base
            if sigma and (a, b) != ref:
                r += sigma * rng.standard_normal()
            data[(a, b)] = max(r, 1e-12)
        return MeasurementSet(kind, data, ref_edge=ref)
    elif kind in (MeasurementKind.BEARING, MeasurementKind.RELATIVE_POSITION):
        for a, b in sorted(graph.edges):
            for obs, tgt in ((a, b), (b, a)):
                q = graph.frames[obs].rotation
                if kind is MeasurementKind.BEARING:
                    g = q @ relative_bearing(pos[obs], pos[tgt])
                    if sigma:
                        g = g + sigma * rng.standard_normal(3)
                        n = np.linalg.norm(g)
                        if n == 0.0:
                            raise DegenerateGeometryError("noise annihilated a bearing")
                        g = g / n
                    data[(obs, tgt)] = g
                else:
                    e = q @ (pos[tgt] - pos[obs])
                    if sigma:
                        e = e + sigma * rng.standard_normal(3)
                    data[(obs, tgt)] = e
    elif kind is MeasurementKind.ANGLE:
        for a, b, c in triangles(graph):
            for v, u1, u2 in ((a, b, c), (b, a, c), (c, a, b)):
                t = interior_angle(pos[v], pos[u1], pos[u2])
                if sigma:
                    t = float(np.clip(t + sigma * rng.standard_normal(), 0.0, math.pi))
                data[(v, u1, u2)] = t
    else:  # pragma: no cover
        raise ValidationError(f"unsupported measurement kind {kind}")
    return MeasurementSet(kind, data)
