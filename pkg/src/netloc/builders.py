"""Displacement-constraint construction from each measurement family.

A displacement constraint ties a center node to an ordered neighbor list
through coefficients ``mu`` with ``sum(mu_n * (p_n - p_center)) == 0`` at the
true positions.  Generic 3-D networks use 5-node tuples (four neighbors);
coplanar networks use 4-node tuples (three neighbors).

Distance and ratio families go through classical multidimensional scaling of
the tuple's squared-distance matrix; the angle family first converts angles
to distance ratios via the sine rule; the bearing family solves for a null
vector of the local bearing matrix and rescales it with sine ratios that are
themselves computable from local bearings alone.
"""

from __future__ import annotations

import inspect
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ColinearityError,
    InconsistentAnglesError,
    NetlocError,
    NotEmbeddableError,
    ValidationError,
)
from .geometry import MeasurementKind, MeasurementSet, NetworkGraph, edge_key

#: Relative eigenvalue threshold for the embeddability check.
RANK_TOL = 1e-8
#: Relative singular-value threshold for null-space dimension counting.
NULL_TOL = 1e-8
#: |sin| below this makes sine-rule divisions numerically meaningless.
SIN_TOL = 1e-7
#: Relative spread above which angle-derived ratio chains are inconsistent.
CHAIN_TOL = 1e-6


@dataclass(frozen=True)
class ConstraintTuple:
    """A center node and its ordered (strictly increasing) neighbor list."""

    center: int
    neighbors: Tuple[int, ...]

    def __post_init__(self):
        nbrs = tuple(int(n) for n in self.neighbors)
        if len(nbrs) not in (3, 4):
            raise ValidationError("tuples have 3 (coplanar) or 4 neighbors")
        if any(b <= a for a, b in zip(nbrs, nbrs[1:])):
            raise ValidationError("neighbors must be strictly increasing")
        if self.center in nbrs:
            raise ValidationError("center cannot be its own neighbor")
        object.__setattr__(self, "neighbors", nbrs)

    @property
    def nodes(self) -> Tuple[int, ...]:
        return (self.center,) + self.neighbors


@dataclass(frozen=True)
class DisplacementConstraint:
    """Coefficients ``mu`` (canonical form) over a tuple's neighbors."""

    center: int
    neighbors: Tuple[int, ...]
    mu: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        mu.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "neighbors", tuple(self.neighbors))

    def residual(self, positions) -> float:
        """Norm of ``sum(mu_n * (p_n - p_center))`` at given positions."""
        c = np.asarray(positions[self.center], dtype=float)
        acc = np.zeros(3)
        for m, n in zip(self.mu, self.neighbors):
            acc += m * (np.asarray(positions[n], dtype=float) - c)
        return float(np.linalg.norm(acc))


def canonicalize(mu: np.ndarray) -> np.ndarray:
    """Unit norm with the first non-negligible coefficient positive."""
    mu = np.asarray(mu, dtype=float)
    norm = np.linalg.norm(mu)
    if norm == 0.0:
        raise ValidationError("cannot canonicalize a zero coefficient vector")
    mu = mu / norm
    for v in mu:
        if abs(v) > 1e-9:
            return mu if v > 0 else -mu
    return mu


def _required_edges(
    center: int, nbrs: Sequence[int], kind: MeasurementKind
) -> List[Tuple[int, int]]:
    star = [edge_key(center, n) for n in nbrs]
    if kind is MeasurementKind.RELATIVE_POSITION:
        return star
    if kind is MeasurementKind.BEARING:
        helper = nbrs[0]
        return star + [edge_key(helper, m) for m in nbrs[1:]]
    # distance / ratio / angle need the complete subgraph on the tuple
    return [edge_key(a, b) for a, b in itertools.combinations((center, *nbrs), 2)]


def enumerate_tuples(
    graph: NetworkGraph,
    kind: MeasurementKind,
    coplanar: bool = False,
    max_per_center: Optional[int] = None,
) -> List[ConstraintTuple]:
    """All tuples whose edge pattern matches the measurement family.

    ``max_per_center`` caps the number of tuples per center (taken in
    lexicographic neighbor order); dense graphs otherwise explode
    combinatorially.
    """
    kind = MeasurementKind(kind)
    size = 3 if coplanar else 4
    out: List[ConstraintTuple] = []
    for center in graph.nodes:
        count = 0
        for combo in itertools.combinations(graph.neighbors(center), size):
            if all(e in graph.edges for e in _required_edges(center, combo, kind)):
                out.append(ConstraintTuple(center, combo))
                count += 1
                if max_per_center is not None and count >= max_per_center:
                    break
    return out


def mds_embed(M: np.ndarray, dim: int, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Embed a squared-distance (or squared-ratio) matrix into ``dim`` axes.

    Classical multidimensional scaling: double-center, eigendecompose, keep
    the top ``dim`` axes.  The configuration returned is centered at the
    origin and reproduces the input matrix entrywise up to roundoff for
    realizable inputs; unrealizable inputs (a significant eigenvalue beyond
    ``dim``) raise ``NotEmbeddableError``.
    """
    M = np.asarray(M, dtype=float)
    m = M.shape[0]
    if M.shape != (m, m):
        raise ValidationError("matrix must be square")
    if dim not in (2, 3):
        raise ValidationError("embedding dimension must be 2 or 3")
    if np.any(np.abs(np.diag(M)) > 1e-12 * max(1.0, np.max(np.abs(M)))):
        raise ValidationError("matrix diagonal must be zero")
    if np.linalg.norm(M - M.T) > 1e-9 * max(1.0, np.linalg.norm(M)):
        raise ValidationError("matrix must be symmetric")
    if np.any(M < 0):
        raise ValidationError("matrix entries must be nonnegative")
    J = np.eye(m) - np.full((m, m), 1.0 / m)
    X = -0.5 * (J @ M @ J)
    # Symmetric eigendecomposition (equivalent to the SVD of the PSD Gram
    # matrix, better conditioned); tiny negative eigenvalues are clamped.
    evals, evecs = np.linalg.eigh(X)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    lead = max(evals[0], 0.0)
    tail = np.max(np.abs(evals[dim:])) if dim < m else 0.0
    if tail > rank_tol * max(lead, 1e-300):
        raise NotEmbeddableError(
            f"matrix not realizable in {dim} dimensions "
            f"(residual eigenvalue {tail:.3e} vs leading {lead:.3e})",
            spectrum=evals,
        )
    kept = np.clip(evals[:dim], 0.0, None)
    return evecs[:, :dim] * np.sqrt(kept)


def null_coefficients(
    A: np.ndarray, null_tol: float = NULL_TOL
) -> Tuple[np.ndarray, bool]:
    """Unit-norm null vector of a small dense matrix, canonical sign.

    Returns ``(mu, degenerate)`` where ``degenerate`` flags a null space of
    dimension greater than one.  The smallest-singular-value vector is
    returned in every case.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValidationError("expected a 2-D matrix")
    scale = np.linalg.norm(A)
    if scale == 0.0:
        raise ValidationError("all-zero input matrix")
    _, s, vt = np.linalg.svd(A)
    m = A.shape[1]
    exact = m - len(s)
    small = int(np.sum(s <= null_tol * s[0]))
    null_dim = exact + small
    if null_dim == 0 and s[-1] > 1e-6 * s[0]:
        raise ValidationError(
            f"matrix has no null direction (smallest/largest singular value "
            f"{s[-1] / s[0]:.3e})"
        )
    return canonicalize(vt[-1]), null_dim > 1


def _ordered_nodes(tup: ConstraintTuple) -> Tuple[int, ...]:
    return tup.nodes


def _squared_matrix(tup: ConstraintTuple, values: Dict[Tuple[int, int], float]) -> np.ndarray:
    nodes = _ordered_nodes(tup)
    m = len(nodes)
    M = np.zeros((m, m))
    for a, b in itertools.combinations(range(m), 2):
        key = edge_key(nodes[a], nodes[b])
        if key not in values:
            raise ValidationError(f"missing measurement for edge {key}")
        M[a, b] = M[b, a] = values[key] ** 2
    return M


def _embed_dim(tup: ConstraintTuple) -> int:
    return 3 if len(tup.neighbors) == 4 else 2


def _constraint_from_matrix(
    tup: ConstraintTuple, M: np.ndarray, rank_tol: float, null_tol: float
) -> DisplacementConstraint:
    q = mds_embed(M, _embed_dim(tup), rank_tol)
    A = (q[1:] - q[0]).T
    mu, degenerate = null_coefficients(A, null_tol)
    return DisplacementConstraint(tup.center, tup.neighbors, mu, degenerate)


def displacement_from_relative_position(
    tup: ConstraintTuple,
    meas: MeasurementSet,
    null_tol: float = NULL_TOL,
) -> DisplacementConstraint:
    """Null vector of the local relative-position columns.

    The observer's frame rotation is orthogonal, so it does not change the
    null space and the coefficients hold for the global displacements too.
    """
    if meas.kind is not MeasurementKind.RELATIVE_POSITION:
        raise ValidationError("expected relative-position measurements")
    cols = []
    for n in tup.neighbors:
        if (tup.center, n) not in meas.data:
            raise ValidationError(f"missing relative position ({tup.center},{n})")
        cols.append(meas.data[(tup.center, n)])
    mu, degenerate = null_coefficients(np.column_stack(cols), null_tol)
    return DisplacementConstraint(tup.center, tup.neighbors, mu, degenerate)


def displacement_from_distance(
    tup: ConstraintTuple,
    meas: MeasurementSet,
    rank_tol: float = RANK_TOL,
    null_tol: float = NULL_TOL,
) -> DisplacementConstraint:
    """Distance pipeline: squared-distance matrix -> MDS -> null vector."""
    if meas.kind is not MeasurementKind.DISTANCE:
        raise ValidationError("expected distance measurements")
    M = _squared_matrix(tup, dict(meas.data))
    return _constraint_from_matrix(tup, M, rank_tol, null_tol)


def displacement_from_ratio(
    tup: ConstraintTuple,
    meas: MeasurementSet,
    rank_tol: float = RANK_TOL,
    null_tol: float = NULL_TOL,
) -> DisplacementConstraint:
    """Ratio pipeline: identical to distances up to the global scale.

    The tuple's matrix is renormalized so the (center, first neighbor) entry
    is one, which removes the dependence on the measurement set's own
    reference edge.
    """
    if meas.kind is not MeasurementKind.RATIO:
        raise ValidationError("expected ratio measurements")
    values = dict(meas.data)
    if meas.ref_edge in values and abs(values[meas.ref_edge] - 1.0) > 1e-9:
        raise ValidationError("declared reference edge must have ratio 1")
    ref = edge_key(tup.center, tup.neighbors[0])
    if ref not in values:
        raise ValidationError(f"missing ratio for tuple reference edge {ref}")
    base = values[ref]
    scaled = {k: v / base for k, v in values.items()}
    M = _squared_matrix(tup, scaled)
    return _constraint_from_matrix(tup, M, rank_tol, null_tol)


def _sine_of_local_angle(
    meas: MeasurementSet, vertex: int, a: int, b: int, sin_tol: float
) -> float:
    for key in ((vertex, a), (vertex, b)):
        if key not in meas.data:
            raise ValidationError(f"missing bearing {key}")
    c = float(np.dot(meas.data[(vertex, a)], meas.data[(vertex, b)]))
    s = math.sqrt(max(0.0, 1.0 - min(1.0, c * c)))
    if s < sin_tol:
        raise ColinearityError(
            f"nodes ({a},{vertex},{b}) are numerically colinear (|sin| {s:.3e})",
            triple=(a, vertex, b),
        )
    return s


def displacement_from_bearing(
    tup: ConstraintTuple,
    meas: MeasurementSet,
    sin_tol: float = SIN_TOL,
    null_tol: float = NULL_TOL,
) -> DisplacementConstraint:
    """Bearing pipeline: null vector of local bearings, sine-rule rescaled.

    The first neighbor acts as the helper node: sine ratios of the angles it
    subtends with the center and each remaining neighbor convert the bearing
    null vector into displacement coefficients.
    """
    if meas.kind is not MeasurementKind.BEARING:
        raise ValidationError("expected bearing measurements")
    center = tup.center
    helper = tup.neighbors[0]
    cols = []
    for n in tup.neighbors:
        if (center, n) not in meas.data:
            raise ValidationError(f"missing bearing ({center},{n})")
        cols.append(meas.data[(center, n)])
    mu_bar, degenerate = null_coefficients(np.column_stack(cols), null_tol)
    scales = [1.0]
    for m in tup.neighbors[1:]:
        sin_at_m = _sine_of_local_angle(meas, m, center, helper, sin_tol)
        sin_at_helper = _sine_of_local_angle(meas, helper, center, m, sin_tol)
        # d(center, helper) / d(center, m) by the sine rule in the triangle
        # (center, m, helper).
        scales.append(sin_at_m / sin_at_helper)
    mu = canonicalize(mu_bar * np.asarray(scales))
    return DisplacementConstraint(center, tup.neighbors, mu, degenerate)


def ratio_matrix_from_angles(
    tup: ConstraintTuple,
    meas: MeasurementSet,
    sin_tol: float = SIN_TOL,
    chain_tol: float = CHAIN_TOL,
) -> np.ndarray:
    """Squared distance-ratio matrix computed purely from interior angles.

    Ratios are chained to the tuple's reference edge (center, first
    neighbor) through the triangles the tuple's edge set provides; when
    several chains reach the same edge their estimates are averaged and
    their spread is the inconsistency diagnostic.
    """
    if meas.kind is not MeasurementKind.ANGLE:
        raise ValidationError("expected angle measurements")

    def ang(vertex: int, a: int, b: int) -> float:
        key = (vertex, min(a, b), max(a, b))
        if key not in meas.data:
            raise ValidationError(f"missing angle {key}")
        return meas.data[key]

    def safe_sin(vertex: int, a: int, b: int) -> float:
        s = math.sin(ang(vertex, a, b))
        if s < sin_tol:
            raise ColinearityError(
                f"triangle ({a},{vertex},{b}) has a flat angle at {vertex}",
                triple=(a, vertex, b),
            )
        return s

    i = tup.center
    j = tup.neighbors[0]
    others = tup.neighbors[1:]
    rho: Dict[Tuple[int, int], float] = {edge_key(i, j): 1.0}
    for m in others:
        s_m = safe_sin(m, i, j)
        rho[edge_key(i, m)] = math.sin(ang(j, i, m)) / s_m
        rho[edge_key(j, m)] = math.sin(ang(i, j, m)) / s_m
    for m, n in itertools.combinations(others, 2):
        estimates = []
        for base in (i, j):
            s_base = math.sin(ang(base, m, n))
            estimates.append(rho[edge_key(base, m)] * s_base / safe_sin(n, base, m))
            estimates.append(rho[edge_key(base, n)] * s_base / safe_sin(m, base, n))
        mean = float(np.mean(estimates))
        spread = (max(estimates) - min(estimates)) / max(mean, 1e-300)
        if spread > chain_tol:
            raise InconsistentAnglesError(
                f"ratio chains for edge ({m},{n}) disagree "
                f"(relative spread {spread:.3e})",
                max_discrepancy=spread,
            )
        rho[edge_key(m, n)] = mean
    return _squared_matrix(tup, rho)


def displacement_from_angles(
    tup: ConstraintTuple,
    meas: MeasurementSet,
    sin_tol: float = SIN_TOL,
    chain_tol: float = CHAIN_TOL,
    rank_tol: float = RANK_TOL,
    null_tol: float = NULL_TOL,
) -> DisplacementConstraint:
    """Angle pipeline: sine-rule ratio matrix, then the ratio pipeline."""
    M = ratio_matrix_from_angles(tup, meas, sin_tol, chain_tol)
    return _constraint_from_matrix(tup, M, rank_tol, null_tol)


_BUILDERS = {
    MeasurementKind.RELATIVE_POSITION: displacement_from_relative_position,
    MeasurementKind.DISTANCE: displacement_from_distance,
    MeasurementKind.RATIO: displacement_from_ratio,
    MeasurementKind.BEARING: displacement_from_bearing,
    MeasurementKind.ANGLE: displacement_from_angles,
}


def build_constraint(
    tup: ConstraintTuple, meas: MeasurementSet, **kwargs
) -> DisplacementConstraint:
    """Dispatch to the builder matching the measurement family.

    Tolerance keywords not understood by the selected builder are dropped,
    so one setting bundle can drive all five families.
    """
    builder = _BUILDERS[MeasurementKind(meas.kind)]
    accepted = inspect.signature(builder).parameters
    return builder(tup, meas, **{k: v for k, v in kwargs.items() if k in accepted})


def build_constraints(
    graph: NetworkGraph,
    meas: MeasurementSet,
    coplanar: bool = False,
    max_per_center: Optional[int] = None,
    strict: bool = False,
    skip_degenerate: bool = True,
    **kwargs,
) -> Tuple[List[DisplacementConstraint], List[Tuple[ConstraintTuple, str]]]:
    """Build constraints for every matching tuple in the graph.

    Per-tuple failures are skipped and reported (``strict`` raises instead).
    Degenerate tuples (null space dimension > 1) add no unique constraint
    and are skipped by default.
    """
    constraints: List[DisplacementConstraint] = []
    skipped: List[Tuple[ConstraintTuple, str]] = []
    for tup in enumerate_tuples(graph, meas.kind, coplanar, max_per_center):
        try:
            con = build_constraint(tup, meas, **kwargs)
        except NetlocError as exc:
            if strict:
                raise
            skipped.append((tup, str(exc)))
            continue
        if con.degenerate and skip_degenerate:
            if strict:
                raise ValidationError(f"degenerate tuple {tup.nodes}")
            skipped.append((tup, "degenerate null space (dimension > 1)"))
            continue
        constraints.append(con)
    return constraints, skipped
