"""Stacked constraint systems, invariance checks, and position solvers.

Each displacement constraint contributes one node-level coefficient row; the
full matrix acting on stacked 3-D coordinates is the Kronecker product of
that row matrix with the 3x3 identity.  The solvers hold anchor coordinates
fixed and estimate the free-node block, either directly (least squares) or
by a synchronous-round gradient iteration in which every node only ever
touches its own and incident constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .angle_constraints import TriangleAngles, params_from_angles
from .builders import DisplacementConstraint
from .errors import ValidationError
from .geometry import interior_angle, pairwise_distance, random_rotation

RANK_TOL = 1e-8


@dataclass(frozen=True)
class AngleConstraintForm:
    """Scalar angle constraint on a node triple.

    ``value`` vanishes on the positions the parameters were built from and
    stays zero under translation, rotation, and uniform scaling of the
    whole configuration.
    """

    i: int
    j: int
    k: int
    w_ik: float
    w_ki: float

    def value(self, positions: Mapping[int, np.ndarray]) -> float:
        p_i = np.asarray(positions[self.i], dtype=float)
        p_j = np.asarray(positions[self.j], dtype=float)
        p_k = np.asarray(positions[self.k], dtype=float)
        e_ik = p_k - p_i
        e_ij = p_j - p_i
        e_kj = p_j - p_k
        return float(self.w_ik * np.dot(e_ik, e_ij) + self.w_ki * np.dot(-e_ik, e_kj))

    def normalized_value(self, positions: Mapping[int, np.ndarray]) -> float:
        p_i = np.asarray(positions[self.i], dtype=float)
        p_j = np.asarray(positions[self.j], dtype=float)
        p_k = np.asarray(positions[self.k], dtype=float)
        scale = abs(self.w_ik) * np.linalg.norm(p_k - p_i) * np.linalg.norm(p_j - p_i)
        scale += abs(self.w_ki) * np.linalg.norm(p_k - p_i) * np.linalg.norm(p_j - p_k)
        return abs(self.value(positions)) / max(scale, 1e-300)


def angle_forms_from_positions(
    triples: Iterable[Tuple[int, int, int]],
    positions: Mapping[int, np.ndarray],
) -> List[AngleConstraintForm]:
    """Build scalar angle forms for node triples from true positions."""
    forms = []
    for a, b, c in triples:
        p = {v: np.asarray(positions[v], dtype=float) for v in (a, b, c)}
        angles = TriangleAngles(
            interior_angle(p[a], p[b], p[c]),
            interior_angle(p[b], p[a], p[c]),
            interior_angle(p[c], p[a], p[b]),
        )
        sides = None
        if min(angles.as_tuple()) < 1e-9 or max(angles.as_tuple()) > math.pi - 1e-9:
            sides = (
                pairwise_distance(p[a], p[b]),
                pairwise_distance(p[a], p[c]),
                pairwise_distance(p[b], p[c]),
            )
        params = params_from_angles(angles, colinear_side_lengths=sides)
        forms.append(AngleConstraintForm(a, b, c, params.w_ik, params.w_ki))
    return forms


@dataclass(frozen=True)
class StackedConstraintSystem:
    """Node-level coefficient matrix for a batch of constraints."""

    n: int
    constraints: Tuple[DisplacementConstraint, ...]
    coeff: sp.csr_matrix

    @property
    def matrix(self) -> sp.csr_matrix:
        """Expanded matrix over the 3n stacked coordinates."""
        return sp.kron(self.coeff, sp.eye(3), format="csr")


def assemble(
    constraints: Sequence[DisplacementConstraint], n: int
) -> StackedConstraintSystem:
    """Stack constraints into a sparse system over ``n`` nodes.

    Each constraint contributes its neighbor coefficients plus the implied
    center coefficient ``-sum(mu)``.
    """
    rows, cols, vals = [], [], []
    for r, con in enumerate(constraints):
        nodes = (*con.neighbors, con.center)
        if any(v < 0 or v >= n for v in nodes):
            raise ValidationError(
                f"constraint references node outside range [0, {n})"
            )
        for node, mu in zip(con.neighbors, con.mu):
            rows.append(r)
            cols.append(node)
            vals.append(float(mu))
        rows.append(r)
        cols.append(con.center)
        vals.append(float(-np.sum(con.mu)))
    coeff = sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(constraints), n)
    )
    return StackedConstraintSystem(n=n, constraints=tuple(constraints), coeff=coeff)


def stack_positions(positions: Mapping[int, np.ndarray], n: int) -> np.ndarray:
    p = np.zeros((n, 3))
    for v, x in positions.items():
        p[v] = np.asarray(x, dtype=float)
    return p


_SKEW_BASIS = (
    np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
    np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
    np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
)


def invariance_check(
    system: StackedConstraintSystem,
    angle_forms: Sequence[AngleConstraintForm],
    positions: Mapping[int, np.ndarray],
    seed: int = 0,
) -> Dict[str, float]:
    """Relative residuals of the null-space and similarity invariances.

    Checks that the stacked matrix kills the scaled configuration, the
    translation basis, and the rotated configurations for a basis of
    skew-symmetric generators, and that the scalar angle forms vanish at the
    configuration and its random translate / rotation / rescaling.
    """
    C = system.coeff
    norm_c = sp.linalg.norm(C) if C.nnz else 0.0
    pts = stack_positions(positions, system.n)

    def rel(block: np.ndarray) -> float:
        if norm_c == 0.0:
            return 0.0
        return float(np.linalg.norm(C @ block) / (norm_c * max(np.linalg.norm(block), 1e-300)))

    report = {
        "scaling": rel(pts),
        "translation": rel(np.ones((system.n, 1))),
        "rotation": max(rel(pts @ A.T) for A in _SKEW_BASIS) if system.n else 0.0,
    }
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(3)
    R = random_rotation(rng).rotation
    s = float(rng.uniform(0.5, 2.0))
    configs = {
        "angle_base": {v: pts[v] for v in range(system.n)},
        "angle_translated": {v: pts[v] + t for v in range(system.n)},
        "angle_rotated": {v: R @ pts[v] for v in range(system.n)},
        "angle_scaled": {v: s * pts[v] for v in range(system.n)},
    }
    for name, cfg in configs.items():
        report[name] = max(
            (f.normalized_value(cfg) for f in angle_forms), default=0.0
        )
    report["max"] = max(report.values())
    return report


@dataclass
class SolveReport:
    """Solver output: positions plus convergence and rank diagnostics."""

    positions: Dict[int, np.ndarray]
    residual_norm: float
    iterations: int
    converged: bool
    rank_diagnostics: Dict[str, float]
    trace: Optional[List[float]] = None


def _partition(system: StackedConstraintSystem, anchors: Mapping[int, np.ndarray]):
    anchor_ids = sorted(int(v) for v in anchors)
    if not anchor_ids:
        raise ValidationError("at least one anchor is required")
    if any(v < 0 or v >= system.n for v in anchor_ids):
        raise ValidationError("anchor id outside node range")
    free_ids = [v for v in range(system.n) if v not in set(anchor_ids)]
    B = system.matrix.toarray()
    cols = lambda ids: np.concatenate([[3 * v, 3 * v + 1, 3 * v + 2] for v in ids]).astype(int) if ids else np.zeros(0, dtype=int)
    B_f = B[:, cols(free_ids)]
    B_a = B[:, cols(anchor_ids)]
    p_a = np.concatenate([np.asarray(anchors[v], dtype=float) for v in anchor_ids])
    return anchor_ids, free_ids, B_f, B_a, p_a


def _rank_diagnostics(B_f: np.ndarray, rank_tol: float) -> Tuple[Dict[str, float], bool]:
    if B_f.size == 0:
        return {"smallest_sv": 0.0, "largest_sv": 0.0, "gap": 0.0}, B_f.shape[1] == 0
    s = np.linalg.svd(B_f, compute_uv=False)
    s_max = float(s[0])
    s_min = float(s[-1]) if len(s) >= B_f.shape[1] else 0.0
    full_rank = len(s) >= B_f.shape[1] and s_min > rank_tol * max(s_max, 1e-300)
    return (
        {"smallest_sv": s_min, "largest_sv": s_max, "gap": s_min / max(s_max, 1e-300)},
        full_rank,
    )


def solve_global(
    system: StackedConstraintSystem,
    anchors: Mapping[int, np.ndarray],
    rank_tol: float = RANK_TOL,
) -> SolveReport:
    """Least-squares solve for the free nodes with anchors held fixed.

    ``converged`` is true only when the free block has full column rank, in
    which case the minimizer is unique; otherwise the minimum-norm solution
    is returned together with the rank diagnostics.
    """
    anchor_ids, free_ids, B_f, B_a, p_a = _partition(system, anchors)
    positions = {v: np.asarray(anchors[v], dtype=float) for v in anchor_ids}
    if len(system.constraints) == 0:
        for v in free_ids:
            positions[v] = np.zeros(3)
        return SolveReport(positions, 0.0, 0, False, {"smallest_sv": 0.0, "largest_sv": 0.0, "gap": 0.0})
    rhs = -B_a @ p_a
    x, *_ = np.linalg.lstsq(B_f, rhs, rcond=None)
    diagnostics, full_rank = _rank_diagnostics(B_f, rank_tol)
    for idx, v in enumerate(free_ids):
        positions[v] = x[3 * idx : 3 * idx + 3]
    residual = float(np.linalg.norm(B_f @ x - rhs))
    return SolveReport(positions, residual, 0, full_rank, diagnostics)


def solve_distributed(
    constraints: Sequence[DisplacementConstraint],
    anchors: Mapping[int, np.ndarray],
    n: Optional[int] = None,
    max_iters: int = 50000,
    step: Optional[float] = None,
    tol: float = 1e-10,
    rank_tol: float = RANK_TOL,
) -> SolveReport:
    """Synchronous-round gradient iteration on the stacked residual.

    Every round each free node moves against the gradient of half the
    squared residual of its own and incident constraints, which is exactly
    the global gradient restricted to that node; anchors never move.  The
    step auto-halves whenever the residual would increase, and the report
    carries the per-round residual trace.
    """
    if step is not None and step <= 0:
        raise ValidationError("step must be > 0")
    if n is None:
        referenced = {v for c in constraints for v in (c.center, *c.neighbors)}
        referenced |= {int(v) for v in anchors}
        n = max(referenced) + 1 if referenced else 0
    system = assemble(constraints, n)
    anchor_ids, free_ids, B_f, B_a, p_a = _partition(system, anchors)
    positions = {v: np.asarray(anchors[v], dtype=float) for v in anchor_ids}
    diagnostics, full_rank = _rank_diagnostics(B_f, rank_tol)
    if len(constraints) == 0 or not free_ids:
        for v in free_ids:
            positions[v] = np.zeros(3)
        return SolveReport(positions, 0.0, 0, False, diagnostics, trace=[])
    if step is None:
        step = 1.9 / max(diagnostics["largest_sv"] ** 2, 1e-300)
    centroid = np.mean(np.reshape(p_a, (-1, 3)), axis=0)
    x = np.tile(centroid, len(free_ids))
    rhs = -B_a @ p_a
    r = B_f @ x - rhs
    res = float(np.linalg.norm(r))
    trace = [res]
    converged = False
    iterations = 0
    min_step = step * 2.0**-40
    while iterations < max_iters:
        g = B_f.T @ r
        x_new = x - step * g
        r_new = B_f @ x_new - rhs
        res_new = float(np.linalg.norm(r_new))
        if res_new > res * (1 + 1e-12):
            step *= 0.5
            if step < min_step:
                break
            continue
        iterations += 1
        disp = float(np.max(np.abs(x_new - x))) if x.size else 0.0
        x, r, res = x_new, r_new, res_new
        trace.append(res)
        if disp < tol:
            converged = True
            break
    for idx, v in enumerate(free_ids):
        positions[v] = x[3 * idx : 3 * idx + 3]
    return SolveReport(
        positions,
        res,
        iterations,
        converged and full_rank,
        diagnostics,
        trace=trace,
    )


def rmse(
    est: Mapping[int, np.ndarray],
    truth: Mapping[int, np.ndarray],
    over: Optional[Iterable[int]] = None,
) -> float:
    """Root-mean-square of per-node Euclidean errors over a node subset."""
    ids = sorted(over) if over is not None else sorted(truth)
    if not ids:
        raise ValidationError("rmse over an empty node subset")
    errs = [
        np.linalg.norm(np.asarray(est[v], dtype=float) - np.asarray(truth[v], dtype=float))
        for v in ids
    ]
    return float(np.sqrt(np.mean(np.square(errs))))
