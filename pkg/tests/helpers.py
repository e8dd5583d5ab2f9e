"""Shared fixtures and independent oracles for the test suite."""

import itertools
import math

import numpy as np
from scipy.optimize import minimize

from netloc import (
    ConstraintTuple,
    LocalFrame,
    MeasurementKind,
    TriangleAngles,
    make_graph,
    synthesize_measurements,
)
from netloc.geometry import complete_edges, random_rotation


def random_triangle_angles(rng, margin=1e-3, obtuse=None):
    """Angles of a random triangle kept ``margin`` away from 0, pi/2, pi.

    ``obtuse=True`` forces one angle above pi/2; ``obtuse=False`` forces all
    acute.
    """
    while True:
        ti, tj = rng.uniform(margin, math.pi - margin, 2)
        tk = math.pi - ti - tj
        angles = (ti, tj, tk)
        if any(t < margin or t > math.pi - margin for t in angles):
            continue
        if any(abs(t - math.pi / 2) < margin for t in angles):
            continue
        has_obtuse = any(t > math.pi / 2 for t in angles)
        if obtuse is not None and has_obtuse != obtuse:
            continue
        return TriangleAngles(*angles)


def constraint_equation_residual(params, theta_i, theta_j):
    """Summed squared residual of the three bilinear constraints.

    Distances come from the sine rule so this depends only on the trial
    angles; used as the objective of the brute-force inversion oracle.
    """
    theta_k = math.pi - theta_i - theta_j
    if theta_i <= 0 or theta_j <= 0 or theta_k <= 0:
        return math.inf
    d_jk, d_ik, d_ij = math.sin(theta_i), math.sin(theta_j), math.sin(theta_k)
    ci, cj, ck = math.cos(theta_i), math.cos(theta_j), math.cos(theta_k)
    w = params.as_array() / np.linalg.norm(params.as_array())
    r1 = w[0] * d_ik * d_ij * ci + w[1] * d_ik * d_jk * ck
    r2 = w[2] * d_ik * d_ij * ci + w[3] * d_ij * d_jk * cj
    r3 = w[4] * d_jk * d_ij * cj + w[5] * d_ik * d_jk * ck
    # normalize out the distance scale so degenerate triangles do not
    # produce trivial zeros
    n1 = math.hypot(d_ik * d_ij, d_ik * d_jk)
    n2 = math.hypot(d_ik * d_ij, d_ij * d_jk)
    n3 = math.hypot(d_jk * d_ij, d_ik * d_jk)
    return (r1 / n1) ** 2 + (r2 / n2) ** 2 + (r3 / n3) ** 2


def brute_force_recover(params, grid=240):
    """Numeric inversion of a parameter set: grid search plus refinement.

    Independent of the closed-form recovery path; only evaluates the
    constraint equations themselves.
    """
    ts = np.linspace(1e-4, math.pi - 1e-4, grid)
    ti_grid, tj_grid = np.meshgrid(ts, ts, indexing="ij")
    tk_grid = math.pi - ti_grid - tj_grid
    valid = tk_grid > 1e-4
    d_jk, d_ik, d_ij = np.sin(ti_grid), np.sin(tj_grid), np.sin(tk_grid)
    ci, cj, ck = np.cos(ti_grid), np.cos(tj_grid), np.cos(tk_grid)
    w = params.as_array() / np.linalg.norm(params.as_array())
    r1 = w[0] * d_ik * d_ij * ci + w[1] * d_ik * d_jk * ck
    r2 = w[2] * d_ik * d_ij * ci + w[3] * d_ij * d_jk * cj
    r3 = w[4] * d_jk * d_ij * cj + w[5] * d_ik * d_jk * ck
    n1 = np.hypot(d_ik * d_ij, d_ik * d_jk)
    n2 = np.hypot(d_ik * d_ij, d_ij * d_jk)
    n3 = np.hypot(d_jk * d_ij, d_ik * d_jk)
    with np.errstate(invalid="ignore", divide="ignore"):
        obj = np.where(
            valid, (r1 / n1) ** 2 + (r2 / n2) ** 2 + (r3 / n3) ** 2, np.inf
        )
    best = np.unravel_index(np.argmin(obj), obj.shape)
    x0 = np.array([ti_grid[best], tj_grid[best]])
    res = minimize(
        lambda x: constraint_equation_residual(params, x[0], x[1]),
        x0,
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 2000},
    )
    ti, tj = res.x
    return (ti, tj, math.pi - ti - tj)


def colinear_points(rng, middle):
    """Three colinear 3-D points; ``middle`` in {'i','j','k'} sits between."""
    origin = rng.uniform(-1, 1, 3)
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    a, b = sorted(rng.uniform(0.2, 2.0, 2))
    mid = origin
    left = origin - a * direction
    right = origin + b * direction
    if middle == "i":
        return mid, left, right
    if middle == "j":
        return left, mid, right
    return left, right, mid


def triangle_params_from_points(p_i, p_j, p_k):
    """Angle parameters computed straight from point geometry."""
    from netloc import interior_angle, pairwise_distance, params_from_angles

    angles = (
        interior_angle(p_i, p_j, p_k),
        interior_angle(p_j, p_i, p_k),
        interior_angle(p_k, p_i, p_j),
    )
    sides = None
    if max(angles) > math.pi - 1e-6:
        # arccos is ill-conditioned near 0 and pi; snap to the exact
        # degenerate pattern
        flat = int(np.argmax(angles))
        angles = tuple(math.pi if n == flat else 0.0 for n in range(3))
        sides = (
            pairwise_distance(p_i, p_j),
            pairwise_distance(p_i, p_k),
            pairwise_distance(p_j, p_k),
        )
    return params_from_angles(TriangleAngles(*angles), colinear_side_lengths=sides)


def random_tuple_scene(rng, coplanar=False, min_sin=0.05, min_dist=0.15):
    """Random well-conditioned tuple: center node 0 plus sorted neighbors.

    Returns ``(graph, truth, tup)`` with random local frames and a complete
    edge set, resampled until no node triple is close to colinear.
    """
    m = 4 if coplanar else 5
    while True:
        pts = rng.uniform(0.0, 1.0, (m, 3))
        if coplanar:
            pts[:, 2] = 0.0
        ok = True
        for a, b in itertools.combinations(range(m), 2):
            if np.linalg.norm(pts[a] - pts[b]) < min_dist:
                ok = False
        for a, b, c in itertools.permutations(range(m), 3):
            u = pts[b] - pts[a]
            v = pts[c] - pts[a]
            s = np.linalg.norm(np.cross(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
            if s < min_sin:
                ok = False
        if not coplanar:
            # keep the five points solidly 3-D
            spread = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
            if spread[2] < 0.1:
                ok = False
        if not ok:
            continue
        nodes = range(m)
        frames = {v: random_rotation(rng) for v in nodes}
        graph = make_graph(nodes, anchors=[0], edges=complete_edges(nodes), frames=frames)
        truth = {v: pts[v] for v in nodes}
        return graph, truth, ConstraintTuple(0, tuple(range(1, m)))


def complete_scene(n_nodes, n_anchors, seed, coplanar=False):
    """Complete-graph scenario with random frames and well-spread anchors."""
    rng = np.random.default_rng(seed)
    while True:
        pts = rng.uniform(0.0, 1.0, (n_nodes, 3))
        if coplanar:
            pts[:, 2] = 0.0
        anchor_pts = pts[:n_anchors] - pts[:n_anchors].mean(axis=0)
        s = np.linalg.svd(anchor_pts, compute_uv=False)
        # n_anchors centered points span at most n_anchors - 1 dimensions
        need = min(2 if coplanar else 3, n_anchors - 1)
        if need < 1 or s[need - 1] > 0.15:
            break
    frames = {v: random_rotation(rng) for v in range(n_nodes)}
    graph = make_graph(
        range(n_nodes),
        anchors=range(n_anchors),
        edges=complete_edges(range(n_nodes)),
        frames=frames,
    )
    truth = {v: pts[v] for v in range(n_nodes)}
    return graph, truth


def all_family_measurements(graph, truth, seed=0):
    return {
        kind: synthesize_measurements(graph, truth, kind, seed=seed)
        for kind in MeasurementKind
    }
