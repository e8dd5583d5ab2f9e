"""End-to-end acceptance checks, one per documented guarantee.

Each test prints a single PASS line with its headline numbers so a full run
doubles as a short report.
"""

import itertools

import numpy as np
import pytest

from netloc import (
    MeasurementKind,
    NoiseSpec,
    build_constraint,
    build_constraints,
    classify,
    displacement_from_distance,
    displacement_from_ratio,
    is_colinear,
    mds_embed,
    params_from_angles,
    recover_angles,
    rmse,
    solve_distributed,
    solve_global,
    synthesize_measurements,
)
from netloc.cli import main
from netloc.geometry import triangles
from netloc.solver import angle_forms_from_positions, assemble, invariance_check

from helpers import (
    all_family_measurements,
    brute_force_recover,
    colinear_points,
    complete_scene,
    random_triangle_angles,
    random_tuple_scene,
    triangle_params_from_points,
)


def test_angle_parameter_round_trip():
    rng = np.random.default_rng(100)
    worst = 0.0
    for _ in range(1000):
        angles = random_triangle_angles(rng)
        rec = recover_angles(params_from_angles(angles))
        worst = max(
            worst,
            max(abs(a - b) for a, b in zip(angles.as_tuple(), rec.as_tuple())),
        )
    assert worst <= 1e-9
    worst_oracle = 0.0
    for _ in range(200):
        angles = random_triangle_angles(rng, obtuse=True)
        rec = recover_angles(params_from_angles(angles))
        oracle = brute_force_recover(params_from_angles(angles))
        worst_oracle = max(
            worst_oracle, max(abs(a - b) for a, b in zip(rec.as_tuple(), oracle))
        )
    assert worst_oracle <= 1e-6
    print(
        f"\nPASS round-trip: 1000 triangles worst {worst:.2e} (tol 1e-9); "
        f"200 obtuse vs oracle worst {worst_oracle:.2e} (tol 1e-6)"
    )


def test_case_classification():
    rng = np.random.default_rng(101)
    middles = ["i", "j", "k"]
    wrong = 0
    for t in range(500):
        middle = middles[t % 3]
        params = triangle_params_from_points(*colinear_points(rng, middle))
        fired, vertex = is_colinear(params)
        label = classify(params)
        if not fired or vertex != middle or label.tag != "colinear" or label.detail != middle:
            wrong += 1
    for _ in range(500):
        params = params_from_angles(random_triangle_angles(rng))
        if is_colinear(params)[0] or classify(params).tag != "generic":
            wrong += 1
    assert wrong == 0
    print(
        "\nPASS classification: 500 colinear + 500 generic, "
        "0 misclassified, middle vertex always correct"
    )


def test_similarity_invariance_all_families():
    graph, truth = complete_scene(30, 4, seed=102)
    forms = angle_forms_from_positions(list(triangles(graph))[:50], truth)
    worst = 0.0
    for kind in MeasurementKind:
        meas = synthesize_measurements(graph, truth, kind)
        constraints, skipped = build_constraints(graph, meas, max_per_center=1)
        assert constraints and not skipped, kind
        system = assemble(constraints, len(graph.nodes))
        report = invariance_check(system, forms, truth, seed=0)
        assert report["max"] <= 1e-9, (kind, report)
        worst = max(worst, report["max"])
    print(
        f"\nPASS invariance: 5 families on 30 nodes, worst relative "
        f"residual {worst:.2e} (tol 1e-9)"
    )


def test_embedding_congruence_and_ratio_equivalence():
    rng = np.random.default_rng(103)
    worst_d = 0.0
    worst_mu = 0.0
    for _ in range(200):
        graph, truth, tup = random_tuple_scene(rng)
        pts = np.array([truth[v] for v in tup.nodes])
        M = np.array([[float(np.dot(a - b, a - b)) for b in pts] for a in pts])
        q = mds_embed(M, 3)
        for a, b in itertools.combinations(range(5), 2):
            d2 = float(np.dot(q[a] - q[b], q[a] - q[b]))
            worst_d = max(worst_d, abs(d2 - M[a, b]) / max(M[a, b], 1.0))
        m_dist = synthesize_measurements(graph, truth, MeasurementKind.DISTANCE)
        m_ratio = synthesize_measurements(graph, truth, MeasurementKind.RATIO)
        mu_d = displacement_from_distance(tup, m_dist).mu
        mu_r = displacement_from_ratio(tup, m_ratio).mu
        worst_mu = max(worst_mu, float(np.max(np.abs(mu_d - mu_r))))
    assert worst_d <= 1e-9
    assert worst_mu <= 1e-9
    print(
        f"\nPASS embedding: 200 sets, worst distance error {worst_d:.2e}, "
        f"worst ratio-vs-distance mu gap {worst_mu:.2e} (tol 1e-9)"
    )


def test_cross_builder_agreement():
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(100):
        graph, truth, tup = random_tuple_scene(rng)
        mus = [
            build_constraint(tup, meas).mu
            for meas in all_family_measurements(graph, truth).values()
        ]
        for mu in mus[1:]:
            worst = max(worst, float(np.max(np.abs(mu - mus[0]))))
    assert worst <= 1e-8
    print(f"\nPASS cross-builder: 100 tuples, worst mu gap {worst:.2e} (tol 1e-8)")


def test_end_to_end_localization():
    graph, truth = complete_scene(34, 4, seed=105)
    anchors = {v: truth[v] for v in graph.anchors}
    worst = 0.0
    for kind in MeasurementKind:
        meas = synthesize_measurements(graph, truth, kind)
        constraints, _ = build_constraints(graph, meas, max_per_center=3)
        system = assemble(constraints, len(graph.nodes))
        report = solve_global(system, anchors)
        assert report.converged, kind
        err = rmse(report.positions, truth, over=graph.free)
        assert err <= 1e-6, (kind, err)
        worst = max(worst, err)

    meas = synthesize_measurements(graph, truth, MeasurementKind.DISTANCE)
    constraints, _ = build_constraints(graph, meas, max_per_center=3)
    direct = solve_global(assemble(constraints, len(graph.nodes)), anchors)
    iterative = solve_distributed(constraints, anchors, n=len(graph.nodes))
    assert iterative.converged
    gap = rmse(iterative.positions, direct.positions, over=graph.free)
    assert gap <= 1e-4

    def noisy_rmse(sigma, seed):
        m = synthesize_measurements(
            graph, truth, MeasurementKind.DISTANCE,
            noise=NoiseSpec(sigma), seed=seed,
        )
        cons, _ = build_constraints(graph, m, max_per_center=3, rank_tol=0.5)
        rep = solve_global(assemble(cons, len(graph.nodes)), anchors)
        return rmse(rep.positions, truth, over=graph.free)

    high = np.mean([noisy_rmse(0.01, s) for s in range(20)])
    low = np.mean([noisy_rmse(0.001, s) for s in range(20)])
    assert high > low
    print(
        f"\nPASS localization: worst noiseless RMSE {worst:.2e} (tol 1e-6); "
        f"distributed-vs-global gap {gap:.2e} (tol 1e-4); "
        f"mean RMSE sigma=0.01 {high:.2e} > sigma=0.001 {low:.2e}"
    )


def test_coplanar_mode():
    graph, truth = complete_scene(20, 4, seed=106, coplanar=True)
    anchors = {v: truth[v] for v in graph.anchors}
    worst = 0.0
    for kind in MeasurementKind:
        meas = synthesize_measurements(graph, truth, kind)
        constraints, _ = build_constraints(
            graph, meas, coplanar=True, max_per_center=3
        )
        assert constraints, kind
        report = solve_global(assemble(constraints, len(graph.nodes)), anchors)
        assert report.converged, kind
        err = rmse(report.positions, truth, over=graph.free)
        assert err <= 1e-6, (kind, err)
        worst = max(worst, err)
    print(f"\nPASS coplanar: 20 planar nodes, worst RMSE {worst:.2e} (tol 1e-6)")


def test_pipeline_determinism(tmp_path, capsys):
    args = [
        "pipeline", "--nodes", "10", "--anchors", "4", "--seed", "11",
        "--kind", "angle", "--max-per-center", "3",
    ]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    names = ("network.json", "constraints.json", "positions.csv", "report.json")
    for name in names:
        b1 = (tmp_path / "a" / name).read_bytes()
        b2 = (tmp_path / "b" / name).read_bytes()
        assert b1 == b2, name
    print(f"\nPASS determinism: repeated pipeline runs byte-identical ({len(names)} artifacts)")
