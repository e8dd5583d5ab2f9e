"""Command-line front end.

Subcommands: ``generate``, ``constraints``, ``localize``, ``verify``, and
``pipeline`` (all four in sequence).  Exit codes: 0 ok, 2 validation error,
3 unlocalizable / no constraints, 4 tolerance breach.  All artifacts are
byte-reproducible for a fixed seed and configuration; wall-clock timings go
to the log only.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio
from .angle_constraints import params_from_angles, recover_angles
from .builders import RANK_TOL, build_constraints
from .errors import NetlocError, ValidationError
from .geometry import (
    MeasurementKind,
    NoiseSpec,
    interior_angle,
    pairwise_distance,
    synthesize_measurements,
    triangles,
)
from .simulate import ScenarioConfig, generate_network
from .solver import (
    angle_forms_from_positions,
    assemble,
    invariance_check,
    rmse,
    solve_distributed,
    solve_global,
)

log = logging.getLogger("netloc")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UNLOCALIZABLE = 3
EXIT_TOLERANCE = 4

VERIFY_TOL = 1e-9


def _fail(code: int, reason: str, **detail) -> int:
    print(json.dumps({"error": reason, "exit_code": code, **detail}, sort_keys=True), file=sys.stderr)
    return code


def _scenario_from_args(args) -> ScenarioConfig:
    edges = ()
    if args.graph == "explicit":
        if not args.edges_file:
            raise ValidationError("--edges-file is required for --graph explicit")
        with open(args.edges_file) as fh:
            edges = tuple(tuple(e) for e in json.load(fh))
    return ScenarioConfig(
        n_nodes=args.nodes,
        n_anchors=args.anchors,
        kind=MeasurementKind(args.kind),
        graph_model=args.graph,
        radius=args.radius,
        edges=edges,
        coplanar=args.coplanar,
        sigma=args.noise_sigma,
        seed=args.seed,
    )


def cmd_generate(args) -> int:
    config = _scenario_from_args(args)
    t0 = time.monotonic()
    graph, truth, meas = generate_network(config)
    log.info("generated network in %.3fs", time.monotonic() - t0)
    fileio.save_network(
        args.out,
        graph,
        truth=truth,
        meas=meas,
        coplanar=config.coplanar,
        sigma=config.sigma,
        seed=config.seed,
    )
    print(json.dumps({"out": str(args.out), "nodes": len(graph.nodes), "edges": len(graph.edges)}, sort_keys=True))
    return EXIT_OK


def _measurements_for(graph, truth, embedded, kind, sigma, seed):
    if embedded is not None and embedded.kind is kind:
        return embedded
    if len(truth) != len(graph.nodes):
        raise ValidationError(
            f"no embedded {kind.value} measurements and no complete ground "
            "truth to synthesize them from"
        )
    return synthesize_measurements(graph, truth, kind, noise=NoiseSpec(sigma), seed=seed)


def cmd_constraints(args) -> int:
    graph, truth, embedded, coplanar_file = fileio.load_network(args.network)
    coplanar = args.coplanar or coplanar_file
    kind = MeasurementKind(args.kind) if args.kind else (embedded.kind if embedded else None)
    if kind is None:
        return _fail(EXIT_VALIDATION, "no measurement kind given or embedded")
    meas = _measurements_for(graph, truth, embedded, kind, args.noise_sigma, args.seed)
    # Noisy matrices are only approximately embeddable; relax the spectrum
    # check in proportion to the declared noise.
    rank_tol = args.rank_tol
    if rank_tol is None:
        rank_tol = RANK_TOL if args.noise_sigma == 0 else 0.5
    t0 = time.monotonic()
    constraints, skipped = build_constraints(
        graph,
        meas,
        coplanar=coplanar,
        max_per_center=args.max_per_center,
        rank_tol=rank_tol,
    )
    log.info("built %d constraints in %.3fs", len(constraints), time.monotonic() - t0)
    fileio.save_constraints(
        args.out, constraints, skipped, kind, coplanar,
        truth=truth if len(truth) == len(graph.nodes) else None,
    )
    summary = {
        "out": str(args.out),
        "constraints": len(constraints),
        "skipped": len(skipped),
        "kind": kind.value,
    }
    print(json.dumps(summary, sort_keys=True))
    if not constraints:
        return _fail(EXIT_UNLOCALIZABLE, "no-constraints", kind=kind.value)
    return EXIT_OK


def cmd_localize(args) -> int:
    graph, truth, _, _ = fileio.load_network(args.network)
    constraints, kind, _ = fileio.load_constraints(args.constraints)
    anchors = {v: truth[v] for v in graph.anchors if v in truth}
    if len(anchors) != len(graph.anchors):
        return _fail(
            EXIT_VALIDATION,
            "anchor positions missing from network file",
            missing=sorted(set(graph.anchors) - set(anchors)),
        )
    if not anchors:
        return _fail(EXIT_VALIDATION, "network has no anchors")
    n = max(graph.nodes) + 1
    system = assemble(constraints, n)
    t0 = time.monotonic()
    if args.solver == "distributed":
        report = solve_distributed(
            constraints, anchors, n=n,
            max_iters=args.max_iters, step=args.step, tol=args.tol,
        )
    else:
        report = solve_global(system, anchors)
    log.info("solved in %.3fs (%d iterations)", time.monotonic() - t0, report.iterations)
    positions = {v: report.positions[v] for v in graph.nodes}
    fileio.write_positions_csv(args.out, positions, truth=truth or None)
    run_report = {
        "constraints": len(constraints),
        "kind": kind.value,
        "solver": args.solver,
        "rng": fileio.RNG_ID,
        "converged": report.converged,
        "iterations": report.iterations,
        "residual_norm": report.residual_norm,
        "rank_diagnostics": report.rank_diagnostics,
        "rmse_free": rmse(report.positions, truth, over=[v for v in graph.free if v in truth])
        if truth and any(v in truth for v in graph.free)
        else None,
    }
    if args.report:
        fileio.dump_json(run_report, args.report)
    print(json.dumps(fileio._jsonable(run_report), sort_keys=True))
    if not report.converged:
        return _fail(EXIT_UNLOCALIZABLE, "rank-deficient free block", **{
            k: float(v) for k, v in report.rank_diagnostics.items()
        })
    return EXIT_OK


def cmd_verify(args) -> int:
    graph, truth, _, _ = fileio.load_network(args.network)
    constraints, kind, _ = fileio.load_constraints(args.constraints)
    if len(truth) != len(graph.nodes):
        return _fail(EXIT_VALIDATION, "verification requires embedded ground truth")
    n = max(graph.nodes) + 1
    offenders = []
    worst_constraint = 0.0
    for con in constraints:
        scale = max(
            pairwise_distance(truth[con.center], truth[v]) for v in con.neighbors
        )
        res = con.residual(truth) / max(scale, 1e-300)
        worst_constraint = max(worst_constraint, res)
        if res > VERIFY_TOL:
            offenders.append(
                {"center": con.center, "neighbors": list(con.neighbors), "residual": res}
            )
    system = assemble(constraints, n)
    tris = list(triangles(graph))
    forms = angle_forms_from_positions(tris, truth)
    inv = invariance_check(system, forms, truth, seed=0)
    worst_roundtrip = 0.0
    for (a, b, c) in tris:
        angles_true = (
            interior_angle(truth[a], truth[b], truth[c]),
            interior_angle(truth[b], truth[a], truth[c]),
            interior_angle(truth[c], truth[a], truth[b]),
        )
        sides = None
        if min(angles_true) < 1e-9 or max(angles_true) > math.pi - 1e-9:
            sides = (
                pairwise_distance(truth[a], truth[b]),
                pairwise_distance(truth[a], truth[c]),
                pairwise_distance(truth[b], truth[c]),
            )
        from .angle_constraints import TriangleAngles

        params = params_from_angles(TriangleAngles(*angles_true), colinear_side_lengths=sides)
        recovered = recover_angles(params).as_tuple()
        worst_roundtrip = max(
            worst_roundtrip, max(abs(x - y) for x, y in zip(angles_true, recovered))
        )
    report = {
        "constraints": len(constraints),
        "kind": kind.value,
        "max_constraint_residual": worst_constraint,
        "invariance": inv,
        "max_angle_roundtrip_error": worst_roundtrip,
        "offending_constraints": offenders,
        "tolerance": VERIFY_TOL,
    }
    print(json.dumps(fileio._jsonable(report), sort_keys=True))
    ok = (
        not offenders
        and inv["max"] <= VERIFY_TOL
        and worst_roundtrip <= VERIFY_TOL
    )
    if not ok:
        return _fail(
            EXIT_TOLERANCE,
            "tolerance breach",
            max_constraint_residual=worst_constraint,
            max_invariance_residual=inv["max"],
            max_angle_roundtrip_error=worst_roundtrip,
        )
    return EXIT_OK


def cmd_pipeline(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    network = out_dir / "network.json"
    constraints = out_dir / "constraints.json"
    positions = out_dir / "positions.csv"
    report = out_dir / "report.json"

    ns = argparse.Namespace(**vars(args))
    ns.out = network
    code = cmd_generate(ns)
    if code:
        return code
    ns = argparse.Namespace(
        network=network, out=constraints, kind=args.kind, coplanar=args.coplanar,
        noise_sigma=args.noise_sigma, seed=args.seed,
        rank_tol=args.rank_tol, max_per_center=args.max_per_center,
    )
    code = cmd_constraints(ns)
    if code:
        return code
    ns = argparse.Namespace(
        network=network, constraints=constraints, out=positions, report=report,
        solver=args.solver, max_iters=args.max_iters, step=args.step, tol=args.tol,
    )
    code = cmd_localize(ns)
    if code:
        return code
    ns = argparse.Namespace(network=network, constraints=constraints)
    return cmd_verify(ns)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netloc",
        description="Displacement-constraint network localization simulator",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    kinds = [k.value for k in MeasurementKind]

    def add_scenario(p):
        p.add_argument("--nodes", type=int, default=10)
        p.add_argument("--anchors", type=int, default=4)
        p.add_argument("--graph", choices=["complete", "geometric", "explicit"], default="complete")
        p.add_argument("--radius", type=float, default=0.0)
        p.add_argument("--edges-file", default=None)
        p.add_argument("--kind", choices=kinds, default="distance")
        p.add_argument("--coplanar", action="store_true")
        p.add_argument("--noise-sigma", type=float, default=0.0)
        p.add_argument("--seed", type=int, default=0)

    def add_builder(p):
        p.add_argument("--rank-tol", type=float, default=None)
        p.add_argument("--max-per-center", type=int, default=None)

    def add_solver(p):
        p.add_argument("--solver", choices=["global", "distributed"], default="global")
        p.add_argument("--max-iters", type=int, default=50000)
        p.add_argument("--step", type=float, default=None)
        p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("generate", help="generate a scenario network file")
    add_scenario(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("constraints", help="build displacement constraints")
    p.add_argument("network")
    p.add_argument("--kind", choices=kinds, default=None)
    p.add_argument("--coplanar", action="store_true")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    add_builder(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_constraints)

    p = sub.add_parser("localize", help="solve for free-node positions")
    p.add_argument("network")
    p.add_argument("constraints")
    add_solver(p)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("verify", help="check invariances and tolerances")
    p.add_argument("network")
    p.add_argument("constraints")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("pipeline", help="generate, build, solve, verify")
    add_scenario(p)
    add_builder(p)
    add_solver(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except NetlocError as exc:
        return _fail(EXIT_VALIDATION, str(exc), kind="internal")


def entry() -> None:  # console-script shim
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
