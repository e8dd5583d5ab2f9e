"""Serialization of networks, constraints, and solver output.

All JSON is emitted with sorted keys and stable float formatting so that a
fixed seed and configuration reproduce files byte for byte.
"""

from __future__ import annotations

import json
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .builders import DisplacementConstraint
from .errors import ValidationError
from .geometry import (
    LocalFrame,
    MeasurementKind,
    MeasurementSet,
    NetworkGraph,
    make_graph,
)

NETWORK_SCHEMA = "netloc-network-v1"
CONSTRAINTS_SCHEMA = "netloc-constraints-v1"
RNG_ID = "numpy-PCG64"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [float(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Mapping):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


def dump_json(payload, path) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2)
    with open(path, "w", newline="\n") as fh:
        fh.write(text + "\n")


def measurements_to_records(meas: MeasurementSet) -> List[Dict]:
    return [
        {"key": list(key) if isinstance(key, tuple) else [key], "value": _jsonable(value)}
        for key, value in sorted(meas.data.items())
    ]


def records_to_measurements(payload: Dict) -> MeasurementSet:
    kind = MeasurementKind(payload["kind"])
    data = {}
    for rec in payload["records"]:
        key = tuple(int(v) for v in rec["key"])
        value = rec["value"]
        data[key] = np.asarray(value, dtype=float) if isinstance(value, list) else float(value)
    ref = payload.get("ref_edge")
    return MeasurementSet(kind, data, ref_edge=tuple(ref) if ref else None)


def save_network(
    path,
    graph: NetworkGraph,
    truth: Optional[Mapping[int, np.ndarray]] = None,
    meas: Optional[MeasurementSet] = None,
    coplanar: bool = False,
    sigma: float = 0.0,
    seed: int = 0,
) -> None:
    nodes = []
    for v in graph.nodes:
        nodes.append(
            {
                "id": v,
                "role": "anchor" if v in graph.anchors else "free",
                "truth": _jsonable(truth[v]) if truth is not None and v in truth else None,
                "frame": list(graph.frames[v].quaternion()),
            }
        )
    payload = {
        "schema": NETWORK_SCHEMA,
        "coplanar": coplanar,
        "nodes": nodes,
        "edges": [list(e) for e in sorted(graph.edges)],
        "measurements": None
        if meas is None
        else {
            "kind": meas.kind.value,
            "sigma": sigma,
            "seed": seed,
            "ref_edge": list(meas.ref_edge) if meas.ref_edge else None,
            "records": measurements_to_records(meas),
        },
    }
    dump_json(payload, path)


def load_network(path):
    """Returns ``(graph, truth, measurements, coplanar)``.

    ``truth`` maps only the nodes that embed a ground-truth position.
    """
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != NETWORK_SCHEMA:
        raise ValidationError(f"unrecognized network schema in {path}")
    nodes, anchors, frames, truth = [], [], {}, {}
    for rec in payload["nodes"]:
        v = int(rec["id"])
        nodes.append(v)
        if rec.get("role") == "anchor":
            anchors.append(v)
        if rec.get("frame") is not None:
            frames[v] = LocalFrame.from_quaternion(rec["frame"])
        if rec.get("truth") is not None:
            truth[v] = np.asarray(rec["truth"], dtype=float)
    graph = make_graph(nodes, anchors, payload.get("edges", ()), frames)
    meas = None
    if payload.get("measurements"):
        meas = records_to_measurements(payload["measurements"])
    return graph, truth, meas, bool(payload.get("coplanar", False))


def save_constraints(
    path,
    constraints,
    skipped,
    kind: MeasurementKind,
    coplanar: bool,
    truth: Optional[Mapping[int, np.ndarray]] = None,
) -> None:
    records = []
    for con in constraints:
        records.append(
            {
                "center": con.center,
                "neighbors": list(con.neighbors),
                "mu": _jsonable(con.mu),
                "residual_truth": con.residual(truth) if truth else None,
            }
        )
    payload = {
        "schema": CONSTRAINTS_SCHEMA,
        "kind": MeasurementKind(kind).value,
        "coplanar": coplanar,
        "rng": RNG_ID,
        "constraints": records,
        "skipped": [
            {"center": tup.center, "neighbors": list(tup.neighbors), "reason": reason}
            for tup, reason in skipped
        ],
    }
    dump_json(payload, path)


def load_constraints(path) -> Tuple[List[DisplacementConstraint], MeasurementKind, bool]:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != CONSTRAINTS_SCHEMA:
        raise ValidationError(f"unrecognized constraints schema in {path}")
    constraints = [
        DisplacementConstraint(
            center=int(rec["center"]),
            neighbors=tuple(int(v) for v in rec["neighbors"]),
            mu=np.asarray(rec["mu"], dtype=float),
        )
        for rec in payload["constraints"]
    ]
    return constraints, MeasurementKind(payload["kind"]), bool(payload["coplanar"])


def write_positions_csv(path, positions, truth=None) -> None:
    """Fixed columns ``node_id,x,y,z,err``; 17 significant digits."""
    lines = ["node_id,x,y,z,err"]
    for v in sorted(positions):
        x, y, z = (float(c) for c in positions[v])
        if truth and v in truth:
            err = f"{float(np.linalg.norm(positions[v] - np.asarray(truth[v], dtype=float))):.17g}"
        else:
            err = ""
        lines.append(f"{v},{x:.17g},{y:.17g},{z:.17g},{err}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
