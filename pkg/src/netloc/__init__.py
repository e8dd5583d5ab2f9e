"""Displacement-constraint construction and anchor-based 3-D localization."""

from .angle_constraints import (
    AngleParameterSet,
    CaseLabel,
    TriangleAngles,
    classify,
    is_colinear,
    params_from_angles,
    recover_angles,
)
from .builders import (
    ConstraintTuple,
    DisplacementConstraint,
    build_constraint,
    build_constraints,
    canonicalize,
    displacement_from_angles,
    displacement_from_bearing,
    displacement_from_distance,
    displacement_from_ratio,
    displacement_from_relative_position,
    enumerate_tuples,
    mds_embed,
    null_coefficients,
)
from .errors import (
    ColinearityError,
    DegenerateGeometryError,
    InconsistentAnglesError,
    InconsistentParametersError,
    NetlocError,
    NotEmbeddableError,
    ValidationError,
)
from .geometry import (
    LocalFrame,
    MeasurementKind,
    MeasurementSet,
    NetworkGraph,
    NoiseSpec,
    cos_angle_from_local_bearings,
    interior_angle,
    make_graph,
    pairwise_distance,
    relative_bearing,
    synthesize_measurements,
)
from .simulate import ScenarioConfig, generate_network
from .solver import (
    AngleConstraintForm,
    SolveReport,
    StackedConstraintSystem,
    angle_forms_from_positions,
    assemble,
    invariance_check,
    rmse,
    solve_distributed,
    solve_global,
)

__version__ = "0.1.0"
