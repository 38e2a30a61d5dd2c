"""Adaptive FEM for (nearly) incompressible plane elasticity with
equilibrated-stress error control.

The pipeline: Taylor-Hood displacement/pressure solve, direct stress
post-processing, locally equilibrated H(div) stress correction with weak
symmetry, guaranteed energy-norm error bound, and bulk-marking adaptive
refinement.
"""

from .adaptivity import (
    AdaptiveConfig,
    RunHistory,
    StepRecord,
    adaptive_loop,
    attach_reference_errors,
    doerfler_mark,
)
from .elasticity import (
    FieldPair,
    LinearSystem,
    LoadData,
    Material,
    assemble_system,
    direct_stress,
    solve,
)
from .equilibration import (
    EquilibrationReport,
    Equilibrator,
    PatchProblem,
    equilibrate,
    verify_equilibration,
)
from .errors import (
    ConfigError,
    EmptyDirichlet,
    IncompatiblePatch,
    InvalidConstants,
    InvertedElement,
    IoError,
    IsolatedNeumannVertex,
    NonConforming,
    ProblemError,
    SingularSystem,
    StressEqError,
    UnsupportedDegree,
)
from .estimator import (
    BoundConstants,
    EstimatorReport,
    antisymmetric_norm_sq,
    apply_A,
    compose_ancestry,
    conservative_constants,
    data_oscillation,
    deviatoric,
    energy_error,
    estimate,
    eta_components,
    guaranteed_bound,
    neighborhood_ratio,
    proxy_energy_error,
    residual_estimator,
)
from .harness import RunConfig, emit_config, emit_history, main, parse_config
from .mesh import (
    DIRICHLET,
    INTERIOR,
    NEUMANN,
    Mesh,
    VertexPatch,
    build_mesh,
    modified_patches,
    read_mesh,
    refine,
    standard_patches,
    uniform_refine,
    write_mesh,
)
from .problems import (
    ExactSolution,
    Problem,
    cook,
    cook_mesh,
    lshape_mesh,
    make_problem,
    manufactured_smooth,
    square_lshape,
    unit_square_mesh,
)
from .spaces import (
    BrokenField,
    Discretization,
    rt_dim,
    segment_rule,
    skew_tensor,
    triangle_rule,
)

__all__ = [
    "AdaptiveConfig",
    "BoundConstants",
    "BrokenField",
    "ConfigError",
    "DIRICHLET",
    "Discretization",
    "EmptyDirichlet",
    "EquilibrationReport",
    "Equilibrator",
    "EstimatorReport",
    "ExactSolution",
    "FieldPair",
    "INTERIOR",
    "IncompatiblePatch",
    "InvalidConstants",
    "InvertedElement",
    "IoError",
    "IsolatedNeumannVertex",
    "LinearSystem",
    "LoadData",
    "Material",
    "Mesh",
    "NEUMANN",
    "NonConforming",
    "PatchProblem",
    "Problem",
    "ProblemError",
    "RunConfig",
    "RunHistory",
    "SingularSystem",
    "StepRecord",
    "StressEqError",
    "UnsupportedDegree",
    "VertexPatch",
    "adaptive_loop",
    "antisymmetric_norm_sq",
    "apply_A",
    "assemble_system",
    "attach_reference_errors",
    "build_mesh",
    "compose_ancestry",
    "conservative_constants",
    "cook",
    "cook_mesh",
    "data_oscillation",
    "deviatoric",
    "direct_stress",
    "doerfler_mark",
    "emit_config",
    "emit_history",
    "energy_error",
    "equilibrate",
    "estimate",
    "eta_components",
    "guaranteed_bound",
    "lshape_mesh",
    "main",
    "make_problem",
    "manufactured_smooth",
    "modified_patches",
    "neighborhood_ratio",
    "parse_config",
    "proxy_energy_error",
    "read_mesh",
    "refine",
    "residual_estimator",
    "rt_dim",
    "segment_rule",
    "skew_tensor",
    "solve",
    "square_lshape",
    "standard_patches",
    "triangle_rule",
    "uniform_refine",
    "unit_square_mesh",
    "verify_equilibration",
    "write_mesh",
]
