"""Boundary-integral solvers for the 3D Brinkman system.

Dense boundary-element discretization of the single- and double-layer
potentials of the Brinkman system (Stokes plus a zeroth-order damping term
-alpha u), with solvers for the Dirichlet, Neumann and mixed
Dirichlet-Neumann problems, Newtonian volume potentials for forced problems,
and a Picard iteration for the semilinear Darcy-Forchheimer-Brinkman system
(nonlinear drag -beta |u| u).  A verification harness exposes manufactured
solutions, invariant suites, refinement studies and the configured runs
behind the bbem command-line tool.
"""

from bbem.geometry import (
    DIRICHLET,
    NEUMANN,
    PatchLabeling,
    QuadratureSet,
    SurfaceMesh,
    VolumeGrid,
    build_cube,
    build_icosphere,
    build_volume_grid,
    check_closed,
    duffy_singular_rule,
    label_patches,
    load_off,
    panel_quadrature,
    winding_number,
)
from bbem.kernels import (
    BrinkmanParams,
    a1,
    a2,
    brinkman_pressure_tensor,
    brinkman_stress_tensor,
    brinkman_velocity_gradient,
    brinkman_velocity_tensor,
    harmonic_kernel,
    pressure_vector,
    stokeslet,
    stress_difference,
    velocity_difference,
)
from bbem.potentials import (
    BoundaryField,
    DenseOperator,
    VolumeField,
    adjoint_double_layer,
    assemble_double_layer,
    assemble_single_layer,
    eval_double_layer,
    eval_double_layer_pressure,
    eval_single_layer,
    eval_single_layer_pressure,
    newtonian_boundary_data,
    newtonian_pressure,
    newtonian_velocity,
)
from bbem.errors import (
    BBEMError,
    FluxIncompatible,
    IllConditioned,
    InvalidLabeling,
    InvalidSource,
    NotConverged,
    SmallnessViolated,
    UnsupportedParameter,
)
from bbem.solvers import (
    MIXED,
    BVPSpec,
    FieldSolution,
    NeumannToDirichletMap,
    SolutionHandle,
    SolveReport,
    SolverWorkspace,
    evaluate_solution,
    greens_identity_residual,
    neumann_to_dirichlet,
    solve_dirichlet,
    solve_mixed,
    solve_neumann,
    solve_poisson,
)
from bbem.semilinear import (
    ESTIMATION_SEED,
    ContractionReport,
    PicardConfig,
    SmallnessConstants,
    estimate_constants,
    picard_solve,
    semilinear_residual,
)
from bbem.harness import (
    EXPRESSION_NAMES,
    SUITE_NAMES,
    SUITE_SEED,
    CheckResult,
    ConfigError,
    ConvergenceRow,
    ConvergenceTable,
    ManufacturedSolution,
    SuiteReport,
    convergence_study,
    interior_probes,
    manufactured_solution,
    parse_convergence_csv,
    run_config,
    verify_suite,
)

__version__ = "0.1.0"

__all__ = [
    "BBEMError",
    "BVPSpec",
    "BoundaryField",
    "BrinkmanParams",
    "CheckResult",
    "ConfigError",
    "ContractionReport",
    "ConvergenceRow",
    "ConvergenceTable",
    "DIRICHLET",
    "DenseOperator",
    "ESTIMATION_SEED",
    "EXPRESSION_NAMES",
    "FieldSolution",
    "FluxIncompatible",
    "IllConditioned",
    "InvalidLabeling",
    "InvalidSource",
    "MIXED",
    "ManufacturedSolution",
    "NEUMANN",
    "NeumannToDirichletMap",
    "NotConverged",
    "PatchLabeling",
    "PicardConfig",
    "QuadratureSet",
    "SUITE_NAMES",
    "SUITE_SEED",
    "SmallnessConstants",
    "SmallnessViolated",
    "SolutionHandle",
    "SolveReport",
    "SolverWorkspace",
    "SuiteReport",
    "SurfaceMesh",
    "UnsupportedParameter",
    "VolumeField",
    "VolumeGrid",
    "__version__",
    "a1",
    "a2",
    "adjoint_double_layer",
    "assemble_double_layer",
    "assemble_single_layer",
    "brinkman_pressure_tensor",
    "brinkman_stress_tensor",
    "brinkman_velocity_gradient",
    "brinkman_velocity_tensor",
    "build_cube",
    "build_icosphere",
    "build_volume_grid",
    "check_closed",
    "convergence_study",
    "duffy_singular_rule",
    "estimate_constants",
    "eval_double_layer",
    "eval_double_layer_pressure",
    "eval_single_layer",
    "eval_single_layer_pressure",
    "evaluate_solution",
    "greens_identity_residual",
    "harmonic_kernel",
    "interior_probes",
    "label_patches",
    "load_off",
    "manufactured_solution",
    "neumann_to_dirichlet",
    "newtonian_boundary_data",
    "newtonian_pressure",
    "newtonian_velocity",
    "panel_quadrature",
    "parse_convergence_csv",
    "picard_solve",
    "pressure_vector",
    "run_config",
    "semilinear_residual",
    "solve_dirichlet",
    "solve_mixed",
    "solve_neumann",
    "solve_poisson",
    "stokeslet",
    "stress_difference",
    "velocity_difference",
    "verify_suite",
    "winding_number",
]
