"""Nonlocal diffusion with signal-adaptive range kernels.

A reaction term and an integral smoothing term drive a nonnegative state
on a cell-centered grid; the smoothing weight depends on both the offset
between two nodes and the difference of the state values there.  The
package provides the spatial and range kernel families, the integral
operator with its energies, a damped semi-implicit stepper whose growth
estimates can be checked after the fact, and the convergence studies.
"""

from .analysis import (
    CauchyStudyResult,
    Check,
    RunReport,
    contraction_study,
    mollifier_cauchy_study,
    time_refinement_study,
    verify_invariants,
)
from .errors import (
    AssumptionViolationError,
    ConfigParseError,
    ConfigurationError,
    GridMismatchError,
    KernelValidationError,
    NldiffError,
    NumericalBlowupError,
    PgmFormatError,
    UndefinedRatioError,
)
from .grid import Field, Grid, build_grid, integrate, load_field, lp_norm, save_field
from .kernels import (
    MollifierSpec,
    RangeKernel,
    Reaction,
    SpatialKernelTable,
    ValidationReport,
    affine_reaction,
    bilateral_kernel,
    bump_mass,
    bump_profile,
    custom_kernel,
    custom_table_reaction,
    eval_range_kernel,
    eval_reaction,
    linear_decay_reaction,
    linear_kernel,
    logistic_reaction,
    make_spatial_kernel,
    mollifier_density,
    mollifier_moment,
    mollify_range_kernel,
    p_laplacian_kernel,
    sample_growth_constant,
    sample_holder_constant,
    sample_lipschitz_constant,
    spatial_exponent_kernel,
    validate_assumptions,
    variable_exponent_kernel,
    zero_reaction,
)
from .operator import (
    EnergyValue,
    OperatorEval,
    apply_nonlocal,
    dissipation_pairing,
    energy_bilateral,
    energy_p,
    flow_energy,
)
from .pgm import ImageField, field_to_image, image_grid, image_to_field, load_pgm, save_pgm
from .stepper import (
    Problem,
    SolverConfig,
    StabilitySummary,
    Trajectory,
    export_trajectory,
    select_mu,
    solve,
    solve_problem,
    stability_constant_estimate,
    step_explicit_euler,
    step_semi_implicit,
)
from .config import (
    RunConfig,
    build_initial_state,
    build_problem,
    parse_config,
    parse_config_text,
    serialize_config,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolationError",
    "CauchyStudyResult",
    "Check",
    "ConfigParseError",
    "ConfigurationError",
    "EnergyValue",
    "Field",
    "Grid",
    "GridMismatchError",
    "ImageField",
    "KernelValidationError",
    "MollifierSpec",
    "NldiffError",
    "NumericalBlowupError",
    "OperatorEval",
    "PgmFormatError",
    "Problem",
    "RangeKernel",
    "Reaction",
    "RunConfig",
    "RunReport",
    "SolverConfig",
    "SpatialKernelTable",
    "StabilitySummary",
    "Trajectory",
    "UndefinedRatioError",
    "ValidationReport",
    "affine_reaction",
    "apply_nonlocal",
    "bilateral_kernel",
    "build_grid",
    "build_initial_state",
    "build_problem",
    "bump_mass",
    "bump_profile",
    "contraction_study",
    "custom_kernel",
    "custom_table_reaction",
    "dissipation_pairing",
    "energy_bilateral",
    "energy_p",
    "eval_range_kernel",
    "eval_reaction",
    "export_trajectory",
    "field_to_image",
    "flow_energy",
    "image_grid",
    "image_to_field",
    "integrate",
    "linear_decay_reaction",
    "linear_kernel",
    "load_field",
    "load_pgm",
    "logistic_reaction",
    "lp_norm",
    "make_spatial_kernel",
    "mollifier_cauchy_study",
    "mollifier_density",
    "mollifier_moment",
    "mollify_range_kernel",
    "p_laplacian_kernel",
    "parse_config",
    "parse_config_text",
    "sample_growth_constant",
    "sample_holder_constant",
    "sample_lipschitz_constant",
    "save_field",
    "save_pgm",
    "select_mu",
    "serialize_config",
    "solve",
    "solve_problem",
    "spatial_exponent_kernel",
    "stability_constant_estimate",
    "step_explicit_euler",
    "step_semi_implicit",
    "time_refinement_study",
    "validate_assumptions",
    "variable_exponent_kernel",
    "verify_invariants",
    "zero_reaction",
]
