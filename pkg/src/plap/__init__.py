"""plap: simulator and verification harness for the one-phase combustion
free-boundary problem of the evolution p-Laplacian."""

__version__ = "0.1.0"

from .core import (
    Diagnostics,
    GeometryBounds,
    PParams,
    PlanarState,
    RadialState,
    Snapshot,
    Trajectory,
    build_initial_planar,
    build_initial_radial,
    compute_diagnostics,
    sample_gradient,
)
from .hodograph import (
    HodographStrip,
    StripCoefficients,
    invert_profile,
    planar_strip_coefficients,
    radial_strip_rhs,
    structural_form_bound,
)
from .operators import (
    CoefficientMatrix,
    TestFunction,
    coefficient_matrix,
    p_laplacian_div_fd,
    p_laplacian_nondiv,
    weak_residual,
)
from .planar import PlanarRunConfig, marker_normal_velocity, solve_planar, step_planar
from .radial import RadialRunConfig, cfl_dt, extinction_time, solve_radial, step_radial
from .verify import (
    ScalingSpec,
    SubsolutionCertificate,
    certify_subsolution,
    comparison_pair,
    eps_monotonicity,
    extinction_bound,
    invariant_report,
    scaling_test,
)

__all__ = [
    "__version__",
    "PParams", "RadialState", "PlanarState", "GeometryBounds", "Diagnostics",
    "Snapshot", "Trajectory",
    "build_initial_radial", "build_initial_planar", "sample_gradient",
    "compute_diagnostics",
    "CoefficientMatrix", "TestFunction", "coefficient_matrix",
    "p_laplacian_nondiv", "p_laplacian_div_fd", "weak_residual",
    "HodographStrip", "StripCoefficients", "invert_profile",
    "radial_strip_rhs", "planar_strip_coefficients", "structural_form_bound",
    "RadialRunConfig", "cfl_dt", "step_radial", "solve_radial", "extinction_time",
    "PlanarRunConfig", "marker_normal_velocity", "step_planar", "solve_planar",
    "ScalingSpec", "SubsolutionCertificate", "certify_subsolution",
    "comparison_pair", "scaling_test", "eps_monotonicity", "extinction_bound",
    "invariant_report",
]
