"""Time-minimum purity control for two-level dissipative systems on the Bloch ball."""

from .bangbang_synthesis import (
    BangBangSchedule,
    LieElement,
    SynthesisResult,
    ad_matrix,
    bang_control,
    bracket,
    lie_exp_apply,
    next_switch_time,
    pmp_hamiltonian,
    switching_determinant,
    synthesize,
)
from .bloch_model import (
    ChimneyGeometry,
    DissipationModel,
    LindbladSpec,
    ReductionError,
    apogee,
    bloch_rhs,
    build_dissipation,
    chimney_radius,
    drift_reaches_apogee,
    endpoints,
    integrate_bloch,
    model_from_planar,
    purity,
    purity_derivative,
    reduce_to_planar,
)
from .planar_system import (
    ChimneyViolation,
    ControlProfile,
    CubicAnalysis,
    IntegrationError,
    PlanarSystem,
    RadiusTurnaround,
    Trajectory,
    constant_control_fixed_point,
    cubic_coefficients,
    drift_fixed_point,
    integrate,
    piecewise_constant,
    purity_rate,
    recover_control,
    rhs_planar,
    root_in_unit_interval,
)
from .ritz_solver import (
    RitzProblem,
    RitzResult,
    RitzSolution,
    SolverFailure,
    control_energy,
    nu,
    residuals,
    ritz_problem,
    solve,
    travel_time,
)

__version__ = "0.1.0"
