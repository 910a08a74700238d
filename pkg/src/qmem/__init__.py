"""Deterministic control synthesis for finite-level open quantum memory systems.

The mean-square deviation of a quasilinear quantum system from its initial
state is reduced to an affine function of a classical matrix-valued ODE
state. On top of that auxiliary system the package provides pointwise
gradient-type control, a first-order expansion of the Bellman function, and
an independent GKSL-generator oracle for the quantum-derived coefficients.
"""

__version__ = "0.1.0"

from .algebra import (
    block_row_apply,
    diam_product,
    dot_product,
    expm,
    expm_and_integral,
    first_slice,
    rk4_solve,
    section,
    star_product,
)
from .aux_system import (
    ControlSignal,
    FeedbackControl,
    OpenLoopControl,
    SampledControl,
    Trajectory,
    ZeroControl,
    delta_ddot,
    delta_dot,
    delta_of_z,
    delta_via_moments,
    eval_fg,
    simulate,
)
from .coefficients import (
    Coefficients,
    SystemSpec,
    assemble_A,
    build_coefficients,
    build_control_sections,
    build_drift,
    build_ito,
    build_targets,
    diffusion_matrix,
)
from .config import ScenarioConfig, build_spec, load_config, parse_config, serialize_config
from .errors import (
    CapacityError,
    ClosureViolationError,
    ConfigError,
    ExpansionStateError,
    IntegratorStepError,
    InvalidArgumentError,
    ModelInconsistencyError,
    NoDescentDirectionError,
    NumericOverflowError,
    QmemError,
    StateValidationError,
)
from .hjb import (
    ValueExpansion,
    control_eval,
    hjb_control,
    hjb_residual,
    make_expansion,
    pontryagin_diagnostic,
    psi0_eval,
    psi1_by_characteristics,
    psi1_eval,
    simulate_hjb,
    solve_psi1,
    value_eval,
)
from .oracle import (
    diffusion_check,
    drift_check,
    drift_report,
    gksl_apply,
    gksl_predual,
    propagate_density,
    regression_two_point,
)
from .pointwise import (
    PenaltyWeights,
    pointwise_control,
    pointwise_law,
    pointwise_objective,
    simulate_pointwise,
    small_pi_threshold,
)
from .structure import (
    MatrixBasis,
    StructureConstants,
    check_admissible,
    derive_structure,
    mean_from_state,
    pauli_basis,
    state_from_mean,
)
