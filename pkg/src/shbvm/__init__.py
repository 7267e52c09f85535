"""Spectral HBVM time integration: Gauss-Legendre collocation with Legendre
projection, a blended stage iteration, and decay-driven order selection."""

from .legendre import LegendreBasis, QuadratureRule, gauss_rule
from .tableau import (
    HbvmCoefficients,
    build_coefficients,
    coupling_coefficients,
    integration_matrix,
    min_eigenvalue_modulus,
    tableau_as_json,
)
from .solvers import (
    DomainGuardError,
    IterationConfig,
    StageDivergenceError,
    StageEvaluationError,
    StageSolver,
    StageSolverError,
    solve_blended,
    solve_fixed_point,
    solve_simplified_newton,
    stage_residual,
)
from .integrator import (
    DenseOutput,
    IntegrationError,
    OdeProblem,
    StepResult,
    dense_eval,
    dense_output,
    hbvm_step,
    integrate,
)
from .spectral import (
    DecayEstimate,
    DecayFitError,
    OrderSelection,
    OrderSelectionError,
    SpectralConfig,
    calibrate_order,
    estimate_decay,
    k_for_s,
    select_order,
)
from .problems import (
    PROBLEMS,
    get_problem,
    kepler_problem,
    lotka_volterra_problem,
    stiff_linear_problem,
)
from .report import (
    InvariantDriftObserver,
    ReferenceErrorObserver,
    RunReport,
    TrajectoryRecorder,
)

__version__ = "0.1.0"
