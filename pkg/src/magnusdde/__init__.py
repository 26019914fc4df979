"""Second-order Magnus-type integrator for quasilinear delay evolution equations."""

from .delay import (
    DelayDiscretization,
    DelayWindow,
    HistorySlice,
    custom_discretization,
    discretize,
    evaluate_discretized,
    point_delay_discretization,
    quadrature_error_order,
    trapezoid_half_interval_discretization,
)
from .epidemic import (
    EpidemicParams,
    Grid2D,
    Kernel2D,
    RelaxedSIRHistory,
    assemble_Q,
    convolve_G,
    default_profiles,
    laplacian_neumann,
    make_epidemic_problem,
    sir_state,
    write_field_snapshot,
)
from .errors import (
    ConfigurationError,
    GuardViolationError,
    HarnessError,
    KrylovConvergenceError,
)
from .harness import (
    ConvergenceStudy,
    OrderTable,
    convergence_study,
    invariant_report,
    reference_trajectory,
    state_norm,
    telescoping_check,
    write_order_table,
)
from .integrator import (
    AnalyticHistory,
    GeneratorSpec,
    HistoryStore,
    InvariantGuard,
    ProblemSpec,
    RunReport,
    RunResult,
    TabulatedHistory,
    full_step,
    half_step,
    run,
    seed_history,
    validate_history_compatibility,
)
from .operators import (
    ExpmConfig,
    SparseOperator,
    StateVector,
    apply,
    expm_action,
    one_norm_columns,
)
from .scalar import (
    compatible_polynomial_history,
    constant_history,
    exponential_history,
    make_scalar_problem,
    method_of_steps,
)

__version__ = "0.1.0"
