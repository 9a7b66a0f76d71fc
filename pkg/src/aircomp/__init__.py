"""Joint receive-gain, transmit-gain and data-size optimization for
over-the-air federated gradient aggregation."""

from .model import (
    Allocation,
    DegenerateWeightsError,
    DeviceParams,
    ProblemInstance,
    beta_from_S,
    check_weights,
    eliminate_b,
    floor_with_repair,
    make_instance,
    mse,
    mse_beta,
    S_from_beta,
    validate_instance,
)
from .lower_solver import (
    BRANCH_A_GE_ATH,
    BRANCH_BISECTION,
    BRANCH_SUM_BMAX_GT_1,
    KktResiduals,
    LowerSolution,
    Partition,
    a_threshold,
    kkt_certify,
    lambda_min,
    partition,
    solve_lambda,
    solve_lower,
)
from .upper_solver import (
    GlobalSolution,
    Interval,
    IntervalLayout,
    NumericalAnomalyError,
    F_values,
    interval_layout,
    minimize_interval,
    solve_global,
    subintervals,
)
from .verification import (
    OracleReport,
    batch_lower_values,
    grid_oracle,
    lower_oracle,
    lower_value_grid,
    probe_monotone_convex,
    project_capped_simplex,
)
from .experiments import (
    AXES,
    POLICIES,
    SweepSpec,
    build_instance,
    generate_instance,
    philox_stream,
    rows_to_csv,
    run_policy,
    run_sweep,
    sample_channels,
)
from .fl_sim import (
    SyntheticTask,
    TrainingRun,
    empirical_c,
    ideal_aggregate,
    local_gradient,
    make_task,
    ota_aggregate,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation", "DegenerateWeightsError", "DeviceParams", "ProblemInstance",
    "beta_from_S", "check_weights", "eliminate_b", "floor_with_repair",
    "make_instance", "mse", "mse_beta", "S_from_beta", "validate_instance",
    "BRANCH_A_GE_ATH", "BRANCH_BISECTION", "BRANCH_SUM_BMAX_GT_1",
    "KktResiduals", "LowerSolution", "Partition", "a_threshold",
    "kkt_certify", "lambda_min", "partition", "solve_lambda", "solve_lower",
    "GlobalSolution", "Interval", "IntervalLayout", "NumericalAnomalyError",
    "F_values", "interval_layout", "minimize_interval", "solve_global",
    "subintervals",
    "OracleReport", "batch_lower_values", "grid_oracle", "lower_oracle",
    "lower_value_grid", "probe_monotone_convex", "project_capped_simplex",
    "AXES", "POLICIES", "SweepSpec", "build_instance", "generate_instance",
    "philox_stream", "rows_to_csv", "run_policy", "run_sweep",
    "sample_channels",
    "SyntheticTask", "TrainingRun", "empirical_c", "ideal_aggregate",
    "local_gradient", "make_task", "ota_aggregate", "train",
    "__version__",
]
