"""Cost-minimizing approximate evaluation of selection queries with
expensive boolean predicates, under precision/recall/probability
constraints."""

from .bigreedy import check_feasibility, solve_bigreedy, tightness_gap
from .bounds import (
    MODE_INDEPENDENT,
    MODE_UNKNOWN,
    Thresholds,
    chebyshev_factor,
    deviation_bound_precision,
    deviation_bound_recall,
    hoeffding_thresholds,
    precision_margin,
    recall_margin,
)
from .convex import SolverSettings, solve_convex
from .core import (
    Constraints,
    CostModel,
    GroupStats,
    InfeasibleError,
    RealizedCounts,
    Strategy,
    expected_cost,
    precision,
    recall,
)
from .dataset import (
    Dataset,
    SyntheticSpec,
    correlated_groups_spec,
    generate_synthetic,
    load_csv,
)
from .estimation import (
    SampleStore,
    SampleTally,
    SamplingScheme,
    adaptive_num_search,
    beta_posterior,
    sample_budget,
    select_correlated_column,
    train_virtual_column,
)
from .exact import (
    GridSolution,
    PerfectInfoGroup,
    feasible_grid_minimum,
    grid_oracle,
    solve_perfect_information,
)
from .harness import (
    ExecutionReport,
    PipelineConfig,
    TrialResult,
    execute_strategy,
    naive_baseline,
    run_trials,
    sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
