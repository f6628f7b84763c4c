from .cost import (
    CostSample,
    CostScenario,
    SearchCost,
    UnreachableRecallError,
    amortized_cost,
    budget_sweep,
    cost_sample,
    default_ri_grid,
    deterioration_curve,
    interpolate_sc,
    mean_sc,
    measure_search_cost,
    optimal_rebuild_interval,
)
from .baseline import (
    Lifecycle,
    RebuildPolicy,
    Snapshot,
    default_probes,
    insert_stream,
    run_lifecycle,
)
from .scenarios import (
    DEFAULT_SCENARIOS,
    BenchRecord,
    BenchResult,
    Method,
    ScenarioRunner,
    dynamized_amortized_cost,
    method_label,
    parse_method,
    run_scenario_matrix,
)
