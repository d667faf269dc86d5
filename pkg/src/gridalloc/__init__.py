"""Utility-maximizing demand allocation on radial distribution networks."""

from .alloc import (
    GroupingTrace,
    InfeasibleRelaxation,
    MixResult,
    allocation_utility,
    greedy_alloc,
    inelas_dem_alloc,
    mix_dem_alloc,
    solve_rmaxopf,
)
from .customers import Customer, check_allocation, total_utility
from .hardness import (
    GadgetInstance,
    SubSumInstance,
    gadget_simplified_voltage,
    gadget_voltage,
    subset_sum_dp,
    verify_reduction,
)
from .network import (
    Edge,
    ParseError,
    PathIndex,
    PerUnitBase,
    RadialNetwork,
    TopologyError,
    build_paths,
    load_network,
    network_38,
    single_edge_network,
)
from .oracle import (
    OracleResult,
    TooLarge,
    brute_force_maxopf,
    brute_force_smaxopf,
)
from .powerflow import (
    NonConvergence,
    OperatingLimits,
    PowerFlowState,
    ViolationReport,
    check_limits,
    opf_feasible,
    sweep_solve,
)
from .scenarios import (
    MetricsRow,
    ScenarioSpec,
    generate_scenario,
    run_experiment,
    summarize,
)
from .simplified import (
    LossBounds,
    SimplifiedLimits,
    eval_constraints,
    loss_bounds,
    simplified_limits,
)
from .theory import (
    InstanceGeometry,
    RatioBounds,
    check_ratio_bound,
    check_sec_half_bound,
    geometry,
    ratio_bounds,
)

__version__ = "0.1.0"
