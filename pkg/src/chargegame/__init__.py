"""Composite-equilibrium solvers for EV charging games.

The library models charging games between nonatomic individual EVs and
aggregator-run coalitions, solves their composite equilibria (closed form
for the three-slot case, exponential-learning dynamics in general),
certifies solutions through variational gaps and runs coalition-size
sweeps with monotonicity audits.
"""

from .costs import (
    AffineCost,
    CostFunction,
    CustomCost,
    ExponentialCost,
    LinearCost,
    QuadraticCost,
    affine_transform,
    cost_from_config,
    cost_to_config,
    with_domain_bound,
)
from .dynamics import (
    LearnerState,
    TraceRow,
    coalition_gradient,
    default_step_schedule,
    initial_state,
    learning_step,
    player_gradients,
    solve_dynamics,
)
from .errors import (
    BracketingError,
    ChargeGameError,
    DomainError,
    NumericsError,
    SpecError,
    UndefinedAverageError,
    UnsupportedInstanceError,
)
from .model import (
    CostSummary,
    Flow,
    GameSpec,
    LoadDecomposition,
    Profile,
    charging_load,
    coalition_average_cost,
    decompose_loads,
    evaluate_costs,
    individuals_average_cost,
    reduced_costs,
    reduction_offset,
    social_cost,
    strategy_cost,
    strategy_costs,
    supports_reduced_costs,
    validate_profile,
)
from .sweep import (
    AuditVerdict,
    SweepPoint,
    SweepResult,
    audit_concave,
    audit_concave_branches,
    audit_monotone,
    default_grid,
    peak_start_slot,
    run_sweep,
    sweep_rows,
)
from .threeslot import (
    CEPoint,
    Regime,
    ReducedCosts,
    ThreeSlotInstance,
    activation_threshold,
    ce_costs,
    classify,
    equilibrium_profile,
    instance_from_spec,
    marginal_imbalance,
    mixing_band,
    solve_ce,
    with_coalition_size,
)
from .verify import (
    EquilibriumReport,
    OptimalityCheck,
    OrderingCheck,
    SolverStatus,
    WardropCheck,
    check_coalition_optimality,
    check_cost_ordering,
    check_wardrop,
    make_report,
    vi_gap,
)

__version__ = "0.1.0"

__all__ = [
    "AffineCost",
    "AuditVerdict",
    "BracketingError",
    "CEPoint",
    "ChargeGameError",
    "CostFunction",
    "CostSummary",
    "CustomCost",
    "DomainError",
    "EquilibriumReport",
    "ExponentialCost",
    "Flow",
    "GameSpec",
    "LearnerState",
    "LinearCost",
    "LoadDecomposition",
    "NumericsError",
    "OptimalityCheck",
    "OrderingCheck",
    "Profile",
    "QuadraticCost",
    "ReducedCosts",
    "Regime",
    "SolverStatus",
    "SpecError",
    "SweepPoint",
    "SweepResult",
    "ThreeSlotInstance",
    "TraceRow",
    "UndefinedAverageError",
    "UnsupportedInstanceError",
    "WardropCheck",
    "activation_threshold",
    "affine_transform",
    "audit_concave",
    "audit_concave_branches",
    "audit_monotone",
    "ce_costs",
    "charging_load",
    "check_coalition_optimality",
    "check_cost_ordering",
    "check_wardrop",
    "classify",
    "coalition_average_cost",
    "coalition_gradient",
    "cost_from_config",
    "cost_to_config",
    "decompose_loads",
    "default_grid",
    "default_step_schedule",
    "equilibrium_profile",
    "evaluate_costs",
    "individuals_average_cost",
    "initial_state",
    "instance_from_spec",
    "learning_step",
    "make_report",
    "marginal_imbalance",
    "mixing_band",
    "peak_start_slot",
    "player_gradients",
    "reduced_costs",
    "reduction_offset",
    "run_sweep",
    "social_cost",
    "solve_ce",
    "solve_dynamics",
    "strategy_cost",
    "strategy_costs",
    "supports_reduced_costs",
    "sweep_rows",
    "validate_profile",
    "vi_gap",
    "with_coalition_size",
    "with_domain_bound",
]
