"""Design-optimal e-value betting strategies for single-arm binary trials."""

from .betting import (
    Action,
    AlreadyRejectedError,
    Bet,
    BlockSchedule,
    DesignSpec,
    DiagnosticBounds,
    EProcessPath,
    EState,
    FormulationEquivalents,
    NoSolutionError,
    Stop,
    ZoneLabel,
    capital_update,
    classify_zone,
    diagnostic_bounds,
    final_bet_power_boundary,
    formulation_equivalents,
    grow_evalue,
    growth_rate,
    kelly_bet,
    replay_path,
    solve_final_bet,
)
from .grids import (
    BetGrid,
    EGrid,
    TransitionDist,
    TransitionKernel,
    build_bet_grid,
    build_e_grid,
    get_kernel,
    project_update,
    transition_kernel,
)
from .oc import (
    BinomialBaseline,
    GridMismatchError,
    OCProfile,
    StateDistribution,
    binomial_baseline,
    brute_force_oracle,
    conditional_power,
    forward_oc,
    simulate_path,
)
from .solver import (
    Constrained,
    ESSMin,
    FixedBet,
    InfeasibleConstraintError,
    LagrangeIteration,
    LagrangeTrace,
    NonConvergenceError,
    PMax,
    PolicyTable,
    STOP_CODE,
    ValueTable,
    backward_induct,
    constant_bet_policy,
    grow_policy,
    policy_value,
    resolve_from,
    solve_blocked,
    solve_constrained,
    solve_essmin,
    solve_pmax,
)

__version__ = "0.1.0"
