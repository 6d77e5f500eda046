"""Two-stage game model of a by-product hydrogen supply chain.

Stage one plans cooperative transport structures among producing plants and
splits the gains with Shapley values; stage two prices cavern storage with a
leader-follower time-of-use game solved by a genetic algorithm over exact
follower schedules.
"""

__version__ = "0.1.0"

from .coalition import (
    CoalitionStructure,
    Imputation,
    StabilityReport,
    StructureValue,
    enumerate_structures,
    iterate_best_response,
    shapley_allocate,
    solve_planning,
    stability_report,
)
from .milp import ACTIVE_BACKEND, LinearProgram, SolveResult, SolverError, brute_force_oracle, solve_lp, solve_milp
from .plant import ModelBuildError, PlanDecision, Schedule, build_schedule_model, cost_breakdown, extract_schedules
from .report import (
    PlanningStudy,
    StudyBundle,
    export_tables,
    load_bundle,
    save_bundle,
    stable_structure_imputations,
)
from .scenario import Scenario, ValidationError, bundled_fixture, load_scenario, save_scenario
from .stackelberg import (
    EquilibriumReport,
    GAConfig,
    fixed_price_sweep,
    follower_best_response,
    optimize_prices,
    sensitivity_sweep,
)

__all__ = [
    "ACTIVE_BACKEND",
    "CoalitionStructure",
    "EquilibriumReport",
    "GAConfig",
    "Imputation",
    "LinearProgram",
    "ModelBuildError",
    "PlanDecision",
    "PlanningStudy",
    "Scenario",
    "Schedule",
    "SolveResult",
    "SolverError",
    "StabilityReport",
    "StructureValue",
    "StudyBundle",
    "ValidationError",
    "__version__",
    "brute_force_oracle",
    "build_schedule_model",
    "bundled_fixture",
    "cost_breakdown",
    "enumerate_structures",
    "export_tables",
    "extract_schedules",
    "fixed_price_sweep",
    "follower_best_response",
    "iterate_best_response",
    "load_bundle",
    "load_scenario",
    "optimize_prices",
    "save_bundle",
    "save_scenario",
    "sensitivity_sweep",
    "shapley_allocate",
    "solve_lp",
    "solve_milp",
    "solve_planning",
    "stability_report",
    "stable_structure_imputations",
]
