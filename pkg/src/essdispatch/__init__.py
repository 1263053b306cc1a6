"""Rolling-horizon dispatch and economic assessment of customer-sited
multi-use battery storage."""

from .aging import SegmentSet, aging_cost_eval, epigraph_rows
from .domain import (DispatchDecision, EssSpec, MarketSpec, SlotExogenous,
                     SocState, soc_update, validate_inputs)
from .problem import (ProblemInstance, SolveResult, build_problem,
                      objective_decomposition, recover_service_split)
from .rolling import (ForecastModel, LedgerEntry, SimulationReport,
                      no_ess_baseline, run_simulation)
from .solver import SolverConfig, brute_force_oracle, solve

__all__ = [
    "SegmentSet", "aging_cost_eval", "epigraph_rows",
    "DispatchDecision", "EssSpec", "MarketSpec", "SlotExogenous", "SocState",
    "soc_update", "validate_inputs",
    "ProblemInstance", "SolveResult", "build_problem",
    "objective_decomposition", "recover_service_split",
    "ForecastModel", "LedgerEntry", "SimulationReport", "no_ess_baseline",
    "run_simulation",
    "SolverConfig", "brute_force_oracle", "solve",
]

__version__ = "0.1.0"
