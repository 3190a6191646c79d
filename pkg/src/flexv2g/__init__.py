"""Bidirectional charging schedules and VCG payments for a capacity-limited EV station."""

from .admm import AdmmConfig, run_admm
from .errors import BudgetExceededError, InputError, SolverError, V2GError
from .exact import solve_exact, solve_joint_fixed_tau
from .mechanism import (MechanismOutcome, misreport_sweep, outside_option_utility, run_vcg, vcg_allocation,
                        vcg_payment)
from .model import (Allocation, EVStaticParams, EVType, FeasibilityReport, ScheduleSolution, StationScenario,
                    check_feasible, energy_cost, ev_cost, naive_parallel_schedule, soc_trajectory, social_cost)
from .solve import solve_schedule
from .subproblem import DualState, SubproblemContext, solve_ev_subproblem, solve_fixed_tau

__version__ = "0.1.0"
