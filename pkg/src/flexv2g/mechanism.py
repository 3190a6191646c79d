"""VCG allocation and payments for the charging station.

Each EV reports a type; the station schedules the reported economy
efficiently and charges every EV the energy it draws plus the externality
its presence imposes on the other EVs (their driver costs and energy bills
against the schedule the station would have run without it). Utilities are
quasi-linear: minus the driver's true cost minus the payment.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .admm import AdmmConfig
from .errors import InputError
from .model import Allocation, EVType, ScheduleSolution, StationScenario, energy_cost, ev_cost
from .solve import solve_schedule

IR_TOLERANCE = 1e-6
TAU_OFFSETS = (-4, -2, 0, 2, 4)
ALPHA_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)


class ApproximateIncentivesWarning(UserWarning):
    """VCG payments computed from a heuristic schedule lose their exact incentive guarantees."""


@dataclass
class MechanismOutcome:
    allocations: list
    payments: np.ndarray
    utilities: np.ndarray
    outside_options: np.ndarray
    ir_satisfied: np.ndarray
    station_budget: float
    social_cost: float = 0.0
    solver: str = "exact"


@dataclass
class MisreportPoint:
    report: EVType
    utility: float
    payment: float
    allocation: Allocation


@dataclass
class MisreportSurface:
    ev: int
    with_payments: bool
    points: list = field(default_factory=list)

    def best(self) -> MisreportPoint:
        return max(self.points, key=lambda p: p.utility)

    def utility_of(self, report: EVType) -> float:
        for p in self.points:
            if p.report == report:
                return p.utility
        raise KeyError(report)


def _check_reports(scenario, reports):
    if reports is None:
        return scenario.types
    reports = list(reports)
    if len(reports) != scenario.n_ev:
        raise InputError(f"expected {scenario.n_ev} reports, got {len(reports)}")
    return reports


def _warn_if_heuristic(solver):
    if solver == "admm":
        warnings.warn("VCG payments from the ADMM heuristic: incentive compatibility and individual "
                      "rationality hold only approximately", ApproximateIncentivesWarning, stacklevel=3)


def vcg_allocation(scenario: StationScenario, reports: Sequence[EVType] | None = None, solver: str = "exact",
                   admm_config: AdmmConfig | None = None) -> list[Allocation]:
    """Efficient allocations for the reported types."""
    return _solve_reported(scenario, reports, solver, admm_config).allocations


def _solve_reported(scenario, reports, solver, admm_config) -> ScheduleSolution:
    reported = scenario.with_types(_check_reports(scenario, reports))
    return solve_schedule(reported, solver, admm_config)


def _externality(reported: StationScenario, n: int, allocations, solver, admm_config) -> float:
    """Peers' reported cost and energy bill with EV ``n`` present, minus without it."""
    rest = reported.without(n)
    if rest is None:
        return 0.0
    without = solve_schedule(rest, solver, admm_config).allocations
    dt = reported.interval_hours
    with_n = [a for j, a in enumerate(allocations) if j != n]
    total = 0.0
    for (params, ev_type), a, b in zip(rest.fleet, with_n, without):
        total += ev_cost(params, ev_type, a, dt) - ev_cost(params, ev_type, b, dt)
        total += energy_cost(reported.prices, a.power_profile, dt) - energy_cost(reported.prices, b.power_profile, dt)
    return total


def vcg_payment(scenario: StationScenario, reports: Sequence[EVType] | None, n: int, solver: str = "exact",
                admm_config: AdmmConfig | None = None, allocations: Sequence[Allocation] | None = None) -> float:
    """Payment of EV ``n`` (positive: the EV pays the station).

    ``allocations`` may pass a schedule already computed for these reports to
    skip the full re-solve.
    """
    if not 0 <= n < scenario.n_ev:
        raise InputError(f"ev index {n} out of range for {scenario.n_ev} EVs")
    _warn_if_heuristic(solver)
    reports = _check_reports(scenario, reports)
    reported = scenario.with_types(reports)
    if allocations is None:
        allocations = solve_schedule(reported, solver, admm_config).allocations
    own = energy_cost(scenario.prices, allocations[n].power_profile, scenario.interval_hours)
    return own + _externality(reported, n, allocations, solver, admm_config)


def outside_option_utility(ev) -> float:
    """Utility of staying away: the whole SoC gap is left unmet and nothing is paid."""
    params, ev_type = ev
    gap = ev_type.desired_soc - params.initial_soc
    return -ev_type.soc_inflexibility * gap * gap


def run_vcg(scenario: StationScenario, reports: Sequence[EVType] | None = None, solver: str = "exact",
            admm_config: AdmmConfig | None = None) -> MechanismOutcome:
    """Full mechanism: one efficient solve plus one leave-one-out solve per EV.

    Utilities and outside options are evaluated at the true types held by
    ``scenario``; ``reports`` defaults to truthful reporting.
    """
    _warn_if_heuristic(solver)
    reports = _check_reports(scenario, reports)
    reported = scenario.with_types(reports)
    solution = solve_schedule(reported, solver, admm_config)
    allocs = solution.allocations
    dt = scenario.interval_hours
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ApproximateIncentivesWarning)
        payments = np.array([vcg_payment(scenario, reports, n, solver, admm_config, allocs)
                             for n in range(scenario.n_ev)])
    costs = np.array([ev_cost(p, t, a, dt) for (p, t), a in zip(scenario.fleet, allocs)])
    utilities = -costs - payments
    outside = np.array([outside_option_utility(ev) for ev in scenario.fleet])
    energy = sum(energy_cost(scenario.prices, a.power_profile, dt) for a in allocs)
    return MechanismOutcome(
        allocations=allocs,
        payments=payments,
        utilities=utilities,
        outside_options=outside,
        ir_satisfied=utilities >= outside - IR_TOLERANCE,
        station_budget=float(payments.sum() - energy),
        social_cost=float(costs.sum() + energy),
        solver=solver,
    )


def default_report_grid(ev_type: EVType, horizon: int) -> list[EVType]:
    """5x5 grid of (desired time, temporal inflexibility) misreports around the truth.

    Times are clipped to the horizon and duplicates dropped.
    """
    taus = sorted({min(horizon, max(0, ev_type.desired_disconnect + k)) for k in TAU_OFFSETS})
    alphas = sorted({ev_type.temporal_inflexibility * f for f in ALPHA_FACTORS})
    return [EVType(tau, ev_type.desired_soc, alpha, ev_type.soc_inflexibility)
            for tau, alpha in itertools.product(taus, alphas)]


def misreport_sweep(scenario: StationScenario, n: int, report_grid: Iterable[EVType] | None = None,
                    with_payments: bool = True, solver: str = "exact", energy_at_cost: bool = False,
                    admm_config: AdmmConfig | None = None) -> MisreportSurface:
    """True-type utility of EV ``n`` for each of its reports, the others reporting truthfully.

    Without payments the utility is minus the driver cost, and
    ``energy_at_cost=True`` additionally bills the EV its energy at market
    price.
    """
    if not 0 <= n < scenario.n_ev:
        raise InputError(f"ev index {n} out of range for {scenario.n_ev} EVs")
    grid = list(default_report_grid(scenario.types[n], scenario.horizon) if report_grid is None else report_grid)
    if not grid:
        raise InputError("report grid must be nonempty")
    if with_payments:
        _warn_if_heuristic(solver)
    params, truth = scenario.fleet[n]
    dt = scenario.interval_hours
    surface = MisreportSurface(n, with_payments)
    leave_one_out = None
    for report in grid:
        reports = list(scenario.types)
        reports[n] = report
        reported = scenario.with_types(reports)
        allocs = solve_schedule(reported, solver, admm_config).allocations
        own_energy = energy_cost(scenario.prices, allocs[n].power_profile, dt)
        if with_payments:
            if leave_one_out is None:
                # the peers' schedule without EV n does not depend on its report
                leave_one_out = _leave_one_out_value(reported, n, solver, admm_config)
            payment = own_energy + _peer_value(reported, n, allocs) - leave_one_out
        elif energy_at_cost:
            payment = own_energy
        else:
            payment = 0.0
        utility = -ev_cost(params, truth, allocs[n], dt) - payment
        surface.points.append(MisreportPoint(report, float(utility), float(payment), allocs[n]))
    return surface


def _peer_value(reported, n, allocations):
    dt = reported.interval_hours
    return sum(ev_cost(p, t, a, dt) + energy_cost(reported.prices, a.power_profile, dt)
               for j, ((p, t), a) in enumerate(zip(reported.fleet, allocations)) if j != n)


def _leave_one_out_value(reported, n, solver, admm_config):
    rest = reported.without(n)
    if rest is None:
        return 0.0
    allocs = solve_schedule(rest, solver, admm_config).allocations
    return _peer_value(rest, -1, allocs)

