"""Gauss-Seidel ADMM heuristic for the flexible scheduling problem.

The bus limit is the only constraint coupling the EVs. It is relaxed into a
quadratic penalty with multipliers; each sweep solves the EV subproblems in
turn (every EV sees its peers' freshest profiles) and then takes one
projected dual ascent step. Because the disconnection times are integer the
iteration is only a heuristic, so the cheapest iterate seen is returned.
Iterates are made bus-feasible by :func:`repair_bus`; with polishing on,
each newly visited vector of disconnection times is also re-solved as the
convex joint problem it induces, and the better of the two is kept.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError, SolverError
from .model import (DEFAULT_TOLERANCE, Allocation, ScheduleSolution, StationScenario, check_feasible,
                    social_cost)
from .exact import solve_joint_fixed_tau
from .subproblem import DEFAULT_QP_TOL, DualState, SubproblemContext, solve_ev_subproblem, tie_eps

log = logging.getLogger(__name__)


@dataclass
class AdmmConfig:
    penalty: float = 1.0
    max_sweeps: int = 200
    primal_tolerance: float = 1e-3
    stall_window: int = 5
    tau_window: int | None = None
    randomize_order: bool = False
    seed: int = 0
    qp_tol: float = DEFAULT_QP_TOL
    polish: bool = True
    local_search: bool = True

    def __post_init__(self):
        if self.penalty <= 0:
            raise InputError("penalty must be > 0")
        if self.max_sweeps < 1:
            raise InputError("max_sweeps must be >= 1")
        if self.primal_tolerance <= 0:
            raise InputError("primal_tolerance must be > 0")
        if self.stall_window < 1:
            raise InputError("stall_window must be >= 1")
        if self.tau_window is not None and self.tau_window < 0:
            raise InputError("tau_window must be >= 0")


class SweepRecord(NamedTuple):
    sweep: int
    cost: float  # social cost of this sweep's iterate after repair
    residual: float  # bus violation of the raw iterate (kW)
    best_cost: float
    best_residual: float


def bus_residual(loads, bus_capacity: float) -> float:
    return float(max(0.0, np.max(np.abs(loads)) - bus_capacity)) if np.size(loads) else 0.0


def dual_update(duals: DualState, total, bus_capacity: float) -> DualState:
    """Projected ascent step on the bus multipliers."""
    total = np.asarray(total, dtype=float)
    if total.shape != duals.multipliers.shape:
        raise InputError("total load and multipliers must have the same length")
    lam = np.maximum(duals.multipliers + duals.penalty * (np.abs(total) - bus_capacity), 0.0)
    return DualState(lam, duals.penalty)


def _clamp_soc(params, u, dt):
    """Shrink entries of ``u`` toward zero until the SoC stays in [0, capacity]."""
    gain = params.efficiency * dt
    if gain == 0:
        return u
    soc = params.initial_soc
    for t in range(u.size):
        nxt = soc + gain * u[t]
        if nxt > params.battery_capacity:
            u[t] = max(0.0, (params.battery_capacity - soc) / gain)
        elif nxt < 0:
            u[t] = min(0.0, -soc / gain)
        soc = soc + gain * u[t]
    return u


def repair_bus(scenario: StationScenario, allocations: Sequence[Allocation],
               tolerance: float = DEFAULT_TOLERANCE) -> list[Allocation]:
    """Make allocations bus-feasible by proportional curtailment.

    Where the net bus load exceeds the limit, every profile pushing in the
    direction of the overload is scaled by ``C / |load|``; SoC excursions this
    creates are then removed by trimming later power. Both steps only shrink
    power magnitudes, so the loop terminates; zeroing is the last resort.
    """
    C = scenario.bus_capacity
    profiles = np.array([a.power_profile for a in allocations], dtype=float)
    out = lambda: [Allocation(a.disconnect_time, profiles[n]) for n, a in enumerate(allocations)]  # noqa: E731
    if check_feasible(scenario, allocations, tolerance).ok:
        return [Allocation(a.disconnect_time, a.power_profile) for a in allocations]
    for _ in range(100):
        load = profiles.sum(axis=0)
        over = np.abs(load) > C
        for t in np.flatnonzero(over):
            sign = np.sign(load[t])
            same = np.sign(profiles[:, t]) == sign
            profiles[same, t] *= C / abs(load[t])
        for n, (params, _) in enumerate(scenario.fleet):
            _clamp_soc(params, profiles[n], scenario.interval_hours)
        if np.all(np.abs(profiles.sum(axis=0)) <= C + tolerance):
            return out()
    load = profiles.sum(axis=0)
    profiles[:, np.abs(load) > C + tolerance] = 0.0
    for n, (params, _) in enumerate(scenario.fleet):
        _clamp_soc(params, profiles[n], scenario.interval_hours)
    return out()


def _window(ev_type, horizon, width):
    if width is None:
        return None
    lo = max(0, ev_type.desired_disconnect - width)
    hi = min(horizon, ev_type.desired_disconnect + width)
    return range(lo, hi + 1)


def run_admm(scenario: StationScenario, config: AdmmConfig | None = None) -> ScheduleSolution:
    """Approximately solve the flexible scheduling problem by ADMM sweeps."""
    config = config or AdmmConfig()
    T, N = scenario.horizon, scenario.n_ev
    duals = DualState.zeros(T, config.penalty)
    profiles = np.zeros((N, T))
    taus = [t.desired_disconnect for t in scenario.types]
    rng = np.random.default_rng(config.seed)
    windows = [_window(t, T, config.tau_window) for t in scenario.types]

    best = None
    best_cost = np.inf
    best_residual = np.inf
    since_improvement = 0
    trace = []
    polished = {}
    residual = np.inf
    converged = False
    sweep = 0
    for sweep in range(1, config.max_sweeps + 1):
        order = rng.permutation(N) if config.randomize_order else range(N)
        seen = np.zeros((N, T))
        for n in order:
            other = profiles.sum(axis=0) - profiles[n]
            seen[n] = other
            ctx = SubproblemContext(other, duals, scenario.prices, scenario.interval_hours, scenario.bus_capacity)
            try:
                sol = solve_ev_subproblem(scenario.fleet[n], ctx, windows[n], tol=config.qp_tol)
            except SolverError as exc:
                raise SolverError(f"sweep {sweep}, ev {n}: {exc}", {**exc.diagnostics, "sweep": sweep, "ev": n}) from exc
            profiles[n] = sol.power
            taus[n] = sol.tau
        load = profiles.sum(axis=0)
        new_duals = dual_update(duals, load, scenario.bus_capacity)
        residual = bus_residual(load, scenario.bus_capacity)

        iterate = [Allocation(taus[n], profiles[n]) for n in range(N)]
        repaired = repair_bus(scenario, iterate)
        cost = social_cost(scenario, repaired)
        key = tuple(taus)
        if config.polish and key not in polished:
            polished[key] = solve_joint_fixed_tau(scenario, key, config.qp_tol)
            if polished[key][1] < cost:
                repaired, cost = polished[key]
        if best is None or cost < best_cost - tie_eps(best_cost):
            best, best_cost = repaired, cost
            since_improvement = 0
        else:
            since_improvement += 1
        best_residual = min(best_residual, residual)
        trace.append(SweepRecord(sweep, cost, residual, best_cost, best_residual))
        log.debug("sweep %d cost %.6f residual %.3g", sweep, cost, residual)

        stationary = (np.allclose(new_duals.multipliers, duals.multipliers, rtol=0, atol=1e-12)
                      and np.allclose(seen, load[None, :] - profiles, rtol=0, atol=1e-10))
        duals = new_duals
        if residual <= config.primal_tolerance and (stationary or since_improvement >= config.stall_window):
            converged = True
            break

    if config.local_search:
        best, best_cost = _local_search(scenario, best, best_cost, windows, polished, config.qp_tol)
    return ScheduleSolution(best, best_cost, residual, sweep, converged, trace, "admm", len(polished))


def _local_search(scenario, allocations, cost, windows, cache, tol, max_rounds=50):
    """Move single disconnection times by one interval while that lowers the polished cost."""
    T = scenario.horizon
    taus = [a.disconnect_time for a in allocations]
    for _ in range(max_rounds):
        improved = False
        for n in range(scenario.n_ev):
            for step in (-1, 1):
                tau = taus[n] + step
                allowed = windows[n] if windows[n] is not None else range(T + 1)
                if tau not in allowed:
                    continue
                key = tuple(taus[:n] + [tau] + taus[n + 1:])
                if key not in cache:
                    cache[key] = solve_joint_fixed_tau(scenario, key, tol)
                cand, cand_cost = cache[key]
                if cand_cost < cost - tie_eps(cost):
                    allocations, cost, taus = cand, cand_cost, list(key)
                    improved = True
        if not improved:
            break
    return allocations, cost
