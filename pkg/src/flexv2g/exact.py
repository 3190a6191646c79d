"""Exact solution of the flexible scheduling problem at desk scale.

With every disconnection time fixed the problem is a convex QP over all
profiles jointly, bus limit included. The exact solver enumerates
disconnection-time vectors best-first by total delay cost and stops as soon
as the delay cost plus a valid lower bound on the remaining cost cannot beat
the incumbent.

The lower bound comes from monotonicity: any profile feasible for an early
disconnection stays feasible (padded with zeros) for a later one, so the
non-delay part of the optimum can only decrease as disconnection times grow.
Evaluating the vector of latest candidates therefore bounds every other
vector's non-delay cost from below.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, InputError
from .formulation import QPBuilder, add_ev_block
from .model import Allocation, ScheduleSolution, StationScenario, delay_cost, social_cost
from .qp import solve_qp
from .subproblem import DEFAULT_QP_TOL, _candidate_order, tie_eps

DEFAULT_BUDGET = 10 ** 6


def solve_joint_fixed_tau(scenario: StationScenario, tau_vector: Sequence[int], tol: float = DEFAULT_QP_TOL,
                          allow_discharge: bool = True):
    """Globally optimal profiles for fixed disconnection times.

    Returns ``(allocations, social_cost)``. ``allow_discharge=False`` adds
    the unidirectional restriction ``u >= 0``.
    """
    T = scenario.horizon
    if len(tau_vector) != scenario.n_ev:
        raise InputError(f"expected {scenario.n_ev} disconnection times, got {len(tau_vector)}")
    taus = [int(t) for t in tau_vector]
    if any(not 0 <= t <= T for t in taus):
        raise InputError(f"disconnection times must lie in [0, {T}]")

    b = QPBuilder()
    blocks = []
    for (params, ev_type), tau in zip(scenario.fleet, taus):
        if not allow_discharge and params.max_discharge_rate > 0:
            params = replace(params, max_discharge_rate=0.0)
        blocks.append(add_ev_block(b, params, ev_type, tau, scenario.prices, scenario.interval_hours))

    busy = [t for t in range(T) if any(blk.active > t for blk in blocks)]
    if busy:
        upper, lower = [], []
        for blk in blocks:
            sel = np.zeros((len(busy), blk.active))
            for r, t in enumerate(busy):
                if t < blk.active:
                    sel[r, t] = 1.0
            upper += [(blk.charge, sel), (blk.discharge, -sel)]
            lower += [(blk.charge, -sel), (blk.discharge, sel)]
        b.rows([(i, c) for i, c in upper if i.size], np.full(len(busy), scenario.bus_capacity))
        b.rows([(i, c) for i, c in lower if i.size], np.full(len(busy), scenario.bus_capacity))

    x = solve_qp(*b.build(), tol=tol).x if b.n else np.zeros(0)
    allocations = []
    for blk, tau in zip(blocks, taus):
        charge, discharge = blk.extract(x, T)
        allocations.append(Allocation(tau, charge - discharge))
    return allocations, social_cost(scenario, allocations)


def _delay_key(scenario, taus):
    return tuple(abs(t - ev.desired_disconnect) for t, ev in zip(taus, scenario.types)), tuple(taus)


def solve_exact(scenario: StationScenario, tau_candidates_per_ev=None, budget_guard: int = DEFAULT_BUDGET,
                tol: float = DEFAULT_QP_TOL, allow_discharge: bool = True) -> ScheduleSolution:
    """Exact optimum over a product set of candidate disconnection times.

    Equal-cost vectors are resolved toward the lexicographically smallest
    delay vector ``|tau - desired|``. Raises :class:`BudgetExceededError` when
    the candidate product set is larger than ``budget_guard``.
    """
    T, N = scenario.horizon, scenario.n_ev
    if tau_candidates_per_ev is None:
        tau_candidates_per_ev = [range(T + 1)] * N
    if len(tau_candidates_per_ev) != N:
        raise InputError(f"expected {N} candidate sets, got {len(tau_candidates_per_ev)}")
    cands = []
    for n, c in enumerate(tau_candidates_per_ev):
        c = sorted(set(int(t) for t in c))
        if not c:
            raise InputError(f"candidate set of ev {n} is empty")
        if c[0] < 0 or c[-1] > T:
            raise InputError(f"candidates of ev {n} must lie in [0, {T}]")
        cands.append(c)
    size = math.prod(len(c) for c in cands)
    if size > budget_guard:
        raise BudgetExceededError(f"exact enumeration over {size} disconnection-time vectors exceeds "
                                  f"the budget guard of {budget_guard}")

    dt = scenario.interval_hours
    types = scenario.types
    orders = [_candidate_order(ev_type, c, dt) for ev_type, c in zip(types, cands)]
    # EVs indifferent to delay are optimal at their latest candidate whatever the
    # others do; they are pinned there and pulled back afterwards
    free = [n for n, ev_type in enumerate(types) if ev_type.temporal_inflexibility == 0 and len(orders[n]) > 1]
    ascending = {n: sorted(orders[n]) for n in free}
    for n in free:
        orders[n] = [max(orders[n])]
    delays = [[delay_cost(ev_type, t, dt) for t in order] for ev_type, order in zip(types, orders)]

    latest = tuple(max(o) for o in orders)
    allocs, cost = solve_joint_fixed_tau(scenario, latest, tol, allow_discharge)
    floor = cost - sum(delay_cost(ev_type, t, dt) for ev_type, t in zip(types, latest))
    best_taus, best_allocs, best_cost = latest, allocs, cost
    evaluations = 1

    start = (0,) * N
    heap = [(sum(d[0] for d in delays), start)]
    seen = {start}
    while heap:
        total_delay, idx = heapq.heappop(heap)
        if total_delay + floor > best_cost + tie_eps(best_cost):
            break
        taus = tuple(o[i] for o, i in zip(orders, idx))
        if taus != latest:
            allocs, cost = solve_joint_fixed_tau(scenario, taus, tol, allow_discharge)
            evaluations += 1
            eps = tie_eps(best_cost)
            if cost < best_cost - eps or (cost <= best_cost + eps
                                          and _delay_key(scenario, taus) < _delay_key(scenario, best_taus)):
                best_taus, best_allocs, best_cost = taus, allocs, cost
        for n in range(N):
            if idx[n] + 1 < len(orders[n]):
                nxt = idx[:n] + (idx[n] + 1,) + idx[n + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (sum(d[i] for d, i in zip(delays, nxt)), nxt))

    for n in free:
        best_taus, best_allocs, best_cost, used = _pull_back(
            scenario, n, ascending[n], best_taus, best_allocs, best_cost, tol, allow_discharge)
        evaluations += used
    return ScheduleSolution(best_allocs, best_cost, 0.0, 0, True, [], "exact", evaluations)


def _pull_back(scenario, n, ascending, taus, allocs, cost, tol, allow_discharge):
    """Earliest disconnection time for a delay-indifferent EV that keeps the optimal cost.

    With the other times fixed the cost is nonincreasing in this EV's time, so
    the set of optimal times is an upper interval of the candidates.
    """
    target = scenario.types[n].desired_disconnect
    eps = tie_eps(cost)
    solved = {taus[n]: (allocs, cost)}
    evaluations = 0

    def at(tau):
        nonlocal evaluations
        if tau not in solved:
            vec = taus[:n] + (tau,) + taus[n + 1:]
            solved[tau] = solve_joint_fixed_tau(scenario, vec, tol, allow_discharge)
            evaluations += 1
        return solved[tau]

    lo, hi = 0, len(ascending) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if at(ascending[mid])[1] <= cost + eps:
            hi = mid
        else:
            lo = mid + 1
    tau = ascending[lo]
    if tau < target and lo + 1 < len(ascending) and ascending[lo + 1] - target < target - tau:
        tau = ascending[lo + 1]
    new_allocs, new_cost = at(tau)
    return taus[:n] + (tau,) + taus[n + 1:], new_allocs, new_cost, evaluations
