"""Per-EV scheduling subproblem solved inside each ADMM sweep.

For a fixed disconnection time the augmented cost of one EV (its own cost,
its energy bill and the quadratic penalty on the relaxed bus constraint)
is a convex QP. The absolute value inside the penalty hinge is handled by
an auxiliary ``excess[t] >= max(0, lam + nu*(+-(u + other) - C))``, whose
square replaces the hinge. The best disconnection time is then found by
enumeration with dominance and lower-bound pruning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InputError
from .formulation import QPBuilder, add_ev_block
from .model import Allocation, EVStaticParams, EVType, delay_cost, energy_cost, ev_cost
from .qp import solve_qp

DEFAULT_QP_TOL = 1e-10
# objectives closer than this (relative) count as ties; QP noise is ~1e-10
TIE_RTOL = 1e-7


def tie_eps(value: float) -> float:
    return TIE_RTOL * (1.0 + abs(value))


@dataclass
class DualState:
    """Bus multipliers (one per interval) and the ADMM penalty parameter."""

    multipliers: np.ndarray
    penalty: float

    def __post_init__(self):
        self.multipliers = np.asarray(self.multipliers, dtype=float)
        if self.penalty <= 0:
            raise InputError("penalty must be > 0")
        if np.any(self.multipliers < 0):
            raise InputError("multipliers must be nonnegative")

    @classmethod
    def zeros(cls, horizon: int, penalty: float) -> "DualState":
        return cls(np.zeros(horizon), penalty)


@dataclass
class SubproblemContext:
    """What one EV sees of the rest of the station during a sweep."""

    other_load: np.ndarray
    duals: DualState
    prices: np.ndarray
    interval_hours: float
    bus_capacity: float

    def __post_init__(self):
        self.other_load = np.asarray(self.other_load, dtype=float)
        self.prices = np.asarray(self.prices, dtype=float)
        if not (self.other_load.shape == self.prices.shape == self.duals.multipliers.shape):
            raise InputError("other_load, prices and multipliers must all have length T")

    @property
    def horizon(self) -> int:
        return self.prices.size


@dataclass
class FixedTauSolution:
    power: np.ndarray
    objective: float
    charge: np.ndarray
    discharge: np.ndarray
    qp_iterations: int = 0


@dataclass
class SubproblemSolution:
    tau: int
    power: np.ndarray
    objective: float
    evaluated: int = 0


def penalty_terms(total, multipliers, penalty: float, bus_capacity: float) -> np.ndarray:
    """Per-interval hinge penalty ``[lam + nu*(|total| - C)]_+^2 / (2 nu)``."""
    hinge = np.maximum(multipliers + penalty * (np.abs(total) - bus_capacity), 0.0)
    return hinge ** 2 / (2.0 * penalty)


def augmented_cost(params: EVStaticParams, ev_type: EVType, tau: int, power, ctx: SubproblemContext) -> float:
    """Evaluate the augmented subproblem cost of a given (tau, profile) from raw terms."""
    power = np.asarray(power, dtype=float)
    alloc = Allocation(tau, power)
    nu = ctx.duals.penalty
    return (ev_cost(params, ev_type, alloc, ctx.interval_hours)
            + energy_cost(ctx.prices, power, ctx.interval_hours)
            - float(ctx.duals.multipliers @ ctx.duals.multipliers) / (2.0 * nu)
            + float(penalty_terms(power + ctx.other_load, ctx.duals.multipliers, nu, ctx.bus_capacity).sum()))


def solve_fixed_tau(ev, tau: int, ctx: SubproblemContext, tol: float = DEFAULT_QP_TOL) -> FixedTauSolution:
    """Minimize the augmented cost of one EV over its profile, disconnection time fixed."""
    params, ev_type = ev
    T = ctx.horizon
    if not 0 <= tau <= T:
        raise InputError(f"tau must lie in [0, {T}], got {tau}")
    lam = ctx.duals.multipliers
    nu = ctx.duals.penalty
    C = ctx.bus_capacity
    o = ctx.other_load

    b = QPBuilder()
    block = add_ev_block(b, params, ev_type, tau, ctx.prices, ctx.interval_hours)
    k = block.active
    if k:
        excess = b.var(k, 0.0, np.inf, 0.0, 1.0 / nu)
        minus_eye = -np.eye(k)
        b.rows(block.net_terms(nu) + [(excess, minus_eye)], -lam[:k] - nu * (o[:k] - C))
        b.rows(block.net_terms(-nu) + [(excess, minus_eye)], -lam[:k] + nu * (o[:k] + C))

    constant = delay_cost(ev_type, tau, ctx.interval_hours)
    constant += float(penalty_terms(o[k:], lam[k:], nu, C).sum())
    constant -= float(lam @ lam) / (2.0 * nu)

    if b.n == 0:
        x = np.zeros(0)
        qp_obj, iters = 0.0, 0
    else:
        res = solve_qp(*b.build(), tol=tol)
        x, qp_obj, iters = res.x, res.objective, res.iterations
    charge, discharge = block.extract(x, T)
    power = charge - discharge
    return FixedTauSolution(power, qp_obj + constant, charge, discharge, iters)


def _candidate_order(ev_type: EVType, candidates, interval_hours):
    """Candidates worth solving, cheapest delay first.

    Keeping the profile at zero after an earlier disconnection is feasible for
    any later one, so the non-delay part of the objective is nonincreasing in
    tau. Among candidates at or before the desired time only the latest can
    therefore win (it is also closest to the desired time for tie-breaking).
    """
    target = ev_type.desired_disconnect
    early = [t for t in candidates if t <= target]
    kept = sorted(set([max(early)] if early else []) | {t for t in candidates if t > target})
    return sorted(kept, key=lambda t: (delay_cost(ev_type, t, interval_hours), abs(t - target), t))


def _better(obj, tau, best_obj, best_tau, target):
    eps = tie_eps(best_obj)
    if obj < best_obj - eps:
        return True
    if obj > best_obj + eps:
        return False
    return (abs(tau - target), tau) < (abs(best_tau - target), best_tau)


def solve_ev_subproblem(ev, ctx: SubproblemContext, tau_candidates: Iterable[int] | None = None,
                        tol: float = DEFAULT_QP_TOL) -> SubproblemSolution:
    """Best (tau, profile) pair over the candidate disconnection times.

    Ties are broken toward the candidate closest to the desired time, then
    toward the smallest one.
    """
    params, ev_type = ev
    T = ctx.horizon
    candidates = sorted(set(range(T + 1) if tau_candidates is None else (int(t) for t in tau_candidates)))
    if not candidates:
        raise InputError("tau_candidates must be nonempty")
    if candidates[0] < 0 or candidates[-1] > T:
        raise InputError(f"tau candidates must lie in [0, {T}]")

    order = _candidate_order(ev_type, candidates, ctx.interval_hours)
    target = ev_type.desired_disconnect
    if ev_type.temporal_inflexibility == 0:
        return _search_free_delay(ev, ctx, sorted(order), tol)
    latest = max(order)
    first = solve_fixed_tau(ev, latest, ctx, tol)
    # the latest candidate's objective without its delay bounds every candidate's remainder
    floor = first.objective - delay_cost(ev_type, latest, ctx.interval_hours)
    best_tau, best = latest, first
    evaluated = 1
    for tau in order:
        if tau == latest:
            continue
        bound = delay_cost(ev_type, tau, ctx.interval_hours) + floor
        if bound > best.objective + tie_eps(best.objective):
            break
        sol = solve_fixed_tau(ev, tau, ctx, tol)
        evaluated += 1
        if _better(sol.objective, tau, best.objective, best_tau, target):
            best_tau, best = tau, sol
    return SubproblemSolution(best_tau, best.power, best.objective, evaluated)


def _search_free_delay(ev, ctx, ascending, tol):
    """Delays cost nothing: the objective is nonincreasing in tau, so bisect for
    the earliest candidate that attains the latest one's value."""
    target = ev[1].desired_disconnect
    solved = {ascending[-1]: solve_fixed_tau(ev, ascending[-1], ctx, tol)}
    best_obj = solved[ascending[-1]].objective
    eps = tie_eps(best_obj)
    lo, hi = 0, len(ascending) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        tau = ascending[mid]
        solved[tau] = solve_fixed_tau(ev, tau, ctx, tol)
        if solved[tau].objective <= best_obj + eps:
            hi = mid
        else:
            lo = mid + 1
    tau = ascending[lo]
    # the one candidate kept below the target may be farther from it than the next one
    if tau < target and lo + 1 < len(ascending) and ascending[lo + 1] - target < target - tau:
        tau = ascending[lo + 1]
        if tau not in solved:
            solved[tau] = solve_fixed_tau(ev, tau, ctx, tol)
    sol = solved[tau]
    return SubproblemSolution(tau, sol.power, sol.objective, len(solved))
