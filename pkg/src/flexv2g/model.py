"""Station and EV model: domain types, SoC dynamics, costs and feasibility.

Units throughout: energy in kWh, power in kW, time in hours, money in $.
Power profiles are positive when the EV charges and negative when it
discharges into the station bus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError

DEFAULT_TOLERANCE = 1e-6


def _require(condition, message):
    if not condition:
        raise InputError(message)


@dataclass(frozen=True)
class EVStaticParams:
    """Public physical parameters of one EV."""

    battery_capacity: float
    efficiency: float
    wear_cost: float
    initial_soc: float
    max_charge_rate: float
    max_discharge_rate: float

    def __post_init__(self):
        for name in ("battery_capacity", "efficiency", "wear_cost", "initial_soc",
                     "max_charge_rate", "max_discharge_rate"):
            value = getattr(self, name)
            _require(isinstance(value, (int, float)) and math.isfinite(value),
                     f"{name} must be a finite number, got {value!r}")
        _require(self.battery_capacity > 0, "battery_capacity must be > 0")
        _require(0 <= self.efficiency <= 1, "efficiency must lie in [0, 1]")
        _require(self.wear_cost >= 0, "wear_cost must be >= 0")
        _require(0 <= self.initial_soc <= self.battery_capacity,
                 "initial_soc must lie in [0, battery_capacity]")
        _require(self.max_charge_rate > 0, "max_charge_rate must be > 0")
        _require(self.max_discharge_rate >= 0, "max_discharge_rate must be >= 0")


@dataclass(frozen=True)
class EVType:
    """Private preferences of one EV driver.

    ``desired_disconnect`` is an interval index in ``{0, ..., T}``;
    ``temporal_inflexibility`` is the price of a one-hour delay ($/h^2) and
    ``soc_inflexibility`` the price of a squared energy shortfall ($/kWh^2).
    """

    desired_disconnect: int
    desired_soc: float
    temporal_inflexibility: float
    soc_inflexibility: float

    def __post_init__(self):
        _require(isinstance(self.desired_disconnect, (int, np.integer))
                 and not isinstance(self.desired_disconnect, bool),
                 "desired_disconnect must be an integer interval index")
        object.__setattr__(self, "desired_disconnect", int(self.desired_disconnect))
        for name in ("desired_soc", "temporal_inflexibility", "soc_inflexibility"):
            value = getattr(self, name)
            _require(isinstance(value, (int, float)) and math.isfinite(value),
                     f"{name} must be a finite number, got {value!r}")
        _require(self.desired_disconnect >= 0, "desired_disconnect must be >= 0")
        _require(self.desired_soc >= 0, "desired_soc must be >= 0")
        _require(self.temporal_inflexibility >= 0, "temporal_inflexibility must be >= 0")
        _require(self.soc_inflexibility >= 0, "soc_inflexibility must be >= 0")


FleetMember = tuple  # (EVStaticParams, EVType)


@dataclass(frozen=True, eq=False)
class StationScenario:
    """One day at the station: price vector, bus limit and connected fleet."""

    horizon: int
    interval_hours: float
    prices: np.ndarray
    bus_capacity: float
    fleet: tuple

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "fleet", tuple((p, t) for p, t in self.fleet))
        _require(int(self.horizon) == self.horizon and self.horizon >= 1, "horizon must be an integer >= 1")
        object.__setattr__(self, "horizon", int(self.horizon))
        _require(self.interval_hours > 0, "interval_hours must be > 0")
        _require(prices.ndim == 1 and prices.size == self.horizon,
                 f"prices must have exactly {self.horizon} entries, got {prices.size}")
        _require(bool(np.all(np.isfinite(prices))), "prices must be finite")
        _require(self.bus_capacity > 0, "bus_capacity must be > 0")
        _require(len(self.fleet) >= 1, "fleet must contain at least one EV")
        for n, (params, ev_type) in enumerate(self.fleet):
            _require(isinstance(params, EVStaticParams) and isinstance(ev_type, EVType),
                     f"fleet[{n}] must be an (EVStaticParams, EVType) pair")
            _require(ev_type.desired_disconnect <= self.horizon,
                     f"fleet[{n}]: desired_disconnect {ev_type.desired_disconnect} exceeds horizon {self.horizon}")
            _require(ev_type.desired_soc <= params.battery_capacity + 1e-12,
                     f"fleet[{n}]: desired_soc exceeds battery_capacity")

    @property
    def n_ev(self) -> int:
        return len(self.fleet)

    @property
    def types(self) -> list[EVType]:
        return [t for _, t in self.fleet]

    def with_types(self, types: Sequence[EVType]) -> "StationScenario":
        """Same station and physics, with preferences replaced (e.g. by reports)."""
        if len(types) != self.n_ev:
            raise InputError(f"expected {self.n_ev} types, got {len(types)}")
        return replace(self, fleet=tuple((p, t) for (p, _), t in zip(self.fleet, types)))

    def without(self, n: int) -> "StationScenario":
        """Scenario with EV ``n`` removed; ``None`` if it was the only EV."""
        fleet = self.fleet[:n] + self.fleet[n + 1:]
        return replace(self, fleet=fleet) if fleet else None


@dataclass(eq=False)
class Allocation:
    """Disconnection time and power profile assigned to one EV."""

    disconnect_time: int
    power_profile: np.ndarray

    def __post_init__(self):
        self.disconnect_time = int(self.disconnect_time)
        self.power_profile = np.asarray(self.power_profile, dtype=float).copy()
        _require(self.power_profile.ndim == 1, "power_profile must be a vector")
        _require(0 <= self.disconnect_time <= self.power_profile.size,
                 f"disconnect_time must lie in [0, {self.power_profile.size}]")

    def validate_for(self, params: EVStaticParams, tol: float = DEFAULT_TOLERANCE):
        """Raise :class:`InputError` unless the allocation respects its own invariants."""
        u = self.power_profile
        if np.any(np.abs(u[self.disconnect_time:]) > tol):
            raise InputError("power_profile must be zero at and after disconnect_time")
        if np.any(u > params.max_charge_rate + tol) or np.any(u < -params.max_discharge_rate - tol):
            raise InputError("power_profile exceeds the EV's rate limits")

    @classmethod
    def idle(cls, horizon: int, disconnect_time: int) -> "Allocation":
        return cls(disconnect_time, np.zeros(horizon))


class Violation(NamedTuple):
    constraint: str  # rate | soc_box | post_disconnect | bus
    ev: int | None
    t: int
    magnitude: float


@dataclass
class FeasibilityReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def format(self) -> str:
        if self.ok:
            return "feasible: no violations"
        lines = [f"{len(self.violations)} violation(s):"]
        for v in self.violations:
            who = "bus" if v.ev is None else f"ev {v.ev}"
            lines.append(f"  {v.constraint:<16} {who:<7} t={v.t:<4d} by {v.magnitude:.6g}")
        return "\n".join(lines)


@dataclass
class ScheduleSolution:
    allocations: list
    social_cost: float
    primal_residual: float = 0.0
    sweeps_used: int = 0
    converged: bool = True
    trace: list = field(default_factory=list)
    solver: str = "admm"
    evaluations: int = 0

    @property
    def disconnect_times(self) -> list[int]:
        return [a.disconnect_time for a in self.allocations]


def soc_trajectory(params: EVStaticParams, profile, interval_hours: float) -> np.ndarray:
    """State of charge at the start of every interval plus the final one (length T+1).

    Efficiency scales both charging and discharging energy, exactly as the
    linear SoC model is written, so one kWh exported drains ``efficiency``
    kWh from the battery.
    """
    u = np.asarray(profile, dtype=float)
    if u.ndim != 1:
        raise InputError("profile must be a 1-D vector")
    if interval_hours <= 0:
        raise InputError("interval_hours must be > 0")
    soc = np.empty(u.size + 1)
    soc[0] = params.initial_soc
    np.cumsum(u * (params.efficiency * interval_hours), out=soc[1:])
    soc[1:] += params.initial_soc
    return soc


def _check_length(profile, horizon):
    if profile.size != horizon:
        raise InputError(f"profile length {profile.size} does not match horizon {horizon}")


def delay_cost(ev_type: EVType, disconnect_time: int, interval_hours: float) -> float:
    """Temporal dissatisfaction, with the delay measured in hours."""
    delay_h = (disconnect_time - ev_type.desired_disconnect) * interval_hours
    return ev_type.temporal_inflexibility * delay_h * delay_h


def shortfall_cost(ev_type: EVType, final_soc: float) -> float:
    gap = max(0.0, ev_type.desired_soc - final_soc)
    return ev_type.soc_inflexibility * gap * gap


def ev_cost(params: EVStaticParams, ev_type: EVType, alloc: Allocation, interval_hours: float) -> float:
    """Driver cost of an allocation: delay + SoC shortfall + battery wear."""
    u = alloc.power_profile
    final_soc = soc_trajectory(params, u, interval_hours)[-1]
    wear = params.wear_cost * float(np.abs(u).sum()) * interval_hours
    return float(delay_cost(ev_type, alloc.disconnect_time, interval_hours) + shortfall_cost(ev_type, final_soc) + wear)


def energy_cost(prices, profile, interval_hours: float) -> float:
    """Price of the energy drawn from the grid (negative when exporting)."""
    p = np.asarray(prices, dtype=float)
    u = np.asarray(profile, dtype=float)
    if p.shape != u.shape:
        raise InputError(f"prices and profile lengths differ ({p.size} vs {u.size})")
    return float(p @ u) * interval_hours


def social_cost(scenario: StationScenario, allocations: Sequence[Allocation]) -> float:
    """Total driver cost plus energy cost over the fleet."""
    if len(allocations) != scenario.n_ev:
        raise InputError(f"expected {scenario.n_ev} allocations, got {len(allocations)}")
    total = 0.0
    for (params, ev_type), alloc in zip(scenario.fleet, allocations):
        _check_length(alloc.power_profile, scenario.horizon)
        total += ev_cost(params, ev_type, alloc, scenario.interval_hours)
        total += energy_cost(scenario.prices, alloc.power_profile, scenario.interval_hours)
    return float(total)


def check_feasible(scenario: StationScenario, allocations: Sequence[Allocation],
                   tolerance: float = DEFAULT_TOLERANCE) -> FeasibilityReport:
    """Report every rate, SoC, post-disconnection and bus violation above ``tolerance``."""
    if len(allocations) != scenario.n_ev:
        raise InputError(f"expected {scenario.n_ev} allocations, got {len(allocations)}")
    report = FeasibilityReport()
    add = report.violations.append
    total = np.zeros(scenario.horizon)
    for n, ((params, _), alloc) in enumerate(zip(scenario.fleet, allocations)):
        u = alloc.power_profile
        _check_length(u, scenario.horizon)
        total += u
        for t in range(scenario.horizon):
            over = max(u[t] - params.max_charge_rate, -params.max_discharge_rate - u[t])
            if over > tolerance:
                add(Violation("rate", n, t, float(over)))
            if t >= alloc.disconnect_time and abs(u[t]) > tolerance:
                add(Violation("post_disconnect", n, t, float(abs(u[t]))))
        soc = soc_trajectory(params, u, scenario.interval_hours)
        for t, s in enumerate(soc):
            over = max(s - params.battery_capacity, -s)
            if over > tolerance:
                add(Violation("soc_box", n, t, float(over)))
    for t, load in enumerate(total):
        over = abs(load) - scenario.bus_capacity
        if over > tolerance:
            add(Violation("bus", None, t, float(over)))
    return report


def _water_fill(capacity: float, caps: np.ndarray) -> np.ndarray:
    """Split ``capacity`` equally among entries, never exceeding each entry's cap."""
    share = np.zeros_like(caps)
    remaining = capacity
    open_ = caps > 0
    while remaining > 1e-12 and open_.any():
        level = remaining / open_.sum()
        headroom = caps - share
        take = np.where(open_, np.minimum(level, headroom), 0.0)
        share += take
        remaining -= take.sum()
        open_ &= caps - share > 1e-12
    return share


def naive_parallel_schedule(scenario: StationScenario) -> list[Allocation]:
    """Charge everybody from the start at equal shares of the station limit.

    Each EV charges until it reaches its desired SoC (or a full battery) and
    is released at the later of its desired time and the end of its charge.
    Shares are re-divided among the EVs still charging as others finish.
    """
    dt = scenario.interval_hours
    fleet = scenario.fleet
    T = scenario.horizon
    soc = np.array([p.initial_soc for p, _ in fleet], dtype=float)
    target = np.array([min(t.desired_soc, p.battery_capacity) for p, t in fleet])
    gain = np.array([p.efficiency * dt for p, _ in fleet])
    rates = np.array([p.max_charge_rate for p, _ in fleet])
    station_limit = min(scenario.bus_capacity, rates.sum())
    profiles = np.zeros((len(fleet), T))
    last_active = np.full(len(fleet), -1)
    for t in range(T):
        with np.errstate(over="ignore"):  # near-zero efficiency: unbounded need, capped by the rate below
            need = np.divide(np.maximum(target - soc, 0.0), gain, out=np.zeros_like(soc), where=gain > 0)
        need[need < 1e-9] = 0.0
        caps = np.minimum(rates, need)
        if not caps.any():
            break
        u = _water_fill(station_limit, caps)
        profiles[:, t] = u
        soc += gain * u
        last_active[u > 0] = t
    allocations = []
    for n, (_, ev_type) in enumerate(fleet):
        tau = max(ev_type.desired_disconnect, int(last_active[n]) + 1)
        allocations.append(Allocation(tau, profiles[n]))
    return allocations


def total_load(allocations: Sequence[Allocation]) -> np.ndarray:
    return np.sum([a.power_profile for a in allocations], axis=0)


def discharged_energy(allocations: Sequence[Allocation], interval_hours: float) -> float:
    """Energy exported by the fleet (kWh), summed over EVs and intervals."""
    return float(sum(np.clip(-a.power_profile, 0.0, None).sum() for a in allocations) * interval_hours)
