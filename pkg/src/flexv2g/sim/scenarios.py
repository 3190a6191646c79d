"""Scenario construction: station configuration, dataset sampling and random toys."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import InputError
from ..model import EVStaticParams, EVType, StationScenario
from .datasets import DatasetBundle


@dataclass(frozen=True)
class StationConfig:
    """Station and fleet physics; the defaults describe five mid-size EVs over a 12 h day."""

    n_ev: int = 5
    start_hour: float = 10.0
    end_hour: float = 22.0
    interval_hours: float = 0.25
    bus_capacity: float = 15.0
    battery_capacity: float = 40.0
    efficiency: float = 0.87
    wear_cost: float = 0.13
    max_charge_rate: float = 6.6
    max_discharge_rate: float = 6.6
    soc_inflexibility: float = 10.0
    alpha_scale: float = 1.0

    def __post_init__(self):
        if self.n_ev < 1:
            raise InputError("n_ev must be >= 1")
        if self.interval_hours <= 0 or self.end_hour <= self.start_hour:
            raise InputError("need interval_hours > 0 and end_hour > start_hour")
        steps = (self.end_hour - self.start_hour) / self.interval_hours
        if abs(steps - round(steps)) > 1e-9:
            raise InputError("the day length must be a whole number of intervals")
        if self.alpha_scale < 0:
            raise InputError("alpha_scale must be >= 0")

    @property
    def horizon(self) -> int:
        return round((self.end_hour - self.start_hour) / self.interval_hours)

    @classmethod
    def from_dict(cls, data: dict) -> "StationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown station settings: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def ev_params(self, initial_soc: float) -> EVStaticParams:
        return EVStaticParams(self.battery_capacity, self.efficiency, self.wear_cost, initial_soc,
                              self.max_charge_rate, self.max_discharge_rate)


def _window(bundle: DatasetBundle, config: StationConfig) -> int:
    """First data interval of the station's day; the station must sit inside the data day."""
    if abs(config.interval_hours - bundle.interval_hours) > 1e-12:
        raise InputError(f"station interval {config.interval_hours} h differs from the data's "
                         f"{bundle.interval_hours} h")
    offset = (config.start_hour - bundle.start_hour) / bundle.interval_hours
    if abs(offset - round(offset)) > 1e-9 or offset < 0 or round(offset) + config.horizon > bundle.horizon:
        end = bundle.start_hour + bundle.horizon * bundle.interval_hours
        raise InputError(f"station hours {config.start_hour}-{config.end_hour} fall outside the data day "
                         f"{bundle.start_hour}-{end} or off its interval grid")
    return round(offset)


def sample_scenario(bundle: DatasetBundle, config: StationConfig | None = None, seed: int = 0) -> StationScenario:
    """Draw one station day: a price day and, per EV, a departure, an SoC pair and an inflexibility.

    The station's hours may be a window of the data day; departures are
    shifted into the window and clipped to its ends.
    """
    config = config or StationConfig()
    T = config.horizon
    offset = _window(bundle, config)
    pairs = bundle.soc_pairs[bundle.soc_pairs[:, 1] <= config.battery_capacity]
    if not (bundle.price_days and bundle.disconnect_samples.size and len(pairs) and bundle.alpha_samples.size):
        raise InputError("every dataset must contain at least one usable sample")
    rng = np.random.default_rng(seed)
    prices = bundle.price_days[rng.integers(len(bundle.price_days))][offset:offset + T]
    fleet = []
    for _ in range(config.n_ev):
        tau = min(T, max(0, int(rng.choice(bundle.disconnect_samples)) - offset))
        initial, desired = pairs[rng.integers(len(pairs))]
        alpha = float(rng.choice(bundle.alpha_samples)) * config.alpha_scale
        fleet.append((config.ev_params(float(initial)),
                      EVType(tau, float(desired), alpha, config.soc_inflexibility)))
    return StationScenario(T, config.interval_hours, prices, config.bus_capacity, fleet)


def random_toy(seed: int, n_ev: int = 2, horizon: int = 8, load_factor: float = 0.45,
               interval_hours: float = 0.25) -> StationScenario:
    """Small random station whose bus carries ``load_factor`` of the fleet's combined charge rate.

    Desired departures fall in the second half of the horizon and SoC gaps
    (3-7 kWh) exceed what the bus can deliver to everyone at once, so the bus
    limit binds.
    """
    rng = np.random.default_rng(seed)
    prices = 0.13 + 0.09 * rng.random(horizon)
    fleet = []
    for _ in range(n_ev):
        initial = rng.uniform(5.0, 20.0)
        gap = rng.uniform(3.0, 7.0)
        params = EVStaticParams(40.0, 0.87, 0.13, initial, 6.6, 6.6)
        tau = int(rng.integers(horizon // 2, horizon))
        fleet.append((params, EVType(tau, initial + gap, float(rng.uniform(20.0, 40.0)), 10.0)))
    return StationScenario(horizon, interval_hours, prices, load_factor * 6.6 * n_ev, fleet)
