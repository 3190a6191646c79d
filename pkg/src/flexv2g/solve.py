"""One entry point over the two scheduling solvers."""

from __future__ import annotations

from dataclasses import replace

from .admm import AdmmConfig, run_admm
from .errors import InputError
from .exact import solve_exact
from .model import ScheduleSolution, StationScenario

SOLVERS = ("exact", "admm")


def unidirectional(scenario: StationScenario) -> StationScenario:
    """The same station with discharging switched off for every EV."""
    fleet = tuple((replace(params, max_discharge_rate=0.0), ev_type) for params, ev_type in scenario.fleet)
    return replace(scenario, fleet=fleet)


def solve_schedule(scenario: StationScenario, solver: str = "exact", admm_config: AdmmConfig | None = None,
                   tau_candidates=None, allow_discharge: bool = True) -> ScheduleSolution:
    """Schedule the station with ``solver``.

    ``tau_candidates`` restricts each EV's disconnection time (one iterable
    per EV); the ADMM solver only honours a symmetric window around the
    desired time, so arbitrary sets are reserved for the exact solver.
    """
    if solver == "exact":
        return solve_exact(scenario, tau_candidates, allow_discharge=allow_discharge)
    if solver == "admm":
        config = admm_config or AdmmConfig()
        if tau_candidates is not None:
            raise InputError("the admm solver restricts disconnection times through AdmmConfig.tau_window")
        return run_admm(scenario if allow_discharge else unidirectional(scenario), config)
    raise InputError(f"unknown solver {solver!r}; expected one of {', '.join(SOLVERS)}")
