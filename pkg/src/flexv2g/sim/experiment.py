"""Baseline schedules, per-run metrics and seeded parameter sweeps."""

from __future__ import annotations

import csv
import io
import itertools
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..admm import AdmmConfig
from ..errors import InputError, SolverError, V2GError
from ..mechanism import ApproximateIncentivesWarning, run_vcg
from ..model import (ScheduleSolution, StationScenario, discharged_energy, naive_parallel_schedule,
                     social_cost)
from ..solve import solve_schedule
from .datasets import DatasetBundle
from .scenarios import StationConfig, sample_scenario

BASELINES = ("unidirectional", "inflexible", "naive", "mean_alpha")
METRICS = ("social_cost", "avg_delay_min", "v2g_energy_kwh")


def arbitrage_threshold_check(prices, wear_cost: float) -> bool:
    """Whether a buy-low/sell-high round trip can beat the wear it costs on both legs."""
    p = np.asarray(prices, dtype=float)
    if p.size == 0:
        raise InputError("prices must be nonempty")
    return bool(p.max() - p.min() > 2.0 * wear_cost)


def average_delay_minutes(scenario: StationScenario, allocations) -> float:
    """Mean lateness over the fleet in minutes; leaving early counts as zero."""
    late = [max(0, a.disconnect_time - t.desired_disconnect) for a, t in zip(allocations, scenario.types)]
    return float(np.mean(late)) * scenario.interval_hours * 60.0


def schedule_baseline(scenario: StationScenario, kind: str, solver: str = "exact",
                      admm_config: AdmmConfig | None = None) -> ScheduleSolution:
    """Schedule under one of the reference policies; the cost is always taken at the true types."""
    if kind == "naive":
        allocs = naive_parallel_schedule(scenario)
        return ScheduleSolution(allocs, social_cost(scenario, allocs), solver="naive")
    if kind == "unidirectional":
        return solve_schedule(scenario, solver, admm_config, allow_discharge=False)
    if kind == "inflexible":
        if solver == "exact":
            pinned = [[t.desired_disconnect] for t in scenario.types]
            return solve_schedule(scenario, solver, tau_candidates=pinned)
        return solve_schedule(scenario, solver, replace(admm_config or AdmmConfig(), tau_window=0))
    if kind == "mean_alpha":
        mean = float(np.mean([t.temporal_inflexibility for t in scenario.types]))
        planned = scenario.with_types([replace(t, temporal_inflexibility=mean) for t in scenario.types])
        sol = solve_schedule(planned, solver, admm_config)
        return replace(sol, social_cost=social_cost(scenario, sol.allocations))
    raise InputError(f"unknown baseline {kind!r}; expected one of {', '.join(BASELINES)}")


def run_metrics(scenario: StationScenario, solver: str = "exact", admm_config: AdmmConfig | None = None,
                baselines: Sequence[str] = (), mechanism: bool = False) -> dict:
    sol = solve_schedule(scenario, solver, admm_config)
    row = {
        "social_cost": float(sol.social_cost),
        "avg_delay_min": average_delay_minutes(scenario, sol.allocations),
        "v2g_energy_kwh": discharged_energy(sol.allocations, scenario.interval_hours),
        "converged": bool(sol.converged),
    }
    for kind in baselines:
        cost = schedule_baseline(scenario, kind, solver, admm_config).social_cost
        row[f"cost_{kind}"] = float(cost)
        row[f"saving_{kind}"] = float(cost - sol.social_cost)
    if mechanism:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ApproximateIncentivesWarning)
            outcome = run_vcg(scenario, solver=solver, admm_config=admm_config)
        row["station_budget"] = float(outcome.station_budget)
        row["payments"] = [float(x) for x in outcome.payments]
        row["utilities"] = [float(x) for x in outcome.utilities]
    return row


def run_seed(seed: int, run: int) -> int:
    """Scenario seed of one run; shared by every grid point so points are compared on equal draws."""
    return int(np.random.SeedSequence([seed, run]).generate_state(1)[0])


@dataclass
class ExperimentResult:
    sweep: dict
    runs: int
    seed: int
    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def scalar_columns(self) -> list[str]:
        cols = []
        for row in self.rows:
            for key, value in row.items():
                if key not in cols and not isinstance(value, list):
                    cols.append(key)
        return cols

    def to_csv(self) -> str:
        return _csv(self.rows, self.scalar_columns())

    def aggregates_csv(self) -> str:
        cols = []
        for row in self.aggregates:
            cols += [k for k in row if k not in cols]
        return _csv(self.aggregates, cols)

    def to_dict(self) -> dict:
        return {"config": self.config, "seed": self.seed, "runs": self.runs, "sweep": self.sweep,
                "rows": self.rows, "aggregates": self.aggregates}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentResult":
        try:
            return cls(data["sweep"], data["runs"], data["seed"], data["rows"], data["aggregates"], data["config"])
        except KeyError as exc:
            raise InputError(f"experiment document lacks {exc.args[0]!r}") from None


def _csv(rows, columns):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _grid(sweep: dict):
    keys = list(sweep)
    for values in itertools.product(*(list(sweep[k]) for k in keys)):
        yield dict(zip(keys, values))


def aggregate(rows: list, keys: Sequence[str]) -> list[dict]:
    """Mean and population standard deviation of every numeric metric per grid point."""
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)
    out = []
    for point, members in groups.items():
        agg = dict(zip(keys, point))
        agg["runs"] = len(members)
        for col in members[0]:
            if col in keys or col in ("run", "seed") or isinstance(members[0][col], (list, str)):
                continue
            values = np.array([float(m[col]) for m in members])
            agg[f"{col}_mean"] = float(values.mean())
            agg[f"{col}_std"] = float(values.std())
        out.append(agg)
    return out


def run_experiment(bundle: DatasetBundle, station_config: StationConfig, sweep: dict | None = None,
                   runs: int = 20, seed: int = 0, solver: str = "exact", admm_config: AdmmConfig | None = None,
                   baselines: Sequence[str] = (), mechanism: bool = False) -> ExperimentResult:
    """Run ``runs`` seeded scenarios at every point of the parameter grid ``sweep``.

    Grid keys name :class:`StationConfig` fields. Errors are re-raised with
    the run, its seed and the grid point attached.
    """
    if runs < 1:
        raise InputError("runs must be >= 1")
    sweep = dict(sweep or {})
    for key, values in sweep.items():
        if not hasattr(station_config, key):
            raise InputError(f"cannot sweep unknown station setting {key!r}")
        if not list(values):
            raise InputError(f"sweep over {key!r} has no values")
    for kind in baselines:
        if kind not in BASELINES:
            raise InputError(f"unknown baseline {kind!r}; expected one of {', '.join(BASELINES)}")

    rows = []
    for point in _grid(sweep):
        config = replace(station_config, **point)
        for run in range(runs):
            scenario_seed = run_seed(seed, run)
            try:
                scenario = sample_scenario(bundle, config, scenario_seed)
                metrics = run_metrics(scenario, solver, admm_config, baselines, mechanism)
            except V2GError as exc:
                where = f"run {run} (seed {scenario_seed}) at {point or 'base config'}: {exc}"
                if isinstance(exc, SolverError):
                    raise SolverError(where, exc.diagnostics) from exc
                raise InputError(where) from exc
            rows.append({**point, "run": run, "seed": scenario_seed, **metrics})
    return ExperimentResult(sweep, runs, seed, rows, aggregate(rows, list(sweep)))

