"""JSON/TOML documents for scenarios, reports, schedules and mechanism outcomes.

Floats are written with Python's shortest round-trip repr, so every
document emitted here parses back to identical values.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .admm import SweepRecord
from .errors import InputError
from .mechanism import MechanismOutcome
from .model import Allocation, EVStaticParams, EVType, ScheduleSolution, StationScenario, soc_trajectory
from .sim.datasets import load_price_day

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PARAM_FIELDS = [f.name for f in fields(EVStaticParams)]
TYPE_FIELDS = [f.name for f in fields(EVType)]


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def load_document(path) -> dict:
    """Parse a JSON or TOML file (chosen by extension)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(raw.decode())
        return json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: not valid {'TOML' if path.suffix.lower() == '.toml' else 'JSON'}: {exc}") from exc


def _record(data, names, what):
    if not isinstance(data, dict):
        raise InputError(f"{what} must be a table of fields")
    missing = [k for k in names if k not in data]
    if missing:
        raise InputError(f"{what} lacks {', '.join(missing)}")
    return {k: data[k] for k in names}


def ev_from_dict(data: dict, n: int = 0):
    what = f"fleet[{n}]"
    rec = _record(data, PARAM_FIELDS + TYPE_FIELDS, what)
    extra = set(data) - set(rec)
    if extra:
        raise InputError(f"{what}: unknown fields {', '.join(sorted(extra))}")
    try:
        return EVStaticParams(**{k: rec[k] for k in PARAM_FIELDS}), type_from_dict(rec, what)
    except InputError as exc:
        raise InputError(f"{what}: {exc}") from None


def type_from_dict(data: dict, what: str = "report") -> EVType:
    return EVType(**_record(data, TYPE_FIELDS, what))


def scenario_to_dict(scenario: StationScenario) -> dict:
    return {
        "horizon": scenario.horizon,
        "interval_hours": scenario.interval_hours,
        "bus_capacity": scenario.bus_capacity,
        "prices": [float(p) for p in scenario.prices],
        "fleet": [{**asdict(p), **asdict(t)} for p, t in scenario.fleet],
    }


def scenario_from_dict(doc: dict, base_dir=None) -> StationScenario:
    """Build a scenario; ``prices`` may be a list or the path of a price CSV (relative to ``base_dir``)."""
    rec = _record(doc, ["horizon", "interval_hours", "bus_capacity", "prices", "fleet"], "scenario")
    prices = rec["prices"]
    if isinstance(prices, str):
        prices = load_price_day(Path(base_dir or ".") / prices, rec["horizon"])
    fleet = rec["fleet"]
    if not isinstance(fleet, list):
        raise InputError("fleet must be an array of EV records")
    try:
        prices = np.asarray(prices, dtype=float)
    except (TypeError, ValueError):
        raise InputError("prices must be an array of numbers") from None
    return StationScenario(rec["horizon"], rec["interval_hours"], prices, rec["bus_capacity"],
                           [ev_from_dict(ev, n) for n, ev in enumerate(fleet)])


def allocation_to_dict(a: Allocation) -> dict:
    return {"disconnect_time": a.disconnect_time, "power_profile": [float(x) for x in a.power_profile]}


def allocation_from_dict(data: dict, n: int = 0) -> Allocation:
    rec = _record(data, ["disconnect_time", "power_profile"], f"allocations[{n}]")
    return Allocation(rec["disconnect_time"], rec["power_profile"])


def load_scenario(path):
    """Scenario file to ``(scenario, allocations or None)``."""
    path = Path(path)
    doc = load_document(path)
    scenario = scenario_from_dict(doc, path.parent)
    allocs = doc.get("allocations")
    if allocs is not None:
        allocs = [allocation_from_dict(a, n) for n, a in enumerate(allocs)]
        if len(allocs) != scenario.n_ev:
            raise InputError(f"{path}: {len(allocs)} allocations for {scenario.n_ev} EVs")
    return scenario, allocs


def load_reports(path, n_ev: int) -> list[EVType]:
    doc = load_document(path)
    reports = doc.get("reports") if isinstance(doc, dict) else doc
    if not isinstance(reports, list):
        raise InputError(f"{path}: expected an array of reports under 'reports'")
    if len(reports) != n_ev:
        raise InputError(f"{path}: {len(reports)} reports for {n_ev} EVs")
    out = []
    for n, r in enumerate(reports):
        try:
            out.append(type_from_dict(r, f"reports[{n}]"))
        except InputError as exc:
            raise InputError(f"{path}: reports[{n}]: {exc}") from None
    return out


def solution_to_dict(sol: ScheduleSolution) -> dict:
    return {
        "solver": sol.solver,
        "social_cost": sol.social_cost,
        "converged": sol.converged,
        "sweeps_used": sol.sweeps_used,
        "primal_residual": sol.primal_residual,
        "evaluations": sol.evaluations,
        "allocations": [allocation_to_dict(a) for a in sol.allocations],
        "trace": [r._asdict() for r in sol.trace],
    }


def solution_from_dict(doc: dict) -> ScheduleSolution:
    rec = _record(doc, ["solver", "social_cost", "converged", "sweeps_used", "primal_residual", "evaluations",
                        "allocations", "trace"], "solution")
    return ScheduleSolution(
        allocations=[allocation_from_dict(a, n) for n, a in enumerate(rec["allocations"])],
        social_cost=rec["social_cost"],
        primal_residual=rec["primal_residual"],
        sweeps_used=rec["sweeps_used"],
        converged=rec["converged"],
        trace=[SweepRecord(**r) for r in rec["trace"]],
        solver=rec["solver"],
        evaluations=rec["evaluations"],
    )


def outcome_to_dict(out: MechanismOutcome) -> dict:
    return {
        "solver": out.solver,
        "social_cost": out.social_cost,
        "station_budget": out.station_budget,
        "payments": [float(x) for x in out.payments],
        "utilities": [float(x) for x in out.utilities],
        "outside_options": [float(x) for x in out.outside_options],
        "ir_satisfied": [bool(x) for x in out.ir_satisfied],
        "allocations": [allocation_to_dict(a) for a in out.allocations],
    }


def outcome_from_dict(doc: dict) -> MechanismOutcome:
    rec = _record(doc, ["solver", "social_cost", "station_budget", "payments", "utilities", "outside_options",
                        "ir_satisfied", "allocations"], "outcome")
    return MechanismOutcome(
        allocations=[allocation_from_dict(a, n) for n, a in enumerate(rec["allocations"])],
        payments=np.array(rec["payments"], dtype=float),
        utilities=np.array(rec["utilities"], dtype=float),
        outside_options=np.array(rec["outside_options"], dtype=float),
        ir_satisfied=np.array(rec["ir_satisfied"], dtype=bool),
        station_budget=rec["station_budget"],
        social_cost=rec["social_cost"],
        solver=rec["solver"],
    )


def soc_csv(scenario: StationScenario, allocations) -> str:
    """Long-format table ``ev,interval,hour,soc_kwh,power_kw``; power is blank at the final boundary."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ev", "interval", "hour", "soc_kwh", "power_kw"])
    dt = scenario.interval_hours
    for n, ((params, _), a) in enumerate(zip(scenario.fleet, allocations)):
        soc = soc_trajectory(params, a.power_profile, dt)
        for t, s in enumerate(soc):
            power = repr(float(a.power_profile[t])) if t < scenario.horizon else ""
            w.writerow([n, t, repr(t * dt), repr(float(s)), power])
    return buf.getvalue()
