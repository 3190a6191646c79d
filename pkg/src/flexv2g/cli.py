"""Command-line front end.

Exit codes: 0 success, 1 bad input (including usage errors and failed
validation), 2 solver failure. Scenario and configuration arguments that
do not name an existing file are looked up among the bundled examples
(``two_ev_toy``, ``battery_donor``, ``congestion_sweep``, ...). Outputs go to ``--out``/``--out-dir`` or,
by default, to ``$FLEXV2G_OUT_DIR`` (the current directory if unset).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

from .admm import AdmmConfig
from .errors import InputError, SolverError, V2GError
from .exact import solve_exact
from .mechanism import ApproximateIncentivesWarning, run_vcg
from .model import check_feasible
from .serialization import (dumps, load_document, load_reports, load_scenario, outcome_to_dict, soc_csv,
                            solution_to_dict, write_atomic)
from .sim.config import ExperimentConfig
from .sim.datasets import data_dir
from .solve import SOLVERS, solve_schedule
from .subproblem import DEFAULT_QP_TOL

OUT_DIR_ENV = "FLEXV2G_OUT_DIR"
EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _bundled(name: str, folder: str, suffix: str) -> Path:
    """A path as given, or the bundled file of that name when no such path exists."""
    path = Path(name)
    if path.exists():
        return path
    candidate = data_dir() / folder / (path.name if path.suffix else path.name + suffix)
    return candidate if candidate.exists() else path


def _default_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV) or ".")


def _outputs(args, stem: str, suffix: str) -> Path:
    return Path(args.out) if args.out else _default_dir() / f"{stem}_{suffix}.json"


def _admm_config(args) -> AdmmConfig:
    kwargs = {"seed": args.seed}
    if args.nu is not None:
        kwargs["penalty"] = args.nu
    if args.max_sweeps is not None:
        kwargs["max_sweeps"] = args.max_sweeps
    if args.tol is not None:
        kwargs["primal_tolerance"] = args.tol
    return AdmmConfig(**kwargs)


def _solve(args, scenario):
    if args.solver == "exact":
        return solve_exact(scenario, tol=args.tol or DEFAULT_QP_TOL)
    return solve_schedule(scenario, "admm", _admm_config(args))


def cmd_schedule(args) -> int:
    scenario, _ = load_scenario(_bundled(args.scenario, "scenarios", ".json"))
    solution = _solve(args, scenario)
    report = check_feasible(scenario, solution.allocations)
    if not report.ok:
        raise SolverError(f"{args.solver} returned an infeasible schedule\n{report.format()}")
    out = _outputs(args, Path(args.scenario).stem, "schedule")
    write_atomic(out, dumps(solution_to_dict(solution)))
    soc_path = out.with_name(out.stem + "_soc.csv")
    write_atomic(soc_path, soc_csv(scenario, solution.allocations))
    written = [out, soc_path]
    if not args.no_plots:
        from .plotting import plot_schedule
        written.append(plot_schedule(scenario, solution.allocations, out.with_name(out.stem + "_soc.png")))
    print(f"social cost {solution.social_cost:.6f} $  disconnect times {solution.disconnect_times}  "
          f"converged {solution.converged}  sweeps {solution.sweeps_used}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_vcg(args) -> int:
    scenario, _ = load_scenario(_bundled(args.scenario, "scenarios", ".json"))
    reports = load_reports(args.reports, scenario.n_ev) if args.reports else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ApproximateIncentivesWarning)
        if args.solver == "admm":
            print("warning: ADMM payments carry only approximate incentive guarantees", file=sys.stderr)
        outcome = run_vcg(scenario, reports, args.solver, _admm_config(args))
    out = _outputs(args, Path(args.scenario).stem, "vcg")
    write_atomic(out, dumps(outcome_to_dict(outcome)))
    for n, (pay, util, ok) in enumerate(zip(outcome.payments, outcome.utilities, outcome.ir_satisfied)):
        print(f"EV {n}: payment {pay:+.6f} $  utility {util:.6f} $  IR {'ok' if ok else 'VIOLATED'}")
    print(f"station budget {outcome.station_budget:+.6f} $")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    path = _bundled(args.config, "configs", ".toml")
    config = ExperimentConfig.from_dict(load_document(path), path.parent)
    if args.seed is not None:
        config.seed = args.seed
    if args.runs is not None:
        config.runs = args.runs
    if args.solver is not None:
        config.solver = args.solver
    config.check()
    result = config.run()
    out_dir = Path(args.out_dir) if args.out_dir else _default_dir()
    stem = path.stem
    written = [out_dir / f"{stem}.json", out_dir / f"{stem}_runs.csv", out_dir / f"{stem}_summary.csv"]
    write_atomic(written[0], dumps(result.to_dict()))
    write_atomic(written[1], result.to_csv())
    write_atomic(written[2], result.aggregates_csv())
    if not args.no_plots and result.sweep:
        from .plotting import plot_sweep
        written.append(plot_sweep(result.aggregates, result.sweep, out_dir / f"{stem}_summary.png"))
    for row in result.aggregates:
        point = ", ".join(f"{k}={row[k]}" for k in result.sweep) or "base"
        print(f"{point}: cost {row['social_cost_mean']:.4f} $  delay {row['avg_delay_min_mean']:.2f} min  "
              f"v2g {row['v2g_energy_kwh_mean']:.4f} kWh  ({row['runs']} runs)")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario, allocations = load_scenario(_bundled(args.scenario, "scenarios", ".json"))
    print(f"scenario ok: {scenario.n_ev} EVs, {scenario.horizon} intervals of {scenario.interval_hours} h")
    if allocations is None:
        return EXIT_OK
    for n, a in enumerate(allocations):
        if a.power_profile.size != scenario.horizon:
            raise InputError(f"allocations[{n}]: profile has {a.power_profile.size} entries, "
                             f"expected {scenario.horizon}")
    report = check_feasible(scenario, allocations)
    print(report.format())
    return EXIT_OK if report.ok else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flexv2g", description="Flexible V2G scheduling and VCG payments for a charging station.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_flags(p):
        p.add_argument("--solver", choices=SOLVERS, default="exact")
        p.add_argument("--nu", type=float, help="ADMM penalty parameter")
        p.add_argument("--max-sweeps", type=int, help="ADMM sweep limit")
        p.add_argument("--tol", type=float, help="ADMM bus-residual tolerance (kW); QP tolerance for exact")
        p.add_argument("--seed", type=int, default=0, help="ADMM sweep-order seed")
        p.add_argument("--out", help="output JSON path")

    p = sub.add_parser("schedule", help="solve a scenario file")
    p.add_argument("scenario")
    solver_flags(p)
    p.add_argument("--no-plots", action="store_true", help="skip the SoC figure")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("vcg", help="VCG allocation, payments and IR audit")
    p.add_argument("scenario")
    p.add_argument("reports", nargs="?", help="reported types (default: truthful)")
    solver_flags(p)
    p.set_defaults(func=cmd_vcg)

    p = sub.add_parser("experiment", help="run a seeded parameter sweep")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--solver", choices=SOLVERS)
    p.add_argument("--out-dir")
    p.add_argument("--no-plots", action="store_true", help="skip the summary figure")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validate", help="check a scenario file and any embedded allocations")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        for key, value in exc.diagnostics.items():
            print(f"  {key}: {value}", file=sys.stderr)
        return EXIT_SOLVER
    except (V2GError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
