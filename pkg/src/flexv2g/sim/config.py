"""Experiment configuration files (TOML or JSON).

A configuration has top-level ``runs``, ``seed``, ``solver``,
``baselines`` and ``mechanism`` keys plus four tables:

* ``[station]``: :class:`StationConfig` overrides;
* ``[sweep]``: station settings mapped to lists of values;
* ``[datasets]``: ``alphas`` naming a bundled set (``survey``/``bimodal``)
  or any of ``prices``/``disconnects``/``soc_pairs``/``alphas`` as paths
  relative to the configuration file, and ``start_hour``,
  ``interval_hours`` and ``horizon`` describing the data day (default
  10:00, 15 minutes, 48 intervals); the station may use a window of it;
* ``[admm]``: ADMM settings.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..admm import AdmmConfig
from ..errors import InputError
from ..solve import SOLVERS
from .datasets import ALPHA_SETS, DatasetPaths, bundled_paths, load_datasets
from .experiment import BASELINES, ExperimentResult, run_experiment
from .scenarios import StationConfig

DAY_DEFAULTS = {"horizon": 48, "start_hour": 10.0, "interval_hours": 0.25}
TOP_KEYS = {"runs", "seed", "solver", "baselines", "mechanism", "station", "sweep", "datasets", "admm"}


@dataclass
class ExperimentConfig:
    station: StationConfig = field(default_factory=StationConfig)
    sweep: dict = field(default_factory=dict)
    runs: int = 20
    seed: int = 0
    solver: str = "admm"
    baselines: tuple = ()
    mechanism: bool = False
    datasets: dict = field(default_factory=dict)
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise InputError("experiment config must be a table")
        unknown = set(doc) - TOP_KEYS
        if unknown:
            raise InputError(f"unknown experiment settings: {', '.join(sorted(unknown))}")
        admm_doc = doc.get("admm", {})
        admm_known = {f.name for f in fields(AdmmConfig)}
        if set(admm_doc) - admm_known:
            raise InputError(f"unknown admm settings: {', '.join(sorted(set(admm_doc) - admm_known))}")
        try:
            station = StationConfig.from_dict(doc.get("station", {}))
            admm = AdmmConfig(**admm_doc)
        except TypeError as exc:
            raise InputError(str(exc)) from None
        sweep = doc.get("sweep", {})
        if not isinstance(sweep, dict) or not all(isinstance(v, list) for v in sweep.values()):
            raise InputError("sweep must map station settings to lists of values")
        config = cls(station, sweep, doc.get("runs", 20), doc.get("seed", 0), doc.get("solver", "admm"),
                     tuple(doc.get("baselines", ())), bool(doc.get("mechanism", False)),
                     dict(doc.get("datasets", {})), admm, Path(base_dir))
        config.check()
        return config

    def check(self) -> None:
        if isinstance(self.runs, bool) or not isinstance(self.runs, int) or self.runs < 1:
            raise InputError(f"runs must be an integer >= 1, got {self.runs!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise InputError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.solver not in SOLVERS:
            raise InputError(f"unknown solver {self.solver!r}; expected one of {', '.join(SOLVERS)}")
        for kind in self.baselines:
            if kind not in BASELINES:
                raise InputError(f"unknown baseline {kind!r}; expected one of {', '.join(BASELINES)}")
        unknown = set(self.datasets) - {"prices", "disconnects", "soc_pairs", "alphas"} - set(DAY_DEFAULTS)
        if unknown:
            raise InputError(f"unknown dataset entries: {', '.join(sorted(unknown))}")

    def dataset_paths(self) -> DatasetPaths:
        alphas = self.datasets.get("alphas", "survey")
        if alphas in ALPHA_SETS:
            paths = bundled_paths(alphas)
        else:
            paths = bundled_paths()
            paths.alphas = self.base_dir / alphas
        for key in ("disconnects", "soc_pairs"):
            if key in self.datasets:
                setattr(paths, key, self.base_dir / self.datasets[key])
        if "prices" in self.datasets:
            prices = self.datasets["prices"]
            prices = [prices] if isinstance(prices, str) else prices
            paths.prices = [self.base_dir / p for p in prices]
        return paths

    def to_dict(self) -> dict:
        return {"runs": self.runs, "seed": self.seed, "solver": self.solver, "baselines": list(self.baselines),
                "mechanism": self.mechanism, "station": self.station.to_dict(), "sweep": self.sweep,
                "datasets": self.datasets, "admm": asdict(self.admm)}

    def run(self) -> ExperimentResult:
        day = {k: self.datasets.get(k, v) for k, v in DAY_DEFAULTS.items()}
        bundle = load_datasets(self.dataset_paths(), **day)
        result = run_experiment(bundle, self.station, self.sweep, self.runs, self.seed, self.solver, self.admm,
                                self.baselines, self.mechanism)
        result.config = self.to_dict()
        return result
