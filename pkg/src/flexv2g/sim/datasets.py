"""CSV ingestion of the four sampling datasets.

Schemas (one header line, then data rows):

* prices, one file per day: ``interval_index,price_usd_per_kwh`` with
  exactly T rows indexed 0..T-1;
* departures: ``disconnect_hour`` (clock hours, e.g. ``17.25``) or
  ``disconnect_interval`` (interval index);
* SoC pairs: ``initial_soc_kwh,desired_soc_kwh``;
* inflexibility: ``alpha_usd_per_h2``.

Every rejected row is reported as ``file:line: reason``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import InputError

PRICE_HEADER = ["interval_index", "price_usd_per_kwh"]
SOC_HEADER = ["initial_soc_kwh", "desired_soc_kwh"]
ALPHA_HEADER = ["alpha_usd_per_h2"]
ALPHA_SETS = ("survey", "bimodal")


@dataclass
class DatasetPaths:
    prices: list
    disconnects: Path
    soc_pairs: Path
    alphas: Path


@dataclass
class DatasetBundle:
    price_days: list
    disconnect_samples: np.ndarray
    soc_pairs: np.ndarray
    alpha_samples: np.ndarray
    horizon: int
    start_hour: float = 10.0
    interval_hours: float = 0.25


def data_dir() -> Path:
    return Path(str(resources.files("flexv2g") / "data"))


def bundled_paths(alphas: str = "survey") -> DatasetPaths:
    """Paths of the synthetic datasets shipped with the package."""
    if alphas not in ALPHA_SETS:
        raise InputError(f"unknown bundled alpha set {alphas!r}; expected one of {', '.join(ALPHA_SETS)}")
    root = data_dir()
    return DatasetPaths(sorted((root / "prices").glob("*.csv")), root / "disconnects.csv",
                        root / "soc_pairs.csv", root / f"alpha_{alphas}.csv")


def _rows(path: Path, headers: Sequence[Sequence[str]]):
    """Yield ``(line_number, header, row)`` for the data rows of a CSV file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    lines = list(csv.reader(text.splitlines()))
    if not lines or not any(lines):
        raise InputError(f"{path}: file is empty")
    header = [h.strip() for h in lines[0]]
    if header not in [list(h) for h in headers]:
        expected = " or ".join(",".join(h) for h in headers)
        raise InputError(f"{path}:1: expected header {expected}, got {','.join(header)}")
    found = False
    for lineno, row in enumerate(lines[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        found = True
        yield lineno, header, row
    if not found:
        raise InputError(f"{path}: no data rows")


def _number(path, lineno, text, name):
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"{path}:{lineno}: {name} is not a number: {text.strip()!r}") from None
    if not math.isfinite(value):
        raise InputError(f"{path}:{lineno}: {name} must be finite")
    return value


def load_price_day(path, horizon: int) -> np.ndarray:
    prices = []
    for lineno, _, (idx, price) in _rows(path, [PRICE_HEADER]):
        index = _number(path, lineno, idx, "interval_index")
        if index != len(prices):
            raise InputError(f"{path}:{lineno}: expected interval_index {len(prices)}, got {idx.strip()}")
        prices.append(_number(path, lineno, price, "price_usd_per_kwh"))
    if len(prices) != horizon:
        raise InputError(f"{path}: expected {horizon} price rows, got {len(prices)}")
    return np.array(prices)


def load_disconnects(path, horizon: int, start_hour: float, interval_hours: float) -> np.ndarray:
    out = []
    for lineno, header, (value,) in _rows(path, [["disconnect_hour"], ["disconnect_interval"]]):
        x = _number(path, lineno, value, header[0])
        index = round((x - start_hour) / interval_hours) if header[0] == "disconnect_hour" else x
        if index != int(index) or not 0 <= index <= horizon:
            raise InputError(f"{path}:{lineno}: departure {value.strip()} falls outside intervals 0..{horizon}")
        out.append(int(index))
    return np.array(out, dtype=int)


def load_soc_pairs(path) -> np.ndarray:
    out = []
    for lineno, _, (a, b) in _rows(path, [SOC_HEADER]):
        initial = _number(path, lineno, a, "initial_soc_kwh")
        desired = _number(path, lineno, b, "desired_soc_kwh")
        if not 0 <= initial <= desired:
            raise InputError(f"{path}:{lineno}: need 0 <= initial_soc_kwh <= desired_soc_kwh, got {initial}, {desired}")
        out.append((initial, desired))
    return np.array(out)


def load_alphas(path) -> np.ndarray:
    out = []
    for lineno, _, (a,) in _rows(path, [ALPHA_HEADER]):
        alpha = _number(path, lineno, a, "alpha_usd_per_h2")
        if alpha < 0:
            raise InputError(f"{path}:{lineno}: alpha_usd_per_h2 must be >= 0, got {alpha}")
        out.append(alpha)
    return np.array(out)


def load_datasets(paths: DatasetPaths | None = None, horizon: int = 48, start_hour: float = 10.0,
                  interval_hours: float = 0.25) -> DatasetBundle:
    """Parse and validate a dataset bundle (the bundled synthetic one by default)."""
    paths = paths or bundled_paths()
    price_files = [paths.prices] if isinstance(paths.prices, (str, Path)) else list(paths.prices)
    if not price_files:
        raise InputError("no price files given")
    return DatasetBundle(
        price_days=[load_price_day(p, horizon) for p in price_files],
        disconnect_samples=load_disconnects(paths.disconnects, horizon, start_hour, interval_hours),
        soc_pairs=load_soc_pairs(paths.soc_pairs),
        alpha_samples=load_alphas(paths.alphas),
        horizon=horizon,
        start_hour=start_hour,
        interval_hours=interval_hours,
    )
