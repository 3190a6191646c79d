"""Generator for the bundled synthetic datasets.

The real price, departure, SoC and preference datasets used for station
studies are not redistributable, so the package ships small synthetic
stand-ins with the same schema and the summary statistics that matter:

* price days over 10:00-22:00 at 15 minutes, each with a midday trough at
  exactly 0.13 $/kWh and an evening peak at exactly 0.22 $/kWh;
* desired departures clustered between 16:15 and 18:45;
* (initial, desired) SoC pairs with gaps of 8-16.5 kWh on a 40 kWh battery;
* temporal inflexibility centred near 31 $/h^2 with most mass in 30-34, and
  a bimodal variant (half zeros, half doubled survey values).

Run ``python -m flexv2g.sim.synthetic DIR`` to regenerate the files.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

PRICE_MIN, PRICE_MAX = 0.13, 0.22
START_HOUR, INTERVAL_HOURS, HORIZON = 10.0, 0.25, 48
_SHAPE_HOURS = [10.0, 11.0, 12.5, 14.0, 15.0, 15.75, 16.25, 18.5, 20.0, 22.0]
_SHAPE_PRICES = [0.155, 0.14, 0.13, 0.135, 0.15, 0.2, 0.22, 0.22, 0.19, 0.17]


def price_day(rng: np.random.Generator) -> np.ndarray:
    hours = START_HOUR + INTERVAL_HOURS * (np.arange(HORIZON) + 0.5)
    shift = rng.uniform(-0.5, 0.5)
    base = np.interp(hours - shift, _SHAPE_HOURS, _SHAPE_PRICES)
    noisy = base + rng.normal(0.0, 0.004, HORIZON)
    scaled = (noisy - noisy.min()) / (noisy.max() - noisy.min())
    return np.round(PRICE_MIN + (PRICE_MAX - PRICE_MIN) * scaled, 5)


def disconnect_hours(rng, count):
    hours = np.clip(rng.normal(17.25, 0.6, count), 16.25, 18.75)
    return np.round(hours * 4) / 4


def soc_pairs(rng, count):
    initial = rng.uniform(5.0, 15.0, count)
    desired = initial + rng.uniform(8.0, 16.5, count)
    return np.round(initial, 2), np.round(desired, 2)


def survey_alphas(rng, count):
    core = 30.0 + 4.0 * rng.beta(1.5, 3.5, count)
    wide = rng.uniform(26.0, 37.0, count)
    return np.round(np.where(rng.random(count) < 0.9, core, wide), 2)


def write_fixtures(out_dir, seed: int = 2024, days: int = 6, samples: int = 60) -> None:
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    (out / "prices").mkdir(parents=True, exist_ok=True)
    for d in range(days):
        rows = "".join(f"{t},{p:.5f}\n" for t, p in enumerate(price_day(rng)))
        (out / "prices" / f"day_{d + 1:02d}.csv").write_text("interval_index,price_usd_per_kwh\n" + rows)
    hours = disconnect_hours(rng, samples)
    (out / "disconnects.csv").write_text("disconnect_hour\n" + "".join(f"{h:.2f}\n" for h in hours))
    initial, desired = soc_pairs(rng, samples)
    (out / "soc_pairs.csv").write_text("initial_soc_kwh,desired_soc_kwh\n"
                                       + "".join(f"{a:.2f},{b:.2f}\n" for a, b in zip(initial, desired)))
    alphas = survey_alphas(rng, 2 * samples)
    (out / "alpha_survey.csv").write_text("alpha_usd_per_h2\n" + "".join(f"{a:.2f}\n" for a in alphas))
    bimodal = np.concatenate([np.zeros(samples), 2.0 * alphas[:samples]])
    (out / "alpha_bimodal.csv").write_text("alpha_usd_per_h2\n" + "".join(f"{a:.2f}\n" for a in bimodal))


if __name__ == "__main__":
    write_fixtures(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "data")
