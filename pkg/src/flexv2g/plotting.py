"""Matplotlib figures written next to the CSV/JSON outputs.

Only the non-interactive Agg backend is used, so figures render the same
on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import StationScenario, soc_trajectory, total_load  # noqa: E402

SWEEP_METRICS = {
    "avg_delay_min": "average delay (min)",
    "v2g_energy_kwh": "discharged energy (kWh)",
    "social_cost": "social cost ($)",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_schedule(scenario: StationScenario, allocations, path) -> Path:
    """SoC trajectories with desired departures, and power profiles against the bus limit."""
    dt = scenario.interval_hours
    T = scenario.horizon
    hours = np.arange(T + 1) * dt
    fig, (ax_soc, ax_pow) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for n, ((params, ev_type), a) in enumerate(zip(scenario.fleet, allocations)):
        soc = soc_trajectory(params, a.power_profile, dt)
        line, = ax_soc.plot(hours[:a.disconnect_time + 1], soc[:a.disconnect_time + 1], label=f"EV {n}")
        ax_soc.plot(ev_type.desired_disconnect * dt, ev_type.desired_soc, "x", color=line.get_color())
        ax_pow.step(hours[:-1], a.power_profile, where="post", color=line.get_color())
    ax_pow.step(hours[:-1], total_load(allocations), where="post", color="black", lw=2, label="bus load")
    for sign in (1, -1):
        ax_pow.axhline(sign * scenario.bus_capacity, color="grey", ls="--", lw=1)
    ax_soc.set_ylabel("state of charge (kWh)")
    ax_soc.legend(loc="best", fontsize="small")
    ax_pow.set_ylabel("power (kW)")
    ax_pow.set_xlabel("hours since start")
    ax_pow.legend(loc="best", fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(aggregates: list, sweep: dict, path, metrics=None) -> Path | None:
    """Mean +- std of each metric against the first swept setting, one line per value of the second."""
    if not sweep:
        return None
    keys = list(sweep)
    x_key = keys[0]
    group_key = keys[1] if len(keys) > 1 else None
    if metrics is None:
        metrics = dict(SWEEP_METRICS)
        for col in (aggregates[0] if aggregates else {}):
            if col.startswith("saving_") and col.endswith("_mean"):
                metrics[col[:-5]] = f"saving vs {col[7:-5]} ($)"
    fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3.5), squeeze=False)
    groups = sorted({row.get(group_key) for row in aggregates}, key=str) if group_key else [None]
    for ax, (metric, label) in zip(axes[0], metrics.items()):
        for g in groups:
            rows = sorted((r for r in aggregates if group_key is None or r[group_key] == g), key=lambda r: r[x_key])
            if not rows or f"{metric}_mean" not in rows[0]:
                continue
            x = [r[x_key] for r in rows]
            ax.errorbar(x, [r[f"{metric}_mean"] for r in rows], yerr=[r[f"{metric}_std"] for r in rows],
                        marker="o", capsize=3, label=None if g is None else f"{group_key}={g}")
        ax.set_xlabel(x_key)
        ax.set_ylabel(label)
        if group_key:
            ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_misreport(surface, path) -> Path:
    """Heat map of an EV's utility over reported (desired time, inflexibility)."""
    taus = sorted({p.report.desired_disconnect for p in surface.points})
    alphas = sorted({p.report.temporal_inflexibility for p in surface.points})
    grid = np.full((len(alphas), len(taus)), np.nan)
    for p in surface.points:
        grid[alphas.index(p.report.temporal_inflexibility), taus.index(p.report.desired_disconnect)] = p.utility
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(taus)), [str(t) for t in taus])
    ax.set_yticks(range(len(alphas)), [f"{a:g}" for a in alphas])
    ax.set_xlabel("reported desired disconnection (interval)")
    ax.set_ylabel("reported inflexibility ($/h^2)")
    ax.set_title(f"EV {surface.ev} utility" + (" with payments" if surface.with_payments else ""))
    fig.colorbar(im, ax=ax, label="utility ($)")
    fig.tight_layout()
    return _save(fig, path)
