"""Assembly of the fixed-disconnection-time convex programs.

Once every disconnection time is fixed, the scheduling problem is a convex
QP in the power profiles. Each EV contributes a block of variables:

* ``charge[t]``, ``discharge[t]`` for the active intervals ``t < tau``, so the
  profile is ``charge - discharge`` and wear is linear in their sum;
* ``shortfall`` >= max(0, desired_soc - final_soc), priced quadratically.

Blocks are composed into either the per-EV augmented subproblem or the joint
problem with the bus limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EVStaticParams, EVType

SNAP = 1e-8


class QPBuilder:
    """Incrementally collects variables and inequality rows of a QP."""

    def __init__(self):
        self.n = 0
        self._lb, self._ub, self._q, self._pdiag = [], [], [], []
        self._rows = []

    def var(self, size, lb, ub, cost=0.0, quad=0.0):
        idx = np.arange(self.n, self.n + size)
        self.n += size
        for store, value in ((self._lb, lb), (self._ub, ub), (self._q, cost), (self._pdiag, quad)):
            store.append(np.broadcast_to(np.asarray(value, dtype=float), (size,)))
        return idx

    def rows(self, terms, rhs):
        """Add ``sum(coef @ x[idx] for idx, coef in terms) <= rhs``."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        self._rows.append(([(idx, np.atleast_2d(coef)) for idx, coef in terms if idx.size], rhs))

    def build(self):
        cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0)  # noqa: E731
        m = sum(rhs.size for _, rhs in self._rows)
        G = np.zeros((m, self.n))
        h = np.zeros(m)
        r = 0
        for terms, rhs in self._rows:
            for idx, coef in terms:
                G[r:r + rhs.size, idx] += coef
            h[r:r + rhs.size] = rhs
            r += rhs.size
        return np.diag(cat(self._pdiag)), cat(self._q), G, h, cat(self._lb), cat(self._ub)


@dataclass
class EVBlock:
    active: int
    charge: np.ndarray
    discharge: np.ndarray
    shortfall: np.ndarray

    def net_terms(self, scale=1.0):
        """Terms expressing ``scale * u[:active]`` for :meth:`QPBuilder.rows`."""
        eye = np.eye(self.active) * scale
        return [(self.charge, eye), (self.discharge, -eye)]

    def extract(self, x, horizon):
        charge = np.zeros(horizon)
        discharge = np.zeros(horizon)
        charge[:self.active] = x[self.charge]
        if self.discharge.size:
            discharge[:self.active] = x[self.discharge]
        charge[np.abs(charge) < SNAP] = 0.0
        discharge[np.abs(discharge) < SNAP] = 0.0
        return charge, discharge


def add_ev_block(builder: QPBuilder, params: EVStaticParams, ev_type: EVType, tau: int,
                 prices, interval_hours: float) -> EVBlock:
    k = int(tau)
    dt = interval_hours
    p = np.asarray(prices, dtype=float)[:k]
    charge = builder.var(k, 0.0, params.max_charge_rate, dt * (params.wear_cost + p))
    if params.max_discharge_rate > 0:
        discharge = builder.var(k, 0.0, params.max_discharge_rate, dt * (params.wear_cost - p))
    else:
        discharge = np.zeros(0, dtype=int)
    block = EVBlock(k, charge, discharge, np.zeros(0, dtype=int))
    if k:
        cum = params.efficiency * dt * np.tril(np.ones((k, k)))
        builder.rows([(charge, cum), (discharge, -cum)], np.full(k, params.battery_capacity - params.initial_soc))
        builder.rows([(charge, -cum), (discharge, cum)], np.full(k, params.initial_soc))
    if ev_type.soc_inflexibility > 0:
        block.shortfall = builder.var(1, 0.0, np.inf, 0.0, 2.0 * ev_type.soc_inflexibility)
        gain = params.efficiency * dt * np.ones((1, k))
        builder.rows([(charge, -gain), (discharge, gain), (block.shortfall, -np.ones((1, 1)))],
                     params.initial_soc - ev_type.desired_soc)
    return block
