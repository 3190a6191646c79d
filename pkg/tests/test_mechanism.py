import warnings
from dataclasses import replace

import numpy as np
import pytest

from conftest import leaf, scenario
from flexv2g.admm import AdmmConfig
from flexv2g.errors import InputError
from flexv2g.exact import solve_exact
from flexv2g.mechanism import (ApproximateIncentivesWarning, default_report_grid, misreport_sweep,
                               outside_option_utility, run_vcg, vcg_allocation, vcg_payment)
from flexv2g.model import EVType, StationScenario, energy_cost, ev_cost, social_cost
from flexv2g.sim.scenarios import random_toy


def test_truthful_allocation_is_plain_schedule(two_ev_toy):
    allocs = vcg_allocation(two_ev_toy)
    expected = solve_exact(two_ev_toy).allocations
    for a, b in zip(allocs, expected):
        assert a.disconnect_time == b.disconnect_time
        np.testing.assert_allclose(a.power_profile, b.power_profile)


def test_prohibitive_report_pins_reported_time(congested_pair):
    reports = list(congested_pair.types)
    reports[0] = replace(reports[0], desired_disconnect=6, temporal_inflexibility=1e6)
    allocs = vcg_allocation(congested_pair, reports)
    assert allocs[0].disconnect_time == 6


def test_permuting_fleet_permutes_allocations(congested_pair):
    flipped = StationScenario(congested_pair.horizon, congested_pair.interval_hours, congested_pair.prices,
                              congested_pair.bus_capacity, congested_pair.fleet[::-1])
    forward = vcg_allocation(congested_pair)
    backward = vcg_allocation(flipped)[::-1]
    assert [a.disconnect_time for a in forward] == [a.disconnect_time for a in backward]
    assert social_cost(congested_pair, forward) == pytest.approx(social_cost(congested_pair, backward), abs=1e-7)


def test_report_count_checked(two_ev_toy):
    with pytest.raises(InputError):
        vcg_allocation(two_ev_toy, two_ev_toy.types[:1])


def test_single_ev_pays_its_energy(single_ev):
    allocs = vcg_allocation(single_ev)
    own = energy_cost(single_ev.prices, allocs[0].power_profile, single_ev.interval_hours)
    assert vcg_payment(single_ev, None, 0) == pytest.approx(own, abs=1e-9)
    out = run_vcg(single_ev)
    assert out.station_budget == pytest.approx(0.0, abs=1e-9)
    (params, ev_type), = single_ev.fleet
    assert out.utilities[0] == pytest.approx(-ev_cost(params, ev_type, allocs[0], 0.25) - own, abs=1e-9)


def test_donor_is_paid_by_the_station(battery_donor):
    assert vcg_payment(battery_donor, None, 0) < 0


def test_payments_match_hand_externality():
    # two identical EVs sharing a bus that cannot serve both by their desired time
    ev = (leaf(initial_soc=10.0), EVType(4, 14.0, 20.0, 10.0))
    sc = scenario([0.15, 0.14, 0.13, 0.13, 0.16, 0.18, 0.2, 0.19], 6.6, [ev, ev])
    full = solve_exact(sc).allocations
    dt = sc.interval_hours
    for n in range(2):
        m = 1 - n
        params, ev_type = sc.fleet[m]
        alone = solve_exact(sc.without(n)).allocations[0]
        with_n = ev_cost(params, ev_type, full[m], dt) + energy_cost(sc.prices, full[m].power_profile, dt)
        without_n = ev_cost(params, ev_type, alone, dt) + energy_cost(sc.prices, alone.power_profile, dt)
        expected = energy_cost(sc.prices, full[n].power_profile, dt) + with_n - without_n
        assert vcg_payment(sc, None, n) == pytest.approx(expected, abs=1e-7)


def test_admm_payments_warn(two_ev_toy):
    with pytest.warns(ApproximateIncentivesWarning):
        vcg_payment(two_ev_toy, None, 0, solver="admm", admm_config=AdmmConfig(max_sweeps=20))


def test_exact_payments_do_not_warn(two_ev_toy):
    with warnings.catch_warnings():
        warnings.simplefilter("error", ApproximateIncentivesWarning)
        vcg_payment(two_ev_toy, None, 0)


@pytest.mark.parametrize("initial,desired,beta,expected", [
    (12.0, 12.0, 10.0, 0.0),
    (10.0, 12.0, 10.0, -40.0),
    (5.0, 30.0, 0.0, 0.0),
])
def test_outside_option(initial, desired, beta, expected):
    assert outside_option_utility((leaf(initial_soc=initial), EVType(3, desired, 30.0, beta))) == \
        pytest.approx(expected)


@pytest.mark.parametrize("seed", range(4))
def test_run_vcg_invariants(seed):
    sc = random_toy(seed, 3, 6)
    out = run_vcg(sc)
    dt = sc.interval_hours
    assert out.ir_satisfied.all()
    for n, ((params, ev_type), a) in enumerate(zip(sc.fleet, out.allocations)):
        assert out.utilities[n] == pytest.approx(-ev_cost(params, ev_type, a, dt) - out.payments[n], abs=1e-12)
        assert out.payments[n] == pytest.approx(vcg_payment(sc, None, n), abs=1e-9)
    energy = sum(energy_cost(sc.prices, a.power_profile, dt) for a in out.allocations)
    assert out.station_budget == pytest.approx(out.payments.sum() - energy, abs=1e-9)
    # payments are transfers: they leave the allocation's social cost untouched
    assert out.social_cost == pytest.approx(social_cost(sc, out.allocations), abs=1e-12)
    assert out.social_cost == pytest.approx(solve_exact(sc).social_cost, abs=1e-9)


def test_default_grid_shape():
    grid = default_report_grid(EVType(5, 14.0, 30.0, 10.0), 12)
    assert len(grid) == 25
    assert {g.desired_disconnect for g in grid} == {1, 3, 5, 7, 9}
    assert {g.temporal_inflexibility for g in grid} == {7.5, 15.0, 30.0, 60.0, 120.0}
    assert all(g.desired_soc == 14.0 and g.soc_inflexibility == 10.0 for g in grid)
    clipped = default_report_grid(EVType(1, 14.0, 30.0, 10.0), 4)
    assert {g.desired_disconnect for g in clipped} == {0, 1, 3, 4}


def test_truth_only_grid_equals_vcg_utility(congested_pair):
    surface = misreport_sweep(congested_pair, 1, [congested_pair.types[1]])
    assert len(surface.points) == 1
    assert surface.points[0].utility == pytest.approx(run_vcg(congested_pair).utilities[1], abs=1e-9)


def test_truth_is_best_with_payments(congested_pair):
    surface = misreport_sweep(congested_pair, 0)
    truth = surface.utility_of(congested_pair.types[0])
    assert all(p.utility <= truth + 1e-4 for p in surface.points)


def test_overstating_inflexibility_pays_without_payments(congested_pair):
    truth_type = congested_pair.types[0]
    for energy_at_cost in (False, True):
        surface = misreport_sweep(congested_pair, 0, with_payments=False, energy_at_cost=energy_at_cost)
        truth = surface.utility_of(truth_type)
        gains = [p.utility - truth for p in surface.points
                 if p.report.temporal_inflexibility > truth_type.temporal_inflexibility]
        assert max(gains) >= 0.01


def test_misreport_rejects_bad_index(two_ev_toy):
    with pytest.raises(InputError):
        misreport_sweep(two_ev_toy, 2)
    with pytest.raises(InputError):
        misreport_sweep(two_ev_toy, 0, [])


def test_zero_demand_ev_leaves_peers_unchanged():
    # an EV that wants nothing and arrives with nothing to give does not move its peers
    busy = (leaf(initial_soc=8.0), EVType(5, 14.0, 25.0, 10.0))
    idle = (leaf(initial_soc=0.0, discharge=0.0), EVType(3, 0.0, 25.0, 10.0))
    sc = scenario([0.15, 0.14, 0.13, 0.13, 0.16, 0.18, 0.2, 0.19], 6.6, [busy, idle])
    full = solve_exact(sc).allocations
    assert not full[1].power_profile.any()
    alone = solve_exact(sc.without(1)).allocations[0]
    assert full[0].disconnect_time == alone.disconnect_time
    np.testing.assert_allclose(full[0].power_profile, alone.power_profile, atol=1e-6)
    assert vcg_payment(sc, None, 1) == pytest.approx(0.0, abs=1e-7)
