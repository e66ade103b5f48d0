import numpy as np
import pytest

from thermosched.kkt import DualState, TailMultiplier, kkt_certificate
from thermosched.model import (ArrivalProfile, ConstantSegment, PowerPolicy, RecipExpSegment,
                               ThermalParams)
from thermosched.multi import (extract_structure, grid_dual_solve, make_grid,
                               restricted_interval_solve, solve_multi)
from thermosched.single import solve_energy_limited, solve_single

BASE = ThermalParams(a=0.1, b=0.3, T_e=37.0, T_c=38.0)
COOLING = ThermalParams(a=0.1, b=1.1, T_e=37.0, T_c=37.92)
FIG7 = ArrivalProfile(5.0, (0.0, 1.5), (6.08, 14.55))
FIG8 = ArrivalProfile(3.5, (0.0, 2.0), (25.0, 17.0))


@pytest.fixture(scope="module")
def fig7():
    return solve_multi(BASE, FIG7)


@pytest.fixture(scope="module")
def fig8():
    return solve_multi(COOLING, FIG8)


def test_grid_contains_arrivals_and_exact_weights():
    g = make_grid(BASE, FIG7, 64, BASE.T_e)
    assert 1.5 in g.x
    assert g.x[0] == 0.0 and g.x[-1] == 5.0
    np.testing.assert_allclose(g.w, (np.exp(0.3 * g.x[1:]) - np.exp(0.3 * g.x[:-1])) / 0.3,
                               rtol=1e-12)


def test_grid_dual_is_feasible_and_converges():
    coarse = grid_dual_solve(BASE, FIG7, 512)
    fine = grid_dual_solve(BASE, FIG7, 2048)
    for sol in (coarse, fine):
        assert np.all(sol.energy_slack() >= -1e-8)
        assert np.max(sol.node_temperature(BASE, BASE.T_e)) <= BASE.T_c + 1e-8
        # weak duality, in bits
        assert sol.dual_value / (2 * np.log(2)) >= sol.objective - 1e-9
    assert abs(fine.objective - coarse.objective) < 1e-3


def test_fig7_structure(fig7):
    rep = fig7
    assert rep.certified and rep.regime == "multi"
    assert rep.jump_instants == [1.5]
    assert float(rep.policy.power(1.5) - rep.policy.power_left(1.5)) > 0
    assert 3.8 <= rep.tight_intervals[-1][0] <= 4.0
    assert rep.tight_intervals[-1][1] == pytest.approx(5.0)
    assert rep.energy_tight == [1.5, 5.0]
    kinds = [type(s).__name__ for s in rep.policy.segments]
    assert kinds == ["RecipExpSegment", "RecipExpSegment", "ConstantSegment"]
    assert rep.policy.segments[-1].p == pytest.approx(BASE.p_bar)


def test_fig8_structure(fig8):
    rep = fig8
    assert rep.certified
    (u1, v1), (u2, v2) = rep.tight_intervals
    assert u1 == pytest.approx(1.31, abs=0.05) and v1 == pytest.approx(1.66, abs=0.05)
    assert u2 == pytest.approx(2.23, abs=0.05) and v2 == pytest.approx(3.5)
    assert rep.energy_tight == [2.0]
    assert rep.energy_wasted and rep.energy_used < 42.0
    # temperature dips between the two contacts
    T = rep.policy.temperature(np.linspace(v1 + 0.05, u2 - 0.05, 50), COOLING, COOLING.T_e)
    assert T.max() < COOLING.T_c - 1e-4


def test_single_arrival_matches_closed_form():
    prof = ArrivalProfile.single(17.71, 3.5)
    multi = solve_multi(BASE, prof)
    single = solve_single(BASE, 17.71, 3.5)
    assert multi.certified
    assert multi.throughput == pytest.approx(single.throughput, rel=1e-9)
    assert multi.t0 == pytest.approx(single.t0, abs=1e-6)


def test_zero_energy():
    rep = solve_multi(BASE, ArrivalProfile(3.0, (0.0, 1.0), (0.0, 0.0)))
    assert rep.regime == "zero_energy" and rep.certified
    assert rep.throughput == 0.0


def test_nonequilibrium_start(fig7):
    rep = solve_multi(BASE, FIG7, T0=37.5)
    assert rep.certified
    assert rep.throughput < fig7.throughput


def test_input_validation():
    with pytest.raises(ValueError):
        solve_multi(BASE, FIG7, grid_n=10)
    with pytest.raises(ValueError):
        solve_multi(BASE, FIG7, T0=36.0)
    with pytest.raises(ValueError):
        solve_multi(ThermalParams(0.1, 0.3, 37, 38, c=0.1), FIG7)


def test_extract_structure_single_saturated():
    prof = ArrivalProfile.single(17.71, 3.5)
    sol = grid_dual_solve(BASE, prof, 1024)
    policy, duals, st, ok = extract_structure(sol, prof, BASE, BASE.T_e, 1e-6)
    kinds = [type(s).__name__ for s in policy.segments]
    assert kinds[0] == "RecipExpSegment" and kinds[-1] == "ConstantSegment"


def test_extract_structure_zero_power_stretch():
    # nothing harvested before t = 1, so the first epoch is idle
    prof = ArrivalProfile(3.0, (0.0, 1.0), (0.0, 20.0))
    rep = solve_multi(COOLING, prof)
    assert rep.certified
    first = rep.policy.segments[0]
    assert isinstance(first, ConstantSegment) and first.p == 0.0 and first.t_end == 1.0


def test_restricted_at_ceiling_is_constant():
    pol = restricted_interval_solve(BASE, 1.0, 3.0, BASE.T_c, [(1.0, 10.0)])
    assert pol.segments == (ConstantSegment(0.0, 2.0, BASE.p_bar),)
    pol = restricted_interval_solve(BASE, 1.0, 3.0, BASE.T_c, [(1.0, 2.0)])
    assert pol.segments == (ConstantSegment(0.0, 2.0, 1.0),)


def test_restricted_single_window_matches_energy_limited():
    sol = solve_energy_limited(BASE, 17.0, 3.5)
    assert sol.boundary
    pol = restricted_interval_solve(BASE, 0.0, 3.5, BASE.T_e, [(0.0, 17.0)], grid_n=4096)
    assert isinstance(pol.segments[0], RecipExpSegment)
    assert pol.segments[0].beta == pytest.approx(sol.beta, rel=1e-3)
    assert pol.segments[0].C == pytest.approx(sol.C, rel=1e-2)
    assert pol.throughput() == pytest.approx(sol.policy.throughput(), rel=1e-6)


def test_restricted_window_of_global_solution(fig7):
    # the two-arrival preset saturates for good at t_h; before that the
    # temperature is free, so the window [0, t_h] with T(t_h) = T_c
    # reproduces the global schedule there
    th = fig7.tight_intervals[-1][0]
    E_win = float(fig7.policy.energy(th))
    pol = restricted_interval_solve(BASE, 0.0, th, BASE.T_e, [(0.0, 6.08), (1.5, E_win - 6.08)])
    t = np.linspace(0.0, th, 200, endpoint=False)
    np.testing.assert_allclose(pol.power(t), fig7.policy.power(t), atol=1e-3)


def test_restricted_validation():
    with pytest.raises(ValueError):
        restricted_interval_solve(BASE, 2.0, 1.0, 37.0, [(2.0, 1.0)])
    with pytest.raises(ValueError):
        restricted_interval_solve(BASE, 0.0, 1.0, 37.0, [(0.5, 1.0)])


# -- certificates --------------------------------------------------------------


def test_certificate_constant_regime_is_exact():
    prof = ArrivalProfile.single(10.0, 3.5)
    pol = PowerPolicy.constant(10 / 3.5, 3.5)
    duals = DualState([1.0 / (10 / 3.5 + 1.0)], TailMultiplier.zero(3.5, BASE.b))
    cert = kkt_certificate(pol, duals, prof, BASE)
    assert cert.stationarity == pytest.approx(0.0, abs=1e-15)
    assert cert.ok()


def test_certificate_detects_perturbation(fig7):
    segs = list(fig7.policy.segments)
    s0 = segs[0]
    bumped = [ConstantSegment(0.0, 0.5, float(s0.power(0.25)) + 0.1),
              RecipExpSegment(0.5, s0.t_end, s0.beta, s0.C, s0.b)] + segs[1:]
    cert = kkt_certificate(PowerPolicy(tuple(bumped)), fig7.duals, FIG7, BASE)
    assert cert.stationarity > 1e-3
    assert not cert.ok()


def test_certificate_unconstrained_saturated():
    rep = solve_single(BASE, 30.0, 3.5)
    assert rep.kkt.max_residual <= 1e-6
    assert rep.duals.mu[0] == 0.0
