import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermosched.model import (ArrivalProfile, ConstantSegment, PowerPolicy, RecipExpSegment,
                               ThermalParams, check_energy_causality, check_temperature,
                               energy_of_policy, recip_pieces, recip_zero_crossing,
                               temperature_const_segment, temperature_recip_segment,
                               temperature_trajectory, throughput_of_policy)
from thermosched.numerics import integrate_ode_rk4, quad_adaptive

BASE = ThermalParams(a=0.1, b=0.3, T_e=37.0, T_c=38.0)


def test_params_derived_quantities():
    assert BASE.T_delta == pytest.approx(1.0)
    assert BASE.p_bar == pytest.approx(3.0)
    assert BASE.T_eq == 37.0
    assert ThermalParams(0.1, 1.1, 37.0, 37.92).p_bar == pytest.approx(10.12, abs=1e-12)
    assert ThermalParams(0.1, 0.5, 37.0, 38.0, c=0.2).T_eq == pytest.approx(37.4)


@pytest.mark.parametrize("kw, msg", [
    (dict(a=0.0, b=0.3, T_e=37, T_c=38), "a must"),
    (dict(a=0.1, b=-1, T_e=37, T_c=38), "b must"),
    (dict(a=0.1, b=0.3, T_e=38, T_c=38), "T_c must"),
])
def test_params_validation(kw, msg):
    with pytest.raises(ValueError, match=msg):
        ThermalParams(**kw)


def test_profile_basics():
    prof = ArrivalProfile(5.0, (0.0, 1.5), (6.08, 14.55))
    assert prof.n_epochs == 2
    np.testing.assert_allclose(prof.epoch_ends, [1.5, 5.0])
    np.testing.assert_allclose(prof.cumulative, [6.08, 20.63])
    assert prof.total == pytest.approx(20.63)
    assert prof.epoch_of(0.0) == 0
    assert prof.epoch_of(1.5) == 1
    assert prof.epoch_of(5.0) == 1


@pytest.mark.parametrize("D, times, energies", [
    (5.0, (0.5,), (1.0,)),
    (5.0, (0.0, 0.0), (1.0, 1.0)),
    (5.0, (0.0, 6.0), (1.0, 1.0)),
    (5.0, (0.0,), (-1.0,)),
    (0.0, (0.0,), (1.0,)),
    (5.0, (), ()),
])
def test_profile_validation(D, times, energies):
    with pytest.raises(ValueError):
        ArrivalProfile(D, times, energies)


def test_constant_segment_closed_forms():
    seg = ConstantSegment(0.0, 2.0, 4.0)
    assert seg.energy(0.5, 1.5) == pytest.approx(4.0)
    assert seg.throughput() == pytest.approx(2.0 * 0.5 * math.log2(5.0))
    T = seg.temperature(2.0, 37.0, BASE)
    assert T == pytest.approx(37.0 + (0.1 * 4 / 0.3) * (1 - math.exp(-0.6)))
    assert T == pytest.approx(temperature_const_segment(4.0, BASE, 37.0, 2.0))


def test_constant_segment_validation():
    with pytest.raises(ValueError):
        ConstantSegment(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ConstantSegment(0.0, 1.0, -0.1)


def test_recip_segment_energy_and_throughput_match_quadrature():
    seg = RecipExpSegment(0.3, 2.1, 0.05, 0.02, 0.3)
    P = lambda t: 1.0 / (0.05 + 0.02 * math.exp(0.3 * t)) - 1.0  # noqa: E731
    assert seg.energy(0.3, 2.1) == pytest.approx(quad_adaptive(P, 0.3, 2.1, 1e-13), abs=1e-10)
    rate = lambda t: 0.5 * math.log2(1.0 + P(t))  # noqa: E731
    assert seg.throughput() == pytest.approx(quad_adaptive(rate, 0.3, 2.1, 1e-13), abs=1e-10)


def test_recip_segment_temperature_matches_rk4():
    seg = RecipExpSegment(0.0, 3.0, 0.05, 0.01, 0.3)
    ref = integrate_ode_rk4(lambda t: float(seg.power(t)), BASE, 37.1, 3.0, 1e-3).T[-1]
    assert float(seg.temperature(3.0, 37.1, BASE)) == pytest.approx(ref, abs=1e-10)
    assert temperature_recip_segment(0.05, 0.01, BASE, 37.1, 0.0, 3.0) == pytest.approx(ref, abs=1e-10)


def test_recip_segment_rejects_sign_change():
    with pytest.raises(ValueError):
        RecipExpSegment(0.0, 5.0, 0.5, 0.3, 0.3)
    with pytest.raises(ValueError):
        RecipExpSegment(0.0, 1.0, 0.0, 0.0, 0.3)
    with pytest.raises(ValueError):
        temperature_recip_segment(0.5, 0.3, BASE, 37.0, 0.0, 5.0)


def test_zero_crossing_and_pieces():
    tz = recip_zero_crossing(0.5, 0.3, 0.3)
    assert 0.5 + 0.3 * math.exp(0.3 * tz) == pytest.approx(1.0)
    assert recip_zero_crossing(0.5, 0.0, 0.3) is None
    pieces = recip_pieces(0.0, 5.0, 0.5, 0.3, 0.3)
    assert len(pieces) == 2
    assert isinstance(pieces[1], ConstantSegment) and pieces[1].p == 0.0
    assert pieces[0].t_end == pytest.approx(tz)
    # crossing before the window: all zero
    only = recip_pieces(4.0, 5.0, 0.5, 0.3, 0.3)
    assert len(only) == 1 and only[0].p == 0.0


def test_temperature_max_unimodal():
    # decreasing power that starts high: temperature rises then falls
    seg = RecipExpSegment(0.0, 12.0, 0.0, 0.01, 0.3)
    tm, Tm = seg.temperature_max(37.0, BASE)
    t = np.linspace(0.0, 12.0, 40001)
    T = seg.temperature(t, 37.0, BASE)
    assert Tm == pytest.approx(T.max(), abs=1e-9)
    assert 0.0 < tm < 12.0


def test_policy_structure_and_queries():
    pol = PowerPolicy((ConstantSegment(0.0, 1.0, 2.0), ConstantSegment(1.0, 3.0, 5.0)))
    assert pol.D == 3.0
    np.testing.assert_allclose(pol.boundaries, [0.0, 1.0, 3.0])
    assert pol.power(1.0) == 5.0
    assert pol.power_left(1.0) == 2.0
    assert float(pol.energy(3.0)) == pytest.approx(12.0)
    assert energy_of_policy(pol, 2.0) == pytest.approx(7.0)
    assert throughput_of_policy(pol) == pytest.approx(0.5 * math.log2(3) + math.log2(6))
    with pytest.raises(ValueError):
        energy_of_policy(pol, 4.0)


def test_policy_rejects_gaps():
    with pytest.raises(ValueError):
        PowerPolicy((ConstantSegment(0.0, 1.0, 2.0), ConstantSegment(1.5, 3.0, 5.0)))
    with pytest.raises(ValueError):
        PowerPolicy((ConstantSegment(0.5, 1.0, 2.0),))
    with pytest.raises(ValueError):
        PowerPolicy(())


def test_temperature_continuous_across_jumps():
    pol = PowerPolicy((ConstantSegment(0.0, 1.0, 8.0), ConstantSegment(1.0, 2.0, 1.0)))
    T = pol.temperature(np.array([1.0 - 1e-10, 1.0, 1.0 + 1e-10]), BASE, 37.0)
    assert np.ptp(T) < 1e-9


def test_trajectory_includes_requested_instants():
    pol = PowerPolicy.constant(2.0, 3.5)
    traj = temperature_trajectory(pol, BASE, 37.0, n_samples=11, extra_times=(1.2345,))
    assert 1.2345 in traj.t and traj.t[0] == 0.0 and traj.t[-1] == 3.5
    np.testing.assert_allclose(traj.rate, 0.5 * np.log2(3.0))
    np.testing.assert_allclose(traj.B, 2.0 * traj.t)
    with pytest.raises(ValueError):
        temperature_trajectory(pol, BASE, 36.0)


def test_feasibility_reports():
    prof = ArrivalProfile(4.0, (0.0, 2.0), (2.0, 10.0))
    ok = PowerPolicy.constant(1.0, 4.0)
    bad = PowerPolicy.constant(1.5, 4.0)
    assert check_energy_causality(ok, prof).feasible
    rep = check_energy_causality(bad, prof)
    assert not rep.feasible and rep.worst_location == 2.0
    assert rep.worst_violation == pytest.approx(1.0)

    hot = PowerPolicy.constant(10.0, 4.0)
    trep = check_temperature(hot, BASE)
    assert not trep.feasible and trep.worst_location == pytest.approx(4.0)
    sat = PowerPolicy((ConstantSegment(0.0, 1.0, 0.0), ConstantSegment(1.0, 2.0, BASE.p_bar)))
    srep = check_temperature(sat, BASE, BASE.T_c)
    assert srep.feasible and srep.active_intervals == []
    held = PowerPolicy((ConstantSegment(0.0, 1.0, BASE.p_bar), ConstantSegment(1.0, 2.0, BASE.p_bar)))
    hrep = check_temperature(held, BASE, BASE.T_c)
    assert hrep.feasible and hrep.active_intervals == [(0.0, 2.0)]


@given(p=st.floats(0.0, 30.0), T0=st.floats(37.0, 38.0), dt=st.floats(0.0, 5.0))
@settings(max_examples=80, deadline=None)
def test_constant_segment_solves_ode(p, T0, dt):
    T = temperature_const_segment(p, BASE, T0, dt)
    eq = BASE.T_e + BASE.a * p / BASE.b
    # the closed form relaxes exponentially toward the equilibrium
    assert min(T0, eq) - 1e-12 <= T <= max(T0, eq) + 1e-12
    assert abs((T - eq) - (T0 - eq) * math.exp(-BASE.b * dt)) <= 1e-10
