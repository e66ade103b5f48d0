"""Executable structural properties of optimal schedules.

Each check returns a measured slack so failures say how far off they were.
Checks marked informational describe behavior that may legitimately go
either way (global temperature monotonicity with several arrivals) and do not
affect the overall verdict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .model import (TOL_FEAS, TOL_TIGHT, ArrivalProfile, ConstantSegment, PowerPolicy,
                    ThermalParams, check_energy_causality, check_temperature)

FLAT_T = 1e-8
FLAT_P = 1e-6
MONO_P = 1e-6
CONTACT = 1e-7


@dataclass
class CheckResult:
    name: str
    passed: bool
    measure: float = 0.0
    location: float | None = None
    detail: str = ""
    informational: bool = False

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "measure": float(self.measure),
                "location": None if self.location is None else float(self.location),
                "detail": self.detail, "informational": self.informational}


@dataclass
class PropertyReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed and not c.informational]

    def by_name(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.as_dict() for c in self.checks]}


def staircase_policy(profile: ArrivalProfile) -> PowerPolicy:
    """Throughput-optimal schedule when temperature is unconstrained.

    Power is constant over runs of epochs; each run ends at the epoch end that
    minimizes the average power available from the run start.
    """
    ends = profile.epoch_ends
    starts = np.asarray(profile.times)
    cum = profile.cumulative
    segs = []
    i, spent = 0, 0.0
    while i < profile.n_epochs:
        avg = (cum[i:] - spent) / (ends[i:] - starts[i])
        j = i + int(np.flatnonzero(avg <= avg.min() * (1 + 1e-12) + 1e-300)[-1])
        segs.append(ConstantSegment(float(starts[i]), float(ends[j]), max(float(avg[j - i]), 0.0)))
        spent = cum[j]
        i = j + 1
    return PowerPolicy(tuple(segs))


def _first_contact(policy: PowerPolicy, params: ThermalParams, T0: float, tol: float = 1e-9):
    """First instant the temperature reaches T_c, from the exact segment data."""
    Ts = policy.start_temperatures(params, T0)
    for k, seg in enumerate(policy.segments):
        if Ts[k] >= params.T_c - tol:
            return seg.t_start
        tm, Tm = seg.temperature_max(Ts[k], params)
        if Tm >= params.T_c - tol:
            return tm
    if Ts[-1] >= params.T_c - tol:
        return policy.D
    return None


def _runs(mask):
    """(start, stop) index pairs of True runs."""
    idx = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(np.int8), [0]])))
    return list(zip(idx[::2], idx[1::2]))


def structural_checks(policy: PowerPolicy, params: ThermalParams, profile: ArrivalProfile,
                      T0: float | None = None, n_samples: int = 2001) -> PropertyReport:
    """Evaluate the structural properties of a claimed-optimal schedule."""
    T0 = params.T_e if T0 is None else T0
    Tc, Te, p_bar, D = params.T_c, params.T_e, params.p_bar, profile.D
    times = np.asarray(profile.times)
    t = np.unique(np.concatenate([np.linspace(0.0, D, n_samples), policy.boundaries, times]))
    P = policy.power(t)
    T = policy.temperature(t, params, T0)
    B = policy.energy(t)
    slope = params.a * P - params.b * (T - Te)
    epoch = np.clip(np.searchsorted(times, t, side="right") - 1, 0, profile.n_epochs - 1)
    out = []

    # range
    lo = float(np.min(T - Te))
    hi = float(np.max(T - Tc))
    out.append(CheckResult("temperature_range", lo >= -1e-9 and hi <= TOL_FEAS,
                           max(-lo, hi, 0.0), float(t[np.argmax(T)])))
    e_rep = check_energy_causality(policy, profile)
    t_rep = check_temperature(policy, params, T0)
    out.append(CheckResult("feasible", e_rep.feasible and t_rep.feasible,
                           max(e_rep.worst_violation, t_rep.worst_violation),
                           t_rep.worst_location if t_rep.worst_violation >= e_rep.worst_violation
                           else e_rep.worst_location))

    # flat temperature stretches
    flat = np.abs(np.diff(T)) <= 1e-10
    worst_p, worst_lvl, where_p, where_l = 0.0, 0.0, None, None
    for a, b in _runs(flat):
        if b - a < 3:
            continue
        # endpoint samples may sit in an approach cell; judge power on the interior
        seg_T, seg_P = T[a:b + 1], P[a + 1:b]
        if np.max(np.abs(seg_T - seg_T.mean())) > FLAT_T:
            continue
        dp = float(np.max(np.abs(seg_P - seg_P.mean())))
        if dp > worst_p:
            worst_p, where_p = dp, float(t[a])
        lvl = min(abs(seg_T.mean() - Tc), abs(seg_T.mean() - Te))
        if lvl > worst_lvl:
            worst_lvl, where_l = lvl, float(t[a])
    out.append(CheckResult("flat_temperature_flat_power", worst_p <= FLAT_P, worst_p, where_p))
    out.append(CheckResult("flat_levels", worst_lvl <= 1e-6, worst_lvl, where_l))

    # terminal tightness
    e_slack = float(profile.total - B[-1])
    t_slack = float(Tc - T[-1])
    out.append(CheckResult("terminal_tightness", min(e_slack, t_slack) <= TOL_TIGHT,
                           min(e_slack, t_slack), D))

    # power nonincreasing inside epochs
    dP = np.diff(P)
    same = epoch[1:] == epoch[:-1]
    rise = np.where(same, dP, -np.inf)
    k = int(np.argmax(rise))
    out.append(CheckResult("epoch_power_nonincreasing", rise[k] <= MONO_P, max(float(rise[k]), 0.0),
                           float(t[k + 1])))

    # jumps
    cuts = policy.boundaries[1:-1]
    bad, where, detail = 0.0, None, ""
    if cuts.size:
        jumps = policy.power(cuts) - policy.power_left(cuts)
        Tcut = policy.temperature(cuts, params, T0)
        Bcut = policy.energy(cuts)
        for c, j, Tj, Bj in zip(cuts, jumps, Tcut, Bcut):
            if abs(j) <= 1e-7 * max(1.0, abs(policy.power_left(c))):
                continue
            at_arrival = np.any(np.abs(times[1:] - c) <= 1e-12)
            if not at_arrival:
                bad, where, detail = abs(j), float(c), "jump away from an arrival"
                break
            if j < 0:
                bad, where, detail = -j, float(c), "negative jump"
                break
            kk = int(np.searchsorted(times, c, side="left"))
            battery = float(profile.cumulative[kk - 1] - Bj)
            if battery > 1e-6:
                bad, where, detail = battery, float(c), "battery not empty at jump"
                break
            if Tj >= Tc - 1e-9:
                bad, where, detail = float(Tj - Tc + 1e-9), float(c), "at ceiling during jump"
                break
    out.append(CheckResult("jumps_at_arrivals", bad == 0.0, bad, where, detail))

    # saturation continuity and return to ceiling
    th = _first_contact(policy, params, T0)
    if th is not None and 0.0 < th < D:
        gap = max(abs(float(policy.power(th)) - p_bar), abs(float(policy.power_left(th)) - p_bar))
        out.append(CheckResult("saturation_continuity", gap <= 1e-6, gap, th))
        later = t > th
        again = bool(np.any(T[later] >= Tc - CONTACT))
        out.append(CheckResult("return_to_ceiling", again, 0.0 if again else 1.0, th))
    else:
        out.append(CheckResult("saturation_continuity", True, 0.0, th, "no interior contact"))
        out.append(CheckResult("return_to_ceiling", True, 0.0, th, "no interior contact"))

    # per-epoch temperature shape
    scale = params.a * max(p_bar, float(P.max()), 1.0)
    sign = np.where(slope > 1e-9 * scale, "+", np.where(slope < -1e-9 * scale, "-", "0"))
    shape_ok, unimodal_ok, noreturn_ok, after_ok = True, True, True, True
    where_shape = where_uni = where_ret = where_after = None
    for k in range(profile.n_epochs):
        m = (epoch == k) & (t < D) if k < profile.n_epochs - 1 else (epoch == k)
        idx = np.flatnonzero(m)
        if idx.size == 0:
            continue
        s = "".join(sign[idx])
        comp = re.sub(r"(.)\1+", r"\1", s)
        stripped = comp.replace("0", "")
        if re.fullmatch(r"\+?-?", stripped) is None:
            unimodal_ok, where_uni = False, float(t[idx[0]])
        zero_runs = [(a, b) for a, b in _runs(sign[idx] == "0") if b - a >= 2]
        levels_ok = all(min(abs(T[idx[a:b]].mean() - Tc), abs(T[idx[a:b]].mean() - Te)) <= 1e-6
                        for a, b in zero_runs)
        if re.fullmatch(r"\+?0?-?", comp) is None and not (re.fullmatch(r"\+?-?", stripped) and levels_ok):
            shape_ok, where_shape = False, float(t[idx[0]])
        contact = T[idx] >= Tc - CONTACT
        runs = _runs(contact)
        if len(runs) > 1:
            noreturn_ok, where_ret = False, float(t[idx[runs[1][0]]])
        if runs and runs[-1][1] < len(idx):
            tail = T[idx[runs[-1][1] - 1:]]
            if np.any(np.diff(tail) > 1e-9):
                after_ok, where_after = False, float(t[idx[runs[-1][1]]])
    out.append(CheckResult("epoch_unimodal", unimodal_ok, 0.0 if unimodal_ok else 1.0, where_uni))
    out.append(CheckResult("epoch_no_return", noreturn_ok, 0.0 if noreturn_ok else 1.0, where_ret))
    out.append(CheckResult("epoch_decreasing_after_leaving", after_ok, 0.0 if after_ok else 1.0,
                           where_after))
    out.append(CheckResult("epoch_shape", shape_ok, 0.0 if shape_ok else 1.0, where_shape))

    # slack terminal temperature
    if T[-1] < Tc - TOL_TIGHT:
        below = float(np.max(T) - Tc)
        ref = staircase_policy(profile).throughput()
        diff = abs(policy.throughput() - ref)
        out.append(CheckResult("slack_terminal_matches_staircase", below < -1e-9 and diff <= 1e-3,
                               diff, None))
    else:
        out.append(CheckResult("slack_terminal_matches_staircase", True, 0.0, None, "terminal contact"))

    dT = np.diff(T)
    mono = float(max(-dT.min(initial=0.0), 0.0))
    out.append(CheckResult("global_temperature_monotone", mono <= 1e-8, mono, None,
                           informational=profile.n_epochs > 1))

    if profile.n_epochs == 1:
        out.extend(_single_checks(policy, params, profile, T0, th))
    return PropertyReport(out)


def _single_checks(policy, params, profile, T0, th):
    D, E, p_bar, Tc = profile.D, profile.total, params.p_bar, params.T_c
    out = []
    if th is not None and th < D:
        s = np.linspace(th, D, 257)
        dp = float(np.max(np.abs(policy.power(s) - p_bar)))
        dT = float(np.max(np.abs(policy.temperature(s, params, T0) - Tc)))
        out.append(CheckResult("saturated_tail", max(dp, dT) <= 1e-6, max(dp, dT), th))
    else:
        out.append(CheckResult("saturated_tail", True, 0.0, th, "no saturation"))
    u = np.linspace(0.0, D, 2001)
    P = policy.power(u)
    floor = min(p_bar, E / D)
    short = float(max(floor - 1e-8 - P.min(), 0.0))
    out.append(CheckResult("power_floor", short == 0.0, short, float(u[np.argmin(P)])))
    battery = E - policy.energy(u[:-1])
    out.append(CheckResult("battery_nonempty", bool(np.all(battery > 0.0)),
                           float(max(-battery.min(), 0.0)), float(u[np.argmin(battery)])))
    T = policy.temperature(u, params, T0)
    d1 = np.diff(T)
    d2 = np.diff(T, 2)
    bad = float(max(-d1.min() - 1e-8, d2.max() - 1e-8, 0.0))
    out.append(CheckResult("temperature_increasing_concave", bad == 0.0, bad, None))
    return out


def monotone_response(params: ThermalParams, levels, D: float, T0: float | None = None,
                      n_samples: int = 1001) -> CheckResult:
    """Nondecreasing step power from T_e must give nondecreasing temperature."""
    T0 = params.T_e if T0 is None else T0
    levels = np.asarray(levels, dtype=float)
    edges = np.linspace(0.0, D, len(levels) + 1)
    policy = PowerPolicy(tuple(ConstantSegment(float(a), float(b), float(p))
                               for a, b, p in zip(edges[:-1], edges[1:], levels)))
    T = policy.temperature(np.linspace(0.0, D, n_samples), params, T0)
    drop = float(max(-np.diff(T).min(), 0.0))
    return CheckResult("monotone_power_monotone_temperature", drop <= 1e-12, drop, None)
