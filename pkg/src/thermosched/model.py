"""Domain types and closed-form evaluation of power policies.

A policy is a list of analytic segments. Two kinds exist: a constant power
level, and the reciprocal-exponential shape ``1/(beta + C exp(b t)) - 1`` that
stationarity of the Lagrangian produces. Both admit closed-form energy and
temperature integrals, so feasibility is checked exactly rather than on a
sample grid.

Temperatures follow dT/dt = a P - b (T - T_e) + c. A nonzero ``c`` only shifts
the equilibrium to ``T_e + c/b``; the propagation code handles it, the solvers
refuse it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .numerics import quad_adaptive

TOL_FEAS = 1e-7
TOL_TIGHT = 1e-5
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class ThermalParams:
    a: float
    b: float
    T_e: float
    T_c: float
    c: float = 0.0

    def __post_init__(self):
        problems = []
        if not self.a > 0:
            problems.append("a must be positive")
        if not self.b > 0:
            problems.append("b must be positive")
        if not self.T_c > self.T_e:
            problems.append("T_c must exceed T_e")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def T_delta(self) -> float:
        return self.T_c - self.T_e

    @property
    def p_bar(self) -> float:
        """Power that holds the temperature exactly at T_c."""
        return self.T_delta * self.b / self.a

    @property
    def T_eq(self) -> float:
        """Zero-power equilibrium temperature."""
        return self.T_e + self.c / self.b


@dataclass(frozen=True)
class ArrivalProfile:
    """Deadline plus energy arrivals; ``times[0]`` must be 0."""

    D: float
    times: tuple
    energies: tuple

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(s) for s in self.times))
        object.__setattr__(self, "energies", tuple(float(e) for e in self.energies))
        problems = []
        if len(self.times) != len(self.energies) or not self.times:
            problems.append("times and energies must be non-empty and of equal length")
        else:
            if self.times[0] != 0.0:
                problems.append("first arrival must be at t=0")
            if any(t1 <= t0 for t0, t1 in zip(self.times, self.times[1:])):
                problems.append("arrival times must be strictly increasing")
            if self.times[-1] >= self.D:
                problems.append("all arrivals must precede the deadline")
            if any(e < 0 for e in self.energies):
                problems.append("energies must be non-negative")
        if not self.D > 0:
            problems.append("deadline must be positive")
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def single(cls, E: float, D: float) -> "ArrivalProfile":
        return cls(D, (0.0,), (E,))

    @property
    def n_epochs(self) -> int:
        return len(self.times)

    @property
    def epoch_ends(self) -> np.ndarray:
        """Right endpoints s_1, ..., s_N, D of the epochs."""
        return np.array(self.times[1:] + (self.D,))

    @property
    def cumulative(self) -> np.ndarray:
        """Energy harvested by the end of each epoch."""
        return np.cumsum(self.energies)

    @property
    def total(self) -> float:
        return float(sum(self.energies))

    def epoch_of(self, t: float) -> int:
        """Index of the epoch containing t (epochs are half-open on the right)."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(k, 0), self.n_epochs - 1)


# -- segments -----------------------------------------------------------------


@dataclass(frozen=True)
class ConstantSegment:
    t_start: float
    t_end: float
    p: float

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"empty segment [{self.t_start}, {self.t_end})")
        if self.p < 0:
            raise ValueError("negative power level")

    def power(self, t):
        return np.full(np.shape(t), self.p, dtype=float)

    def energy(self, t1: float, t2: float) -> float:
        return self.p * (t2 - t1)

    def temperature(self, t, T_start: float, params: ThermalParams):
        return _temp_const(self.p, params, T_start, np.asarray(t, dtype=float) - self.t_start)

    def throughput(self) -> float:
        return 0.5 * math.log2(1.0 + self.p) * (self.t_end - self.t_start)

    def temperature_max(self, T_start: float, params: ThermalParams):
        """(time, temperature) of the maximum over the closed segment."""
        T_end = float(self.temperature(self.t_end, T_start, params))
        return (self.t_start, T_start) if T_start >= T_end else (self.t_end, T_end)


@dataclass(frozen=True)
class RecipExpSegment:
    """P(t) = 1/(beta + C exp(b t)) - 1, required to be >= 0 on the segment."""

    t_start: float
    t_end: float
    beta: float
    C: float
    b: float

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"empty segment [{self.t_start}, {self.t_end})")
        if self.beta < 0 or self.C < 0 or (self.beta == 0 and self.C == 0):
            raise ValueError("beta, C must be non-negative and not both zero")
        x_end = self.beta + self.C * math.exp(self.b * self.t_end)
        if x_end > 1.0 + 1e-9:
            raise ValueError("power changes sign inside segment; split at the zero crossing")

    def power(self, t):
        t = np.asarray(t, dtype=float)
        return np.maximum(1.0 / (self.beta + self.C * np.exp(self.b * t)) - 1.0, 0.0)

    def energy(self, t1: float, t2: float) -> float:
        return _recip_energy(self.beta, self.C, self.b, t1, t2)

    def temperature(self, t, T_start: float, params: ThermalParams):
        return _temp_recip(self.beta, self.C, params, T_start, self.t_start, np.asarray(t, dtype=float))

    def throughput(self) -> float:
        beta, C, b = self.beta, self.C, self.b
        if beta == 0.0:
            # log(1+P) = -log C - b t exactly
            t1, t2 = self.t_start, self.t_end
            return -0.5 * ((math.log(C)) * (t2 - t1) + 0.5 * b * (t2 * t2 - t1 * t1)) / _LN2
        return quad_adaptive(lambda t: -0.5 * math.log2(beta + C * math.exp(b * t)),
                             self.t_start, self.t_end, 1e-10)

    def temperature_max(self, T_start: float, params: ThermalParams):
        """Maximum over the closed segment; the temperature is unimodal here."""
        a, b, Teq = params.a, params.b, params.T_eq

        def slope(t):
            return a * float(self.power(t)) - b * (float(self.temperature(t, T_start, params)) - Teq)

        t1, t2 = self.t_start, self.t_end
        T_end = float(self.temperature(t2, T_start, params))
        s1, s2 = slope(t1), slope(t2)
        if s1 > 0 and s2 < 0:
            lo, hi = t1, t2
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if slope(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            tm = 0.5 * (lo + hi)
            return tm, float(self.temperature(tm, T_start, params))
        return (t1, T_start) if T_start >= T_end else (t2, T_end)

    @property
    def zero_crossing(self) -> float | None:
        return recip_zero_crossing(self.beta, self.C, self.b)


Segment = Union[ConstantSegment, RecipExpSegment]


def recip_zero_crossing(beta: float, C: float, b: float) -> float | None:
    """Time where beta + C e^{bt} = 1, or None if it never happens."""
    if C <= 0 or beta >= 1.0:
        return None
    return math.log((1.0 - beta) / C) / b


def recip_pieces(t1: float, t2: float, beta: float, C: float, b: float) -> list:
    """Segments realizing [1/(beta + C e^{bt}) - 1]^+ on [t1, t2).

    The clamp is realized by splitting at the zero crossing; ``C == 0`` gives a
    constant level.
    """
    if t2 <= t1:
        return []
    if C == 0.0:
        if beta <= 0:
            raise ValueError("beta and C both zero: unbounded power")
        return [ConstantSegment(t1, t2, max(0.0, 1.0 / beta - 1.0))]
    tz = recip_zero_crossing(beta, C, b)
    if tz is None or tz <= t1:
        return [ConstantSegment(t1, t2, 0.0)]
    if tz >= t2:
        return [RecipExpSegment(t1, t2, beta, C, b)]
    return [RecipExpSegment(t1, tz, beta, C, b), ConstantSegment(tz, t2, 0.0)]


def _recip_energy(beta, C, b, t1, t2):
    dt = t2 - t1
    if C == 0.0:
        return (1.0 / beta - 1.0) * dt
    if beta == 0.0:
        return (math.exp(-b * t1) - math.exp(-b * t2)) / (b * C) - dt
    # stable form of [t - log(beta + C e^{bt})/b] / beta
    r1 = beta * math.exp(-b * t1) / C
    r2 = beta * math.exp(-b * t2) / C
    return (math.log1p(r1) - math.log1p(r2)) / (beta * b) - dt


def _temp_const(p, params, T_start, dt):
    Tinf = params.T_eq + params.a * p / params.b
    return Tinf + (T_start - Tinf) * np.exp(-params.b * dt)


def _temp_recip(beta, C, params, T_start, t1, t):
    a, b, Teq = params.a, params.b, params.T_eq
    decay = np.exp(-b * (t - t1))
    if C == 0.0:
        return _temp_const(1.0 / beta - 1.0, params, T_start, t - t1)
    x1 = beta + C * math.exp(b * t1)
    # e^{-bt} * integral of e^{b tau}/(beta + C e^{b tau}) from t1 to t
    grow = np.expm1(b * (t - t1)) * math.exp(b * t1)
    heat = np.exp(-b * t) * np.log1p(C * grow / x1) / (b * C)
    return Teq + (T_start - Teq) * decay + a * (heat - (1.0 - decay) / b)


# -- stand-alone segment propagation ------------------------------------------


def temperature_const_segment(p: float, params: ThermalParams, T_start: float, dt: float) -> float:
    if dt < 0 or p < 0:
        raise ValueError("need dt >= 0 and p >= 0")
    return float(_temp_const(p, params, T_start, dt))


def temperature_recip_segment(beta: float, C: float, params: ThermalParams, T_start: float,
                              t1: float, t2: float) -> float:
    """End temperature of a reciprocal-exponential segment on [t1, t2].

    Raises ``ValueError`` if the power is negative anywhere on the interval.
    """
    if t2 < t1:
        raise ValueError("t1 must not exceed t2")
    if beta < 0 or C < 0 or (beta == 0 and C == 0):
        raise ValueError("beta, C must be non-negative and not both zero")
    if t2 == t1:
        return float(T_start)
    if beta + C * math.exp(params.b * t2) > 1.0 + 1e-12:
        raise ValueError("power changes sign inside [t1, t2]; split at the zero crossing")
    return float(_temp_recip(beta, C, params, T_start, t1, np.float64(t2)))


# -- policies ----------------------------------------------------------------


@dataclass(frozen=True)
class PowerPolicy:
    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("policy needs at least one segment")
        if abs(segs[0].t_start) > 1e-12:
            raise ValueError("policy must start at t=0")
        for s0, s1 in zip(segs, segs[1:]):
            if abs(s0.t_end - s1.t_start) > 1e-9 * max(1.0, abs(s0.t_end)):
                raise ValueError(f"gap or overlap between {s0.t_end} and {s1.t_start}")

    @classmethod
    def constant(cls, p: float, D: float) -> "PowerPolicy":
        return cls((ConstantSegment(0.0, D, p),))

    @property
    def D(self) -> float:
        return self.segments[-1].t_end

    @property
    def boundaries(self) -> np.ndarray:
        return np.array([s.t_start for s in self.segments] + [self.D])

    def _index(self, t, side="right"):
        starts = np.array([s.t_start for s in self.segments])
        idx = np.searchsorted(starts, t, side=side) - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def power(self, t):
        """Right-continuous power; at t = D the last segment's value."""
        t = np.asarray(t, dtype=float)
        idx = self._index(t)
        out = np.empty(t.shape)
        for k in np.unique(idx):
            m = idx == k
            out[m] = self.segments[k].power(t[m])
        return out

    def power_left(self, t):
        """Left limit of the power (the first segment's value at t = 0)."""
        t = np.asarray(t, dtype=float)
        idx = self._index(t, side="left")
        out = np.empty(t.shape)
        for k in np.unique(idx):
            m = idx == k
            out[m] = self.segments[k].power(t[m])
        return out

    def segment_energies(self) -> np.ndarray:
        return np.array([s.energy(s.t_start, s.t_end) for s in self.segments])

    def energy(self, t):
        """Cumulative energy spent on [0, t]."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        cum = np.concatenate([[0.0], np.cumsum(self.segment_energies())])
        idx = self._index(t_arr)
        out = np.empty(t_arr.shape)
        for j, (tt, k) in enumerate(zip(t_arr, idx)):
            seg = self.segments[k]
            tt = min(max(tt, seg.t_start), seg.t_end)
            out[j] = cum[k] + seg.energy(seg.t_start, tt)
        return out if np.ndim(t) else float(out[0])

    def start_temperatures(self, params: ThermalParams, T0: float) -> np.ndarray:
        """Temperature at every segment boundary, including D."""
        Ts = [float(T0)]
        for seg in self.segments:
            Ts.append(float(seg.temperature(seg.t_end, Ts[-1], params)))
        return np.array(Ts)

    def temperature(self, t, params: ThermalParams, T0: float):
        t = np.asarray(t, dtype=float)
        Ts = self.start_temperatures(params, T0)
        idx = self._index(t)
        out = np.empty(t.shape)
        for k in np.unique(idx):
            m = idx == k
            out[m] = self.segments[k].temperature(t[m], Ts[k], params)
        return out

    def throughput(self) -> float:
        return float(sum(s.throughput() for s in self.segments))


@dataclass
class Trajectory:
    t: np.ndarray
    P: np.ndarray
    T: np.ndarray
    B: np.ndarray
    rate: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.rate is None:
            self.rate = 0.5 * np.log2(1.0 + np.asarray(self.P))

    def rows(self):
        return zip(self.t, self.P, self.T, self.B, self.rate)


@dataclass
class FeasibilityReport:
    feasible: bool
    worst_violation: float
    worst_location: float
    active_instants: list
    active_intervals: list = field(default_factory=list)
    tolerance: float = TOL_FEAS


def temperature_trajectory(policy: PowerPolicy, params: ThermalParams, T0: float,
                           n_samples: int = 1001, extra_times: Sequence[float] = ()) -> Trajectory:
    """Exact samples of P, T and cumulative energy.

    The sample set is a uniform grid plus every segment boundary and any
    ``extra_times`` (typically arrival instants).
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    if not (params.T_eq - 1e-12 <= T0 <= params.T_c + 1e-12):
        raise ValueError("initial temperature outside [T_e, T_c]")
    D = policy.D
    t = np.unique(np.concatenate([np.linspace(0.0, D, n_samples), policy.boundaries,
                                  np.asarray(extra_times, dtype=float)]))
    t = t[(t >= 0) & (t <= D)]
    return Trajectory(t=t, P=policy.power(t), T=policy.temperature(t, params, T0), B=policy.energy(t))


def energy_of_policy(policy: PowerPolicy, t: float) -> float:
    if not 0 <= t <= policy.D + 1e-12:
        raise ValueError("t outside [0, D]")
    return float(policy.energy(t))


def throughput_of_policy(policy: PowerPolicy) -> float:
    """Bits delivered over [0, D]."""
    return policy.throughput()


def check_energy_causality(policy: PowerPolicy, profile: ArrivalProfile,
                           tol: float = TOL_FEAS) -> FeasibilityReport:
    """Cumulative energy against the harvest staircase at each epoch end."""
    ends = profile.epoch_ends
    used = policy.energy(ends)
    slack = profile.cumulative - used
    k = int(np.argmin(slack))
    worst = max(0.0, -float(slack[k]))
    active = [float(s) for s, sl in zip(ends, slack) if sl <= TOL_TIGHT]
    return FeasibilityReport(worst <= tol, worst, float(ends[k]), active, tolerance=tol)


def check_temperature(policy: PowerPolicy, params: ThermalParams, T0: float | None = None,
                      tol: float = TOL_FEAS) -> FeasibilityReport:
    """Exact check of T(t) <= T_c over [0, D].

    Each segment is examined at its endpoints and, for the reciprocal kind, at
    its interior maximum (the temperature is unimodal on such a segment, and
    monotone on a constant one).
    """
    if T0 is None:
        T0 = params.T_e
    Ts = policy.start_temperatures(params, T0)
    worst, where = -math.inf, 0.0
    instants = []
    tight_seg = []
    for k, seg in enumerate(policy.segments):
        tm, Tm = seg.temperature_max(Ts[k], params)
        if Tm > worst:
            worst, where = Tm, tm
        for tt, TT in ((seg.t_start, Ts[k]), (tm, Tm), (seg.t_end, Ts[k + 1])):
            if TT >= params.T_c - TOL_TIGHT:
                instants.append(float(tt))
        tight_seg.append(Ts[k] >= params.T_c - TOL_TIGHT and Ts[k + 1] >= params.T_c - TOL_TIGHT)
    intervals = []
    for k, seg in enumerate(policy.segments):
        if tight_seg[k]:
            if intervals and abs(intervals[-1][1] - seg.t_start) < 1e-12:
                intervals[-1] = (intervals[-1][0], seg.t_end)
            else:
                intervals.append((seg.t_start, seg.t_end))
    instants = sorted(set(round(x, 12) for x in instants))
    violation = max(0.0, worst - params.T_c)
    return FeasibilityReport(violation <= tol, violation, float(where), instants,
                             [(float(u), float(v)) for u, v in intervals], tol)
