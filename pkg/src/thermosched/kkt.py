"""Multipliers, optimality certificates and the solver report type.

Multipliers are kept in the scaled form where stationarity reads

    1/(1 + P(t)) = B(t) + e^{bt} Lambda(t)          wherever P(t) > 0,

with ``B(t)`` the sum of energy multipliers attached to epoch ends after t and
``Lambda(t)`` the tail mass of the temperature multiplier measure on [t, D].
The constant factor 2 ln 2 from the log2 objective is absorbed into both, and
the temperature constraint is taken divided by ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (TOL_TIGHT, ArrivalProfile, FeasibilityReport, PowerPolicy, ThermalParams,
                    check_energy_causality, check_temperature)

CERT_TOL = 1e-5
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class TailMultiplier:
    """Piecewise ``Lambda(t) = A_k`` (flat) or ``A_k e^{-bt}`` (decaying).

    ``edges`` has one more entry than ``amps``; pieces are half-open and the
    last one is also used at ``t = D``, where its value is the terminal atom.
    """

    edges: np.ndarray
    amps: np.ndarray
    decaying: np.ndarray
    b: float

    @classmethod
    def zero(cls, D: float, b: float) -> "TailMultiplier":
        return cls(np.array([0.0, D]), np.zeros(1), np.zeros(1, dtype=bool), b)

    @classmethod
    def from_pieces(cls, pieces, b: float) -> "TailMultiplier":
        """Build from ``(t_start, t_end, amp, decaying)`` tuples, merging nothing."""
        edges = [pieces[0][0]] + [p[1] for p in pieces]
        return cls(np.array(edges, dtype=float), np.array([p[2] for p in pieces], dtype=float),
                   np.array([bool(p[3]) for p in pieces]), b)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.amps) - 1)
        return np.where(self.decaying[k], self.amps[k] * np.exp(-self.b * t), self.amps[k])

    @property
    def terminal_atom(self) -> float:
        return float(self(self.edges[-1]))


@dataclass
class DualState:
    mu: np.ndarray
    Lambda: TailMultiplier
    step_size: float = 0.0
    iterations: int = 0

    def B(self, t, profile: ArrivalProfile):
        """Sum of energy multipliers whose epoch end lies strictly after t."""
        t = np.asarray(t, dtype=float)
        tail = np.concatenate([np.cumsum(self.mu[::-1])[::-1], [0.0]])
        k = np.clip(np.searchsorted(profile.times, t, side="right") - 1, 0, profile.n_epochs - 1)
        return tail[k]


@dataclass
class KKTCertificate:
    stationarity: float
    energy_violation: float
    temperature_violation: float
    energy_slackness: float
    temperature_slackness: float
    dual_infeasibility: float
    gap_estimate: float

    @property
    def max_residual(self) -> float:
        return max(self.stationarity, self.energy_violation, self.temperature_violation,
                   self.energy_slackness, self.temperature_slackness, self.dual_infeasibility)

    def ok(self, tol: float = CERT_TOL) -> bool:
        return self.max_residual <= tol

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


@dataclass
class SolveReport:
    policy: PowerPolicy
    duals: DualState
    params: ThermalParams
    profile: ArrivalProfile
    T0: float
    regime: str
    kkt: KKTCertificate
    throughput: float
    energy_used: float
    t0: float | None = None
    jump_instants: list = field(default_factory=list)
    tight_intervals: list = field(default_factory=list)
    energy_tight: list = field(default_factory=list)
    certified: bool = False
    notes: list = field(default_factory=list)

    @property
    def energy_wasted(self) -> bool:
        return self.profile.total - self.energy_used > TOL_TIGHT

    @property
    def t_h(self):
        """Start of the final stretch held at the ceiling through D, if any."""
        iv = self.tight_intervals
        if iv and abs(iv[-1][1] - self.profile.D) <= 1e-9:
            return iv[-1][0]
        return None

    def summary(self) -> dict:
        mu = [float(m) for m in self.duals.mu]
        return {
            "regime": self.regime,
            "certified": bool(self.certified),
            "throughput_bits": float(self.throughput),
            "energy_used": float(self.energy_used),
            "energy_available": float(self.profile.total),
            "energy_wasted": bool(self.energy_wasted),
            "p_bar": float(self.params.p_bar),
            "t0": None if self.t0 is None else float(self.t0),
            "t_h": None if self.t_h is None else float(self.t_h),
            "jump_instants": [float(x) for x in self.jump_instants],
            "temperature_tight_intervals": [[float(u), float(v)] for u, v in self.tight_intervals],
            "energy_tight_instants": [float(x) for x in self.energy_tight],
            "energy_multipliers": mu,
            "terminal_temperature_atom": float(self.duals.Lambda.terminal_atom),
            "kkt": self.kkt.as_dict(),
            "segments": [_segment_dict(s) for s in self.policy.segments],
            "notes": list(self.notes),
        }


def _segment_dict(seg) -> dict:
    d = {"t_start": float(seg.t_start), "t_end": float(seg.t_end)}
    if hasattr(seg, "p"):
        d.update(kind="constant", p=float(seg.p))
    else:
        d.update(kind="recip_exp", beta=float(seg.beta), C=float(seg.C))
    return d


def certificate_grid(policy: PowerPolicy, profile: ArrivalProfile, duals: DualState,
                     n: int = 4096) -> np.ndarray:
    """Sample instants in [0, D): uniform plus every breakpoint of primal and dual."""
    D = profile.D
    pts = np.concatenate([np.linspace(0.0, D, n + 1), policy.boundaries, profile.times,
                          duals.Lambda.edges])
    pts = np.unique(pts)
    return pts[(pts >= 0.0) & (pts < D)]


def kkt_certificate(policy: PowerPolicy, duals: DualState, profile: ArrivalProfile,
                    params: ThermalParams, T0: float | None = None, n: int = 4096,
                    feas: tuple[FeasibilityReport, FeasibilityReport] | None = None) -> KKTCertificate:
    """Residuals of the optimality conditions on a fine sample grid.

    Stationarity is measured in the scaled units of the module docstring.
    Temperature slackness pairs each cell's multiplier mass
    ``Lambda(t_k) - Lambda(t_{k+1})`` with the scaled slack
    ``e^{b t_k}(T_c - T(t_k))/a``, plus the terminal atom with the slack at D.
    The gap estimate is in bits.
    """
    if T0 is None:
        T0 = params.T_e
    D, b, a = profile.D, params.b, params.a
    t = certificate_grid(policy, profile, duals, n)
    P = policy.power(t)
    Bt = duals.B(t, profile)
    Lam = duals.Lambda(t)
    level = Bt + np.exp(b * t) * Lam
    x = 1.0 / (1.0 + P)
    active = P > 1e-12
    stat = np.where(active, np.abs(x - level), np.maximum(0.0, 1.0 - level))
    stationarity = float(stat.max())

    e_rep, t_rep = feas if feas is not None else (check_energy_causality(policy, profile),
                                                  check_temperature(policy, params, T0))

    mu = np.asarray(duals.mu, dtype=float)
    e_slack = np.maximum(profile.cumulative - policy.energy(profile.epoch_ends), 0.0)
    e_slk = mu * e_slack
    tt = np.append(t, D)
    Lam_all = np.append(Lam, duals.Lambda.terminal_atom)
    mass = np.append(Lam_all[:-1] - Lam_all[1:], Lam_all[-1])
    g = np.maximum(np.exp(b * tt) * (params.T_c - policy.temperature(tt, params, T0)) / a, 0.0)
    t_slk = np.abs(mass) * g

    dual_bad = max(0.0, -float(mu.min(initial=0.0)), -float(Lam_all.min()),
                   float(np.max(-mass[:-1], initial=0.0)))
    gap = (float(e_slk.sum()) + float(t_slk.sum())) / (2.0 * _LN2)
    return KKTCertificate(
        stationarity=stationarity,
        energy_violation=e_rep.worst_violation,
        temperature_violation=t_rep.worst_violation,
        energy_slackness=float(e_slk.max(initial=0.0)),
        temperature_slackness=float(t_slk.max(initial=0.0)),
        dual_infeasibility=dual_bad,
        gap_estimate=gap,
    )


def jump_instants(policy: PowerPolicy, tol: float = 1e-9) -> list:
    cuts = policy.boundaries[1:-1]
    if cuts.size == 0:
        return []
    d = policy.power(cuts) - policy.power_left(cuts)
    return [float(c) for c, j in zip(cuts, d) if abs(j) > tol]


def build_report(policy: PowerPolicy, duals: DualState, params: ThermalParams,
                 profile: ArrivalProfile, T0: float, regime: str, notes=(),
                 n_cert: int = 4096) -> SolveReport:
    """Evaluate feasibility, certificate and structure annotations for a candidate."""
    e_rep = check_energy_causality(policy, profile)
    t_rep = check_temperature(policy, params, T0)
    cert = kkt_certificate(policy, duals, profile, params, T0, n_cert, feas=(e_rep, t_rep))
    t0 = min(t_rep.active_instants) if t_rep.active_instants else None
    rep = SolveReport(
        policy=policy, duals=duals, params=params, profile=profile, T0=T0, regime=regime,
        kkt=cert, throughput=policy.throughput(), energy_used=float(policy.energy(profile.D)),
        t0=t0, jump_instants=jump_instants(policy), tight_intervals=t_rep.active_intervals,
        energy_tight=e_rep.active_instants, notes=list(notes),
    )
    rep.certified = bool(e_rep.feasible and t_rep.feasible and cert.ok())
    return rep
