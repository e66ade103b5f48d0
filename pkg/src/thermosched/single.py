"""Closed-form optimal schedules for one energy arrival at t = 0.

Four regimes appear as the initial energy E grows with D fixed:

* E <= E_crit: constant power E/D never reaches T_c.
* E_crit < E <= E_bnd: the temperature first touches T_c exactly at D.
* E_bnd < E < E_req: a reciprocal-exponential ramp hits T_c at t0 < D, then
  the power holds at the saturation level p_bar.
* E >= E_req: energy is no longer binding; surplus is left unused.

Everything reduces to one-dimensional bisections on monotone residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .kkt import DualState, SolveReport, TailMultiplier, build_report
from .model import ArrivalProfile, ConstantSegment, PowerPolicy, ThermalParams, recip_pieces
from .numerics import BracketedRootProblem, NestedSolveConfig, bisect, solve_monotone_system

REGIME_MARGIN = 1e-9


def _require_passive(params: ThermalParams):
    if params.c != 0.0:
        raise ValueError("solvers support only c = 0; use the trajectory simulator for c != 0")


def e_critical(params: ThermalParams, D: float) -> float:
    """Largest E for which constant power E/D stays at or below T_c."""
    if not D > 0:
        raise ValueError("D must be positive")
    return params.p_bar * D / -math.expm1(-params.b * D)


def tc_limit(params: ThermalParams, E: float, D: float) -> float:
    """Temperature reached at D by constant power E/D (T_c is not used)."""
    if not (E >= 0 and D > 0):
        raise ValueError("need E >= 0 and D > 0")
    return params.T_e + (params.a / params.b) * (E / D) * -math.expm1(-params.b * D)


def t0_infinite_energy(params: ThermalParams) -> float:
    """Hit time of T_c for the optimal schedule when energy is unlimited."""
    b, q = params.b, 1.0 / (params.p_bar + 1.0)

    def w(t0):
        return (1.0 - q * math.exp(-b * t0)) / b - t0

    return bisect(BracketedRootProblem(w, 0.0, 1.0 / b, tol=1e-13))


def _ramp_then_hold(params: ThermalParams, beta: float, C: float, t0: float, D: float) -> PowerPolicy:
    segs = recip_pieces(0.0, min(t0, D), beta, C, params.b)
    if t0 < D:
        segs.append(ConstantSegment(t0, D, params.p_bar))
    return PowerPolicy(tuple(segs))


def solve_unconstrained_energy(params: ThermalParams, D: float):
    """Optimal schedule without an energy budget, and the energy it spends."""
    _require_passive(params)
    b, q = params.b, 1.0 / (params.p_bar + 1.0)
    t0 = t0_infinite_energy(params)
    if t0 < D:
        C = q * math.exp(-b * t0)
        policy = _ramp_then_hold(params, 0.0, C, t0, D)
    else:
        C = D / ((params.T_delta / params.a + 1.0 / b) * math.exp(b * D) - 1.0 / b)
        policy = _ramp_then_hold(params, 0.0, C, D, D)
    return policy, float(policy.energy(D))


@dataclass(frozen=True)
class EnergyLimitedSolution:
    policy: PowerPolicy
    beta: float
    C: float
    t0: float

    @property
    def boundary(self) -> bool:
        """True when the ceiling is reached only at the deadline."""
        return self.t0 >= self.policy.D


def _boundary_energy(params: ThermalParams, D: float) -> float:
    """Energy at which the ramp-and-hold hit time reaches D."""
    b, q = params.b, 1.0 / (params.p_bar + 1.0)
    if t0_infinite_energy(params) >= D:
        # the free schedule never saturates, so every budget below it ends on the ceiling at D
        return solve_unconstrained_energy(params, D)[1]
    # t0 = D with continuity and T(D) = T_c: inner bisection on C alone
    def temp_gap(C):
        pol = _ramp_then_hold(params, max(q - C * math.exp(b * D), 0.0), C, D, D)
        return float(pol.temperature(D, params, params.T_e)) - params.T_c

    C = bisect(BracketedRootProblem(temp_gap, 0.0, q * math.exp(-b * D), tol=1e-15))
    return float(_ramp_then_hold(params, max(q - C * math.exp(b * D), 0.0), C, D, D).energy(D))


def solve_energy_limited(params: ThermalParams, E: float, D: float) -> EnergyLimitedSolution:
    """Schedule for E strictly between E_crit and the unconstrained requirement.

    Raises ``BracketError`` if E lies outside that window.
    """
    _require_passive(params)
    b, p_bar, Te, Tc = params.b, params.p_bar, params.T_e, params.T_c
    q = 1.0 / (p_bar + 1.0)

    if E > _boundary_energy(params, D):
        t_inf = t0_infinite_energy(params)

        def c_hi(prefix):
            return 0.0, q * math.exp(-b * prefix[0])

        def policy_of(x):
            t0, C = x
            return _ramp_then_hold(params, max(q - C * math.exp(b * t0), 0.0), C, t0, D)

        def energy_gap(x):
            return float(policy_of(x).energy(D)) - E

        def temp_gap(x):
            return float(policy_of(x).temperature(x[0], params, Te)) - Tc

        lo = min(t_inf * (1.0 + 1e-9) + 1e-12, D)
        config = NestedSolveConfig(tols=(1e-12, 1e-15), brackets=((lo, D), c_hi), ftols=(0.0, 1e-12))
        t0, C = solve_monotone_system((energy_gap, temp_gap), config)
        beta = max(q - C * math.exp(b * t0), 0.0)
        return EnergyLimitedSolution(_ramp_then_hold(params, beta, C, t0, D), beta, C, t0)

    c_max = -math.expm1(-b * D) / (b * (E + D))
    beta_max = 1.0 / (E / D + 1.0)

    def boundary_policy_of(x):
        C, beta = x
        return PowerPolicy(tuple(recip_pieces(0.0, D, beta, C, b)))

    def temp_gap(x):
        return float(boundary_policy_of(x).temperature(D, params, Te)) - Tc

    def energy_gap(x):
        return float(boundary_policy_of(x).energy(D)) - E

    def beta_bracket(prefix):
        # with C = 0 the policy is the constant E/D exactly
        return (0.0 if prefix[0] > 0 else beta_max), beta_max

    config = NestedSolveConfig(tols=(1e-15, 1e-15), brackets=((0.0, c_max), beta_bracket),
                               ftols=(0.0, 1e-12))
    C, beta = solve_monotone_system((temp_gap, energy_gap), config)
    return EnergyLimitedSolution(boundary_policy_of((C, beta)), beta, C, D)


def solve_single(params: ThermalParams, E: float, D: float) -> SolveReport:
    """Dispatch on the energy regime and certify the result."""
    _require_passive(params)
    if not (E > 0 and D > 0):
        raise ValueError("need E > 0 and D > 0")
    b, q = params.b, 1.0 / (params.p_bar + 1.0)
    profile = ArrivalProfile.single(E, D)

    if E <= e_critical(params, D) * (1.0 + REGIME_MARGIN):
        policy = PowerPolicy.constant(E / D, D)
        duals = DualState([1.0 / (E / D + 1.0)], TailMultiplier.zero(D, b))
        return build_report(policy, duals, params, profile, params.T_e, "constant")

    free_policy, E_req = solve_unconstrained_energy(params, D)
    if E >= E_req * (1.0 - REGIME_MARGIN):
        t_inf = t0_infinite_energy(params)
        if t_inf < D:
            C = q * math.exp(-b * t_inf)
            lam = TailMultiplier.from_pieces([(0.0, t_inf, C, False), (t_inf, D, q, True)], b)
            regime = "unconstrained_saturated"
        else:
            C = free_policy.segments[0].C
            lam = TailMultiplier.from_pieces([(0.0, D, C, False)], b)
            regime = "unconstrained_no_saturation"
        duals = DualState([0.0], lam)
        return build_report(free_policy, duals, params, profile, params.T_e, regime,
                            notes=[f"required energy {E_req:.10g}"])

    sol = solve_energy_limited(params, E, D)
    if sol.boundary:
        lam = TailMultiplier.from_pieces([(0.0, D, sol.C, False)], b)
        regime = "energy_limited_boundary"
    else:
        lam = TailMultiplier.from_pieces(
            [(0.0, sol.t0, sol.C, False), (sol.t0, D, q - sol.beta, True)], b)
        regime = "energy_limited_saturated"
    duals = DualState([sol.beta], lam)
    return build_report(sol.policy, duals, params, profile, params.T_e, regime)
