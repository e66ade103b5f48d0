"""Reference scenarios with embedded expectations, and seeded random scenarios."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import ArrivalProfile, ThermalParams
from .scenario import Scenario, SolverOptions
from .single import e_critical, solve_unconstrained_energy, t0_infinite_energy

# Energy large enough to never bind in the unlimited-energy presets.
UNLIMITED = 100.0

BASE = ThermalParams(a=0.1, b=0.3, T_e=37.0, T_c=38.0)
COOLING = ThermalParams(a=0.1, b=1.1, T_e=37.0, T_c=37.92)


@dataclass(frozen=True)
class Expectation:
    name: str
    expected: float
    tol: float
    measure: Callable  # report -> float

    def evaluate(self, report) -> dict:
        value = self.measure(report)
        ok = value is not None and abs(value - self.expected) <= self.tol
        return {"name": self.name, "expected": self.expected, "tol": self.tol,
                "value": None if value is None else float(value), "passed": bool(ok)}


def _last_start(rep):
    return rep.tight_intervals[-1][0] if rep.tight_intervals else None


def _jump_at(s):
    def f(rep):
        return 1.0 if any(abs(j - s) <= 1e-12 for j in rep.jump_instants) and \
            float(rep.policy.power(s) - rep.policy.power_left(s)) > 0 else 0.0
    return f


def _T_jump(s):
    def f(rep):
        P = rep.policy
        eps = 1e-9
        T = P.temperature(np.array([s - eps, s, s + eps]), rep.params, rep.T0)
        return float(max(abs(T[1] - T[0]), abs(T[2] - T[1])))
    return f


def _energy_gap(s):
    def f(rep):
        k = list(rep.profile.epoch_ends).index(s)
        return float(rep.profile.cumulative[k] - rep.policy.energy(s))
    return f


def _interval(i, end):
    def f(rep):
        iv = rep.tight_intervals
        return iv[i][end] if len(iv) > i else None
    return f


PRESETS = {
    4: (Scenario(BASE, ArrivalProfile.single(UNLIMITED, 2.0), BASE.T_e, name="figure-4"), [
        Expectation("T(D) - T_c", 0.0, 1e-6,
                    lambda r: float(r.policy.temperature(r.profile.D, r.params, r.T0)) - r.params.T_c),
        Expectation("min P - p_bar > 0", 1.0, 0.0,
                    lambda r: float(r.policy.power(np.linspace(0, 2, 201)).min() > r.params.p_bar)),
    ]),
    5: (Scenario(BASE, ArrivalProfile.single(UNLIMITED, 3.5), BASE.T_e, name="figure-5"), [
        Expectation("t0", 2.993, 1e-3, lambda r: r.t0),
        Expectation("required energy", 17.98, 0.05, lambda r: r.energy_used),
    ]),
    6: (Scenario(BASE, ArrivalProfile.single(17.71, 3.5), BASE.T_e, name="figure-6"), [
        Expectation("t0", 3.2, 0.05, lambda r: r.t0),
    ]),
    7: (Scenario(BASE, ArrivalProfile(5.0, (0.0, 1.5), (6.08, 14.55)), BASE.T_e, name="figure-7"), [
        Expectation("positive jump at 1.5", 1.0, 0.0, _jump_at(1.5)),
        Expectation("saturation start", 3.9, 0.1, _last_start),
        Expectation("temperature jump at 1.5", 0.0, 1e-5, _T_jump(1.5)),
    ]),
    8: (Scenario(COOLING, ArrivalProfile(3.5, (0.0, 2.0), (25.0, 17.0)), COOLING.T_e, name="figure-8"), [
        Expectation("p_bar", 10.12, 1e-9, lambda r: r.params.p_bar),
        Expectation("first contact start", 1.31, 0.05, _interval(0, 0)),
        Expectation("first contact end", 1.66, 0.05, _interval(0, 1)),
        Expectation("final saturation start", 2.23, 0.05, _last_start),
        Expectation("energy used below 42", 1.0, 0.0, lambda r: float(r.energy_used < 42.0)),
        Expectation("energy slack at 2", 0.0, 1e-4, _energy_gap(2.0)),
        Expectation("unlimited-energy hit time", 0.878, 1e-3, lambda r: t0_infinite_energy(r.params)),
    ]),
}


def preset(fig: int) -> Scenario:
    return PRESETS[fig][0]


# -- random scenarios ----------------------------------------------------------


def random_params(rng: np.random.Generator) -> ThermalParams:
    a = float(rng.uniform(0.05, 0.3))
    b = float(rng.uniform(0.2, 1.2))
    T_delta = float(rng.uniform(0.5, 2.0))
    return ThermalParams(a=a, b=b, T_e=37.0, T_c=37.0 + T_delta)


def random_single(rng: np.random.Generator) -> Scenario:
    """One arrival, with E spread across all regimes."""
    params = random_params(rng)
    D = float(rng.uniform(1.0, 5.0))
    lo = 0.5 * e_critical(params, D)
    hi = 1.3 * solve_unconstrained_energy(params, D)[1]
    E = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    return Scenario(params, ArrivalProfile.single(E, D), params.T_e, name="random-single")


def random_two(rng: np.random.Generator) -> Scenario:
    """Two arrivals with energies on the scale of p_bar * D."""
    params = random_params(rng)
    D = float(rng.uniform(2.0, 5.0))
    s1 = float(rng.uniform(0.2, 0.8) * D)
    scale = params.p_bar * D
    E0 = float(rng.uniform(0.05, 0.8) * scale)
    E1 = float(rng.uniform(0.05, 0.8) * scale)
    return Scenario(params, ArrivalProfile(D, (0.0, s1), (E0, E1)), params.T_e, name="random-two")


def random_scenarios(seed: int, count: int, kind: str = "single") -> list:
    gen = {"single": random_single, "two": random_two}[kind]
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        sc = gen(rng)
        sc.name = f"{sc.name}-{seed}-{i}"
        out.append(sc)
    return out


def with_options(sc: Scenario, **kw) -> Scenario:
    opts = SolverOptions(**{**sc.solver.__dict__, **kw})
    return Scenario(sc.params, sc.profile, sc.T0, opts, sc.name)
