"""Root finding, quadrature and a reference ODE integrator.

Everything here is deliberately simple and deterministic: bisection instead of
derivative-based root finding, adaptive Simpson instead of a black-box
quadrature routine, and a fixed-step RK4 integrator that only serves as an
oracle for the closed-form temperature propagation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of iterations or subdivisions."""


@dataclass(frozen=True)
class BracketedRootProblem:
    f: Callable[[float], float]
    lo: float
    hi: float
    tol: float = 1e-10
    max_iter: int = 400
    ftol: float = 0.0


@dataclass(frozen=True)
class NestedSolveConfig:
    """Per-level settings for :func:`solve_monotone_system`.

    ``brackets[k]`` is either a fixed ``(lo, hi)`` pair or a callable taking
    the already-fixed outer unknowns (a list) and returning ``(lo, hi)``.
    """

    tols: Sequence[float]
    brackets: Sequence[object]
    max_outer_iter: int = 400
    ftols: Sequence[float] | None = None

    def __post_init__(self):
        if len(self.tols) != len(self.brackets):
            raise ValueError("tols and brackets must have one entry per level")
        if self.ftols is not None and len(self.ftols) != len(self.tols):
            raise ValueError("ftols must have one entry per level")
        if any(t <= 0 for t in self.tols):
            raise ValueError("tolerances must be positive")


def bisect(problem: BracketedRootProblem) -> float:
    """Bisection on a sign-changing bracket.

    Returns the midpoint of the final bracket, whose width is at most
    ``problem.tol`` (or an exact zero if one is hit on the way). An endpoint
    with ``|f| <= problem.ftol`` is accepted as a root, which absorbs rounding
    noise when the root sits on the bracket boundary.
    """
    lo, hi = float(problem.lo), float(problem.hi)
    if not lo <= hi:
        raise BracketError(f"empty bracket [{lo}, {hi}]")
    flo, fhi = problem.f(lo), problem.f(hi)
    if abs(flo) <= problem.ftol:
        return lo
    if abs(fhi) <= problem.ftol:
        return hi
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise BracketError(f"f({lo})={flo} and f({hi})={fhi} do not bracket a root")
    for _ in range(problem.max_iter):
        if hi - lo <= problem.tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket is as narrow as floating point allows
            return mid
        fmid = problem.f(mid)
        if fmid == 0.0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    if hi - lo <= problem.tol:
        return 0.5 * (lo + hi)
    raise ConvergenceError(f"bisection did not reach width {problem.tol} in {problem.max_iter} steps")


def quad_adaptive(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                  max_depth: int = 48) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""
    if b < a:
        raise ValueError("quad_adaptive requires a <= b")
    if b == a:
        return 0.0

    def simpson(fa, fm, fb, h):
        return h * (fa + 4.0 * fm + fb) / 6.0

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = simpson(fa, fm, fb, b - a)
    total = 0.0
    # explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(flo, flm, fmid, mid - lo)
        right = simpson(fmid, frm, fhi, hi - mid)
        delta = left + right - est
        if abs(delta) <= 15.0 * eps or hi - lo < 1e-14 * max(1.0, abs(hi)):
            total += left + right + delta / 15.0
            continue
        if depth >= max_depth:
            raise ConvergenceError(f"subdivision limit reached near t={mid}")
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    return total


def integrate_ode_rk4(power: Callable[[float], float], params, T0: float, t_end: float,
                      step: float):
    """Classical RK4 on dT/dt = a P - b (T - T_e) + c.

    Cumulative energy is integrated alongside with the same scheme. The last
    step is shortened so the trajectory ends exactly at ``t_end``. Reference
    use only; the solvers never call this.
    """
    from .model import Trajectory

    if step <= 0:
        raise ValueError("step must be positive")
    a, b, c, Te = params.a, params.b, params.c, params.T_e

    def rhs(t, T):
        p = power(t)
        return a * p - b * (T - Te) + c, p

    n = max(1, int(math.ceil(t_end / step - 1e-9)))
    ts = np.empty(n + 1)
    Ts = np.empty(n + 1)
    Bs = np.empty(n + 1)
    Ps = np.empty(n + 1)
    t, T, B = 0.0, float(T0), 0.0
    ts[0], Ts[0], Bs[0], Ps[0] = t, T, B, power(0.0)
    for k in range(1, n + 1):
        h = min(step, t_end - t)
        k1, p1 = rhs(t, T)
        k2, p2 = rhs(t + 0.5 * h, T + 0.5 * h * k1)
        k3, _ = rhs(t + 0.5 * h, T + 0.5 * h * k2)
        k4, p4 = rhs(t + h, T + h * k3)
        T += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        B += h * (p1 + 4.0 * p2 + p4) / 6.0
        t = t_end if k == n else t + h
        ts[k], Ts[k], Bs[k], Ps[k] = t, T, B, power(t)
    return Trajectory(t=ts, P=Ps, T=Ts, B=Bs)


def solve_monotone_system(residuals: Sequence[Callable[[list], float]],
                          config: NestedSolveConfig) -> list:
    """Nested bisection for systems whose unknowns can be ordered by level.

    Level ``k`` owns unknown ``x[k]``; ``residuals[k](x)`` must be monotone in
    ``x[k]`` once the deeper unknowns ``x[k+1:]`` are solved for the given
    prefix ``x[:k+1]``. The outermost unknown is ``x[0]``.
    """
    levels = len(residuals)
    if levels != len(config.brackets):
        raise ValueError("one residual per level required")

    def bracket(k, prefix):
        br = config.brackets[k]
        return br(prefix) if callable(br) else br

    def solve_from(k, prefix):
        if k == levels:
            return []

        def f(x):
            inner = solve_from(k + 1, prefix + [x])
            return residuals[k](prefix + [x] + inner)

        lo, hi = bracket(k, prefix)
        ftol = config.ftols[k] if config.ftols is not None else 0.0
        try:
            xk = bisect(BracketedRootProblem(f, lo, hi, config.tols[k], config.max_outer_iter, ftol))
        except BracketError as exc:
            raise BracketError(f"level {k}: {exc}") from exc
        return [xk] + solve_from(k + 1, prefix + [xk])

    return solve_from(0, [])
