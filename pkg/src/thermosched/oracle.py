"""Independent discretized primal solver used to cross-check the main solvers.

Power is piecewise constant on a grid. Both constraint families are nested
prefix half-spaces with nonnegative coefficients:

    sum_{i<k} v_i P_i <= r_k

The Euclidean (or diagonally weighted) projection onto one family is an
isotonic quadratic problem in the tail multipliers, solved exactly by pooling.
Dykstra's method combines the two families and the box ``P >= 0``. The ascent
is a projected Newton iteration with the exact (diagonal) Hessian as metric
and Armijo backtracking along the projection arc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import ArrivalProfile, ThermalParams
from .numerics import ConvergenceError

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class DiscreteProblem:
    t: np.ndarray            # grid nodes
    dt: np.ndarray
    temp_coef: np.ndarray    # a * integral of e^{b tau} over each cell
    temp_rhs: np.ndarray     # T_delta e^{b t_k} - T_g for k = 1..n
    energy_end: np.ndarray   # cell index one past each epoch
    energy_rhs: np.ndarray   # cumulative harvest per epoch

    @property
    def n(self) -> int:
        return len(self.dt)

    def objective(self, P) -> float:
        return float(0.5 * np.sum(self.dt * np.log2(1.0 + np.asarray(P))))

    def violations(self, P):
        """(energy, temperature, box) worst violations of ``P``."""
        P = np.asarray(P, dtype=float)
        e = np.cumsum(self.dt * P)[self.energy_end - 1] - self.energy_rhs
        tmp = np.cumsum(self.temp_coef * P) - self.temp_rhs
        return float(max(e.max(), 0.0)), float(max(tmp.max(), 0.0)), float(max(-P.min(), 0.0))

    def dense_rows(self):
        """All constraints as ``(A, r)`` with ``A P <= r``, box excluded."""
        n = self.n
        rows, rhs = [], []
        for k in range(1, n + 1):
            row = np.zeros(n)
            row[:k] = self.temp_coef[:k]
            rows.append(row)
            rhs.append(self.temp_rhs[k - 1])
        for end, r in zip(self.energy_end, self.energy_rhs):
            row = np.zeros(n)
            row[:end] = self.dt[:end]
            rows.append(row)
            rhs.append(r)
        return np.array(rows), np.array(rhs)


def build_discrete(params: ThermalParams, profile: ArrivalProfile, n: int,
                   T0: float | None = None) -> DiscreteProblem:
    """Left-endpoint discretization with exact exponential cell weights.

    Arrival instants that are not already nodes are inserted, so each epoch
    is a whole number of cells.
    """
    if n < 1:
        raise ValueError("n must be positive")
    T0 = params.T_e if T0 is None else T0
    D, b = profile.D, params.b
    nodes = set(np.linspace(0.0, D, n + 1).tolist())
    nodes.update(profile.times)
    t = np.array(sorted(nodes))
    dt = np.diff(t)
    coef = params.a * (np.exp(b * t[1:]) - np.exp(b * t[:-1])) / b
    rhs_T = params.T_delta * np.exp(b * t[1:]) - (T0 - params.T_e)
    ends = np.array([int(np.searchsorted(t, s)) for s in profile.epoch_ends])
    return DiscreteProblem(t, dt, coef, rhs_T, ends, np.cumsum(profile.energies))


@njit(cache=True)
def _project_prefix(z, h, v, gstart, dr):
    """argmin sum h (P - z)^2 / 2 subject to sum_{i < end(g)} v P <= cumsum(dr)."""
    G = dr.shape[0]
    bs = np.empty(G, np.int64)
    be = np.empty(G, np.int64)
    num = np.empty(G)
    den = np.empty(G)
    val = np.empty(G)
    top = 0
    for g in range(G):
        nu = -dr[g]
        de = 0.0
        for i in range(gstart[g], gstart[g + 1]):
            nu += v[i] * z[i]
            de += v[i] * v[i] / h[i]
        bs[top] = g
        be[top] = g + 1
        num[top] = nu
        den[top] = de
        val[top] = nu / de
        top += 1
        while top >= 2 and val[top - 2] < val[top - 1]:
            num[top - 2] += num[top - 1]
            den[top - 2] += den[top - 1]
            be[top - 2] = be[top - 1]
            val[top - 2] = num[top - 2] / den[top - 2]
            top -= 1
    out = z.copy()
    for k in range(top):
        lam = val[k]
        if lam > 0.0:
            for i in range(gstart[bs[k]], gstart[be[k]]):
                out[i] = z[i] - v[i] * lam / h[i]
    return out


@njit(cache=True)
def _dykstra(z, h, tv, tg, tdr, ev, eg, edr, tol, max_cycles):
    x = z.copy()
    pa = np.zeros_like(z)
    pb = np.zeros_like(z)
    pc = np.zeros_like(z)
    for cycle in range(max_cycles):
        # iterates can repeat for a cycle while the corrections still move,
        # so both have to settle
        x_old, pa_old, pb_old, pc_old = x, pa, pb, pc
        ya = _project_prefix(x + pa, h, tv, tg, tdr)
        pa = x + pa - ya
        yb = _project_prefix(ya + pb, h, ev, eg, edr)
        pb = ya + pb - yb
        x = np.maximum(yb + pc, 0.0)
        pc = yb + pc - x
        moved = max(np.max(np.abs(x - x_old)), np.max(np.abs(pa - pa_old)),
                    np.max(np.abs(pb - pb_old)), np.max(np.abs(pc - pc_old)))
        if moved < tol:
            return x, cycle + 1
    return x, -1


def _groups(problem: DiscreteProblem):
    n = problem.n
    tg = np.arange(n + 1, dtype=np.int64)
    tdr = np.diff(np.concatenate([[0.0], problem.temp_rhs]))
    eg = np.concatenate([[0], problem.energy_end]).astype(np.int64)
    edr = np.diff(np.concatenate([[0.0], problem.energy_rhs]))
    return tg, tdr, eg, edr


def dykstra_project(point, problem: DiscreteProblem, weights=None, tol: float = 1e-10,
                    max_cycles: int = 200000) -> np.ndarray:
    """Projection of ``point`` onto the feasible set (weighted by ``weights``)."""
    z = np.asarray(point, dtype=float)
    h = np.ones_like(z) if weights is None else np.asarray(weights, dtype=float)
    tg, tdr, eg, edr = _groups(problem)
    x, cycles = _dykstra(z, h, problem.temp_coef, tg, tdr, problem.dt, eg, edr, tol, max_cycles)
    if cycles < 0:
        raise ConvergenceError("Dykstra projection did not settle")
    return x


@dataclass
class OracleResult:
    P: np.ndarray
    objective: float
    iterations: int
    step_norm: float


def oracle_solve(problem: DiscreteProblem, tol: float = 1e-9, max_iter: int = 500) -> OracleResult:
    """Projected Newton ascent on the discrete throughput.

    Each step projects ``P + H^{-1} grad`` in the ``H`` metric, where ``H`` is
    the diagonal of the negated objective Hessian. Iteration stops once the
    full step moves no cell by more than ``tol``.
    """
    dt = problem.dt
    P = np.zeros(problem.n)
    f = problem.objective(P)
    tg, tdr, eg, edr = _groups(problem)
    step = math.inf
    for it in range(1, max_iter + 1):
        grad = dt / (2.0 * _LN2 * (1.0 + P))
        h = dt / (2.0 * _LN2 * (1.0 + P) ** 2)
        s = 1.0
        while True:
            z = P + s * grad / h
            Q, cycles = _dykstra(z, h, problem.temp_coef, tg, tdr, dt, eg, edr, 1e-12, 200000)
            if cycles < 0:
                raise ConvergenceError("Dykstra projection did not settle")
            Q = np.maximum(Q, 0.0)
            fq = problem.objective(Q)
            if fq >= f + 1e-4 * float(grad @ (Q - P)) or s < 1e-8:
                break
            s *= 0.5
        step = float(np.max(np.abs(Q - P)))
        P, f = Q, fq
        if step <= tol:
            return OracleResult(P, f, it, step)
    raise ConvergenceError(f"oracle did not converge in {max_iter} iterations (last step {step:.3g})")
