"""Optimal schedules for several energy arrivals.

The solve runs in three stages.

1. A grid dual. On a grid of piecewise-constant powers the temperature rows
   are exact, because T is monotone inside a constant-power cell. For fixed
   energy multipliers ``mu``, the tail temperature multipliers ``Lambda`` solve
   a separable convex problem under a monotonicity constraint. The pool
   adjacent violators algorithm solves that exactly. The outer problem in
   ``mu`` is smooth and low-dimensional and goes to L-BFGS-B.
2. Structure extraction. The pooled blocks show where the ceiling is active.
   Flat-``Lambda`` blocks are reciprocal-exponential stretches and chains of
   singletons are saturated stretches, so the grid dual gives each stretch's
   ``(beta, C)`` directly.
3. Polish. The extracted structure fixes a small nonlinear system: energy
   tightness, continuity and contact at each entry into the ceiling,
   continuity at each exit, and terminal contact. It is solved in continuous
   time and the result is certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import least_squares, minimize

from .kkt import DualState, SolveReport, TailMultiplier, build_report
from .model import ArrivalProfile, ConstantSegment, PowerPolicy, ThermalParams, recip_pieces

_BIG = 1e3


# -- grid --------------------------------------------------------------------


@dataclass
class Grid:
    x: np.ndarray          # nodes, x[0] = 0, x[-1] = D
    dt: np.ndarray
    w: np.ndarray          # exact integral of e^{bt} over each cell
    ebar: np.ndarray       # w / dt
    epoch: np.ndarray      # epoch index of each cell
    epoch_end_cell: np.ndarray  # first cell after each epoch (exclusive end)
    group_start: np.ndarray     # cell index where each temperature group starts (+ sentinel)
    dR: np.ndarray              # scaled margin increment per group
    rows: np.ndarray            # node index of each temperature row
    R: np.ndarray               # scaled margin at each row
    cumE: np.ndarray


def make_grid(params: ThermalParams, profile: ArrivalProfile, n: int, T0: float,
              rows: str = "all") -> Grid:
    """Uniform grid with every arrival instant placed on a node.

    ``rows="all"`` puts a temperature row at every node after 0; ``"end"``
    keeps only the row at D.
    """
    D, b = profile.D, params.b
    x = np.linspace(0.0, D, n + 1)
    h = D / n
    for s in profile.times[1:]:
        k = int(np.argmin(np.abs(x - s)))
        if abs(x[k] - s) <= 1e-6 * h and 0 < k < n:
            x[k] = s
        else:
            x = np.sort(np.append(x, s))
    dt = np.diff(x)
    w = np.exp(b * x[:-1]) * np.expm1(b * dt) / b
    epoch = np.searchsorted(np.asarray(profile.times), x[:-1], side="right") - 1
    ends = np.searchsorted(x, profile.epoch_ends, side="left")
    Tg = T0 - params.T_e
    row_nodes = np.arange(1, len(x)) if rows == "all" else np.array([len(x) - 1])
    R = (params.T_delta * np.exp(b * x[row_nodes]) - Tg) / params.a
    dR = np.diff(np.concatenate([[0.0], R]))
    gstart = np.concatenate([[0], row_nodes])
    return Grid(x, dt, w, w / dt, epoch, ends, gstart, dR, row_nodes, R, profile.cumulative)


# -- inner problem: pooled adjacent violators ---------------------------------


@njit(cache=True)
def _power_sum(lam, s, e, Bc, eb, w):
    g = 0.0
    dg = 0.0
    for i in range(s, e):
        x = Bc[i] + eb[i] * lam
        if x < 1.0:
            if x <= 0.0:
                return np.inf, -np.inf
            g += w[i] * (1.0 / x - 1.0)
            dg -= w[i] * eb[i] / (x * x)
    return g, dg


@njit(cache=True)
def _block_root(s, e, S, lo, Bc, eb, w, dt):
    """Smallest lam >= lo with sum w_i P_i(lam) <= S (the sum is decreasing)."""
    g, _ = _power_sum(lo, s, e, Bc, eb, w)
    if g <= S:
        return lo
    tot = 0.0
    for i in range(s, e):
        tot += dt[i]
    a = lo
    b = max(lo, 0.0) + tot / S
    # Newton from the left is monotone for a convex decreasing sum
    x = lo if np.isfinite(g) else b
    for _ in range(200):
        g, dg = _power_sum(x, s, e, Bc, eb, w)
        r = g - S
        if r > 0.0:
            a = x
        else:
            b = x
        if abs(r) <= 1e-13 * S or b - a <= 1e-16 * b:
            break
        xn = x - r / dg if np.isfinite(g) and dg < 0.0 else 0.5 * (a + b)
        if not (a < xn < b):
            xn = 0.5 * (a + b)
        elif abs(xn - x) <= 1e-15 * abs(x):
            return xn
        x = xn
    return x


@njit(cache=True)
def _pava(Bc, eb, w, dt, gstart, dR):
    """Nonincreasing nonnegative Lambda per group minimizing the inner dual."""
    G = dR.shape[0]
    bs = np.empty(G, np.int64)   # block first group
    be = np.empty(G, np.int64)   # block last group + 1
    bv = np.empty(G)
    bS = np.empty(G)
    top = 0
    for g in range(G):
        bs[top] = g
        be[top] = g + 1
        bS[top] = dR[g]
        bv[top] = _block_root(gstart[g], gstart[g + 1], dR[g], 0.0, Bc, eb, w, dt)
        top += 1
        while top >= 2 and bv[top - 2] < bv[top - 1]:
            S = bS[top - 2] + bS[top - 1]
            v = _block_root(gstart[bs[top - 2]], gstart[be[top - 1]], S, bv[top - 2],
                            Bc, eb, w, dt)
            be[top - 2] = be[top - 1]
            bS[top - 2] = S
            bv[top - 2] = v
            top -= 1
    lam = np.empty(G)
    for k in range(top):
        for g in range(bs[k], be[k]):
            lam[g] = bv[k]
    return lam


@dataclass
class GridSolution:
    grid: Grid
    mu: np.ndarray
    Lam_group: np.ndarray
    Lam: np.ndarray          # per cell
    P: np.ndarray
    dual_value: float
    iterations: int
    best_feasible_history: list = field(default_factory=list)

    @property
    def objective(self) -> float:
        """Discrete throughput in bits."""
        return float(np.sum(self.grid.dt * np.log1p(self.P)) / (2.0 * math.log(2.0)))

    def energy_slack(self) -> np.ndarray:
        used = np.cumsum(self.P * self.grid.dt)
        return self.grid.cumE - used[self.grid.epoch_end_cell - 1]

    def node_temperature(self, params: ThermalParams, T0: float) -> np.ndarray:
        """Exact temperature at every grid node."""
        x = self.grid.x
        heat = np.concatenate([[0.0], np.cumsum(self.grid.w * self.P)])
        return params.T_e + np.exp(-params.b * x) * ((T0 - params.T_e) + params.a * heat)


def _inner(mu, grid: Grid):
    tail = np.cumsum(mu[::-1])[::-1]
    Bc = tail[grid.epoch]
    lam_g = _pava(Bc, grid.ebar, grid.w, grid.dt, grid.group_start, grid.dR)
    lam = np.repeat(lam_g, np.diff(grid.group_start))
    x = Bc + grid.ebar * lam
    with np.errstate(divide="ignore"):
        P = np.where(x < 1.0, 1.0 / x - 1.0, 0.0)
    phi = np.where(x < 1.0, x - 1.0 - np.log(np.where(x < 1.0, x, 1.0)), 0.0)
    used = np.cumsum(P * grid.dt)[grid.epoch_end_cell - 1]
    value = float(np.sum(grid.dt * phi) + lam_g @ grid.dR + mu @ grid.cumE)
    grad = grid.cumE - used
    return value, grad, lam_g, lam, P


def grid_dual_solve(params: ThermalParams, profile: ArrivalProfile, n: int = 4096,
                    T0: float | None = None, rows: str = "all", max_iter: int = 2000,
                    mu0: np.ndarray | None = None) -> GridSolution:
    """Exact optimum of the piecewise-constant problem via its dual.

    Fine grids are warm-started from a 512-cell solve.
    """
    T0 = params.T_e if T0 is None else T0
    m = profile.n_epochs
    if mu0 is None:
        if n > 512:
            mu0 = grid_dual_solve(params, profile, 512, T0, rows, max_iter).mu
        else:
            mu0 = np.zeros(m)
            mu0[-1] = 1.0 / (1.0 + profile.total / profile.D)
    grid = make_grid(params, profile, n, T0, rows)
    history = []
    best = [-np.inf]

    def fun(mu):
        value, grad, _, _, P = _inner(mu, grid)
        if np.all(grad >= -1e-9):
            obj = float(np.sum(grid.dt * np.log1p(P)) / (2.0 * math.log(2.0)))
            best[0] = max(best[0], obj)
            history.append(best[0])
        return value, grad

    res = minimize(fun, mu0, jac=True, method="L-BFGS-B", bounds=[(0.0, None)] * m,
                   options={"maxiter": max_iter, "ftol": 1e-15,
                            "gtol": 1e-10 * max(1.0, profile.total), "maxcor": 30})
    mu = np.maximum(res.x, 0.0)
    value, grad, lam_g, lam, P = _inner(mu, grid)
    return GridSolution(grid, mu, lam_g, lam, P, value, int(res.nit), history)


# -- structure ---------------------------------------------------------------


@dataclass
class Structure:
    """Alternating free / saturated layout with initial guesses.

    ``sat`` holds ``[u, v]`` guesses; ``free_C`` one value per free stretch,
    in time order; ``terminal`` says the last free stretch keeps a positive
    ``C`` and ends at T_c; ``starts_saturated`` pins the first entry at 0.
    """

    mu: np.ndarray
    active: list
    sat: list
    free_C: list
    terminal: bool
    starts_saturated: bool = False
    ends_saturated: bool = False

    def copy(self) -> "Structure":
        return Structure(self.mu.copy(), list(self.active), [list(s) for s in self.sat],
                         list(self.free_C), self.terminal, self.starts_saturated, self.ends_saturated)


def _structure_from_grid(sol: GridSolution, params: ThermalParams, T0: float,
                         mu_tol: float = 1e-9) -> Structure:
    g = sol.grid
    x, lam = g.x, sol.Lam
    n = len(g.dt)
    lam_next = np.append(lam[1:], 0.0)
    # lambda mass at node k+1 (end of cell k)
    atom = lam - lam_next
    scale = max(float(lam.max(initial=0.0)), 1e-300)
    active_node = np.zeros(n + 1, dtype=bool)
    active_node[1:] = atom > 1e-12 * scale
    if T0 >= params.T_c - 1e-12:
        active_node[0] = True
    sat = []
    k = 0
    while k <= n:
        if active_node[k]:
            m = k
            while m + 1 <= n and active_node[m + 1]:
                m += 1
            if m > k or (0 < k < n):
                sat.append([float(x[k]), float(x[m])])
            k = m + 1
        else:
            k += 1
    starts = bool(sat and sat[0][0] == 0.0 and active_node[0])
    ends = bool(sat and sat[-1][1] >= x[-1])
    free_C = []
    bounds = [0.0] + [p for s in sat for p in s] + [float(x[-1])]
    for l, r in zip(bounds[::2], bounds[1::2]):
        if r > l or (l == 0.0 and not starts):
            mid = 0.5 * (l + r)
            i = min(int(np.searchsorted(x, mid, side="right")) - 1, n - 1)
            free_C.append(float(lam[i]))
    terminal = bool(active_node[n]) and not ends
    if not terminal and not ends and free_C:
        free_C[-1] = 0.0
    active = [j for j, m in enumerate(sol.mu) if m > mu_tol]
    return Structure(sol.mu.copy(), active, sat, free_C, terminal, starts, ends)


class _Layout:
    """Maps an unknown vector to a policy and tail multiplier."""

    def __init__(self, st: Structure, params: ThermalParams, profile: ArrivalProfile, T0: float):
        self.st, self.params, self.profile, self.T0 = st, params, profile, T0
        self.n_mu = len(st.active)
        self.n_sat = len(st.sat)
        self.n_free = len(st.free_C)
        # last free C is fixed at zero unless the terminal contact holds
        self.fix_last_C = (not st.terminal) and (not st.ends_saturated) and self.n_free > 0
        self.n_C = self.n_free - (1 if self.fix_last_C else 0)

    def x0(self):
        st = self.st
        u = [s[0] for s in st.sat][(1 if st.starts_saturated else 0):]
        v = [s[1] for s in st.sat][: self.n_sat - (1 if st.ends_saturated else 0)]
        return np.array([st.mu[j] for j in st.active] + st.free_C[: self.n_C] + u + v, dtype=float)

    def unpack(self, z):
        st, D = self.st, self.profile.D
        i = 0
        mu = np.zeros(self.profile.n_epochs)
        for j in st.active:
            mu[j] = z[i]
            i += 1
        C = list(z[i:i + self.n_C]) + ([0.0] if self.fix_last_C else [])
        i += self.n_C
        nu = self.n_sat - (1 if st.starts_saturated else 0)
        u = ([0.0] if st.starts_saturated else []) + list(z[i:i + nu])
        i += nu
        nv = self.n_sat - (1 if st.ends_saturated else 0)
        v = list(z[i:i + nv]) + ([D] if st.ends_saturated else [])
        return mu, C, u, v

    def bounds(self):
        D = self.profile.D
        nu = self.n_sat - (1 if self.st.starts_saturated else 0)
        nv = self.n_sat - (1 if self.st.ends_saturated else 0)
        lo = [0.0] * (self.n_mu + self.n_C) + [0.0] * (nu + nv)
        hi = [np.inf] * (self.n_mu + self.n_C) + [D] * (nu + nv)
        return np.array(lo), np.array(hi)

    def pieces(self, C, u, v):
        """Free stretches as (l, r, C) and saturated ones as (u, v)."""
        D = self.profile.D
        cuts = [0.0] + [p for pair in zip(u, v) for p in pair] + [D]
        free = []
        ci = 0
        for l, r in zip(cuts[::2], cuts[1::2]):
            if r > l or (l == 0.0 and not self.st.starts_saturated):
                free.append((l, r, C[ci]))
                ci += 1
        return free, list(zip(u, v))

    def build(self, z):
        """Policy and multiplier for ``z``, or None when the layout is invalid."""
        mu, C, u, v = self.unpack(z)
        if np.any(mu < -1e-14) or any(c < -1e-14 for c in C):
            return None
        cuts = [0.0] + [p for pair in zip(u, v) for p in pair] + [self.profile.D]
        if any(r < l for l, r in zip(cuts, cuts[1:])):
            return None
        for ui, vi in zip(u, v):
            if not vi > ui:
                return None
        free, sat = self.pieces(C, u, v)
        if len(free) != len(C):
            return None
        times = np.asarray(self.profile.times)
        tail = np.concatenate([np.cumsum(mu[::-1])[::-1], [0.0]])
        q = 1.0 / (self.params.p_bar + 1.0)
        b = self.params.b
        segs, lam = [], []
        items = [(l, r, c, False) for l, r, c in free] + [(a_, b_, None, True) for a_, b_ in sat]
        items.sort(key=lambda it: it[0])
        for l, r, c, saturated in items:
            if r <= l:
                continue
            cuts_in = [l] + [float(s) for s in times if l < s < r] + [r]
            for a_, b_ in zip(cuts_in, cuts_in[1:]):
                k = int(np.searchsorted(times, a_, side="right")) - 1
                beta = float(tail[k])
                if saturated:
                    segs.append(ConstantSegment(a_, b_, self.params.p_bar))
                    lam.append((a_, b_, q - beta, True))
                else:
                    c = max(float(c), 0.0)
                    if beta <= 0.0 and c <= 0.0:
                        return None
                    segs.extend(recip_pieces(a_, b_, max(beta, 0.0), c, b))
                    lam.append((a_, b_, c, False))
        try:
            policy = PowerPolicy(tuple(segs))
        except ValueError:
            return None
        return policy, DualState(mu, TailMultiplier.from_pieces(lam, b)), (mu, C, u, v)

    def residuals(self, z):
        built = self.build(z)
        size = self.n_mu + self.n_C + 2 * self.n_sat - int(self.st.starts_saturated) \
            - int(self.st.ends_saturated)
        if built is None:
            return np.full(size, _BIG)
        policy, duals, (mu, C, u, v) = built
        params, profile = self.params, self.profile
        b, Tc, dT = params.b, params.T_c, params.T_delta
        q = 1.0 / (params.p_bar + 1.0)
        times = np.asarray(profile.times)
        tail = np.concatenate([np.cumsum(mu[::-1])[::-1], [0.0]])
        ends = profile.epoch_ends
        res = []
        for j in self.st.active:
            res.append((float(policy.energy(ends[j])) - profile.cumulative[j]) / max(profile.total, 1e-12))
        free, sat = self.pieces(C, u, v)
        free_by_end = {r: c for l, r, c in free}
        free_by_start = {l: c for l, r, c in free}
        Tfun = lambda t: float(policy.temperature(t, params, self.T0))  # noqa: E731
        for k, (ui, vi) in enumerate(sat):
            if not (k == 0 and self.st.starts_saturated):
                kk = int(np.searchsorted(times, ui, side="left")) - 1
                kk = max(kk, 0)
                Cp = free_by_end.get(ui, 0.0)
                res.append((tail[kk] + Cp * math.exp(b * ui)) / q - 1.0)
                res.append((Tfun(ui) - Tc) / dT)
            if not (k == len(sat) - 1 and self.st.ends_saturated):
                kk = int(np.searchsorted(times, vi, side="right")) - 1
                Cn = free_by_start.get(vi, 0.0)
                res.append((tail[kk] + Cn * math.exp(b * vi)) / q - 1.0)
        if self.st.terminal:
            res.append((Tfun(profile.D) - Tc) / dT)
        out = np.array(res, dtype=float)
        if out.size != size:
            return np.full(size, _BIG)
        return out


def extract_structure(sol: GridSolution, profile: ArrivalProfile, params: ThermalParams,
                      T0: float | None = None, tol: float = 1e-6):
    """Symbolic policy read off a grid solution.

    Each stretch of constant ``Lambda`` within an epoch becomes a
    reciprocal-exponential segment with ``beta`` equal to the epoch's energy
    multiplier sum and ``C`` equal to ``Lambda``, and saturated stretches
    become ``Constant(p_bar)``. The fit is checked against the grid powers at
    the cell-equivalent instants ``t* = log(ebar)/b``. The result is
    ``(policy, duals, structure, ok)``. When ``ok`` is False the policy is the
    piecewise-constant grid policy.
    """
    T0 = params.T_e if T0 is None else T0
    st = _structure_from_grid(sol, params, T0)
    layout = _Layout(st, params, profile, T0)
    built = layout.build(layout.x0())
    ok = False
    if built is not None:
        policy, duals, _ = built
        g = sol.grid
        t_star = np.log(g.ebar) / params.b
        Bc = np.concatenate([np.cumsum(sol.mu[::-1])[::-1]])[g.epoch]
        fit = np.maximum(1.0 / (Bc + np.exp(params.b * t_star) * sol.Lam) - 1.0, 0.0)
        ok = bool(np.max(np.abs(fit - sol.P)) <= 5 * tol * max(1.0, sol.P.max()))
    if not ok or built is None:
        policy, duals = grid_policy(sol, params)
    return policy, duals, st, ok


def grid_policy(sol: GridSolution, params: ThermalParams):
    """Piecewise-constant policy and multipliers taken directly from the grid."""
    g = sol.grid
    segs = tuple(ConstantSegment(float(l), float(r), float(p))
                 for l, r, p in zip(g.x[:-1], g.x[1:], sol.P))
    lam = TailMultiplier(g.x.copy(), sol.Lam.copy(), np.zeros(len(sol.Lam), dtype=bool), params.b)
    return PowerPolicy(segs), DualState(sol.mu.copy(), lam, iterations=sol.iterations)


def _alternatives(st: Structure, sol: GridSolution):
    """Nearby layouts to try when the primary one does not certify."""
    h = float(np.max(sol.grid.dt))
    out = []
    short = [k for k, (u, v) in enumerate(st.sat) if v - u <= 2.5 * h
             and not (k == 0 and st.starts_saturated) and not (k == len(st.sat) - 1 and st.ends_saturated)]
    for k in short:
        alt = st.copy()
        # drop stretch k and merge the free stretches around it
        fi = k + (0 if st.starts_saturated else 1)
        c_right = alt.free_C[fi] if fi < len(alt.free_C) else 0.0
        del alt.sat[k]
        if fi < len(alt.free_C):
            del alt.free_C[fi]
            alt.free_C[fi - 1] = max(alt.free_C[fi - 1], c_right)
        out.append(alt)
    slack = sol.energy_slack()
    for j in range(len(st.mu)):
        alt = st.copy()
        if j in alt.active:
            alt.active.remove(j)
        elif slack[j] < 1e-3 * max(sol.grid.cumE[-1], 1.0):
            alt.active.append(j)
            alt.active.sort()
            alt.mu[j] = max(alt.mu[j], 1e-6)
        else:
            continue
        out.append(alt)
    if not st.terminal and st.free_C and not st.ends_saturated:
        alt = st.copy()
        alt.terminal = True
        alt.free_C[-1] = max(float(sol.Lam[-1]), 1e-8)
        out.append(alt)
    return out


def _polish(st: Structure, params, profile, T0):
    layout = _Layout(st, params, profile, T0)
    z0 = layout.x0()
    if z0.size == 0:
        built = layout.build(z0)
        return built
    lo, hi = layout.bounds()
    z0 = np.clip(z0, lo, hi)
    if layout.build(z0) is None:
        return None
    try:
        res = least_squares(layout.residuals, z0, bounds=(lo, hi), method="trf",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400, x_scale="jac")
    except ValueError:
        return None
    if not np.all(np.isfinite(res.fun)) or np.max(np.abs(res.fun)) > 1e-9:
        return None
    return layout.build(res.x)


def solve_multi(params: ThermalParams, profile: ArrivalProfile, grid_n: int = 4096,
                tol: float = 1e-6, T0: float | None = None) -> SolveReport:
    """Certified optimal schedule for an arbitrary arrival profile."""
    if params.c != 0.0:
        raise ValueError("solvers support only c = 0; use the trajectory simulator for c != 0")
    if grid_n < 256:
        raise ValueError("grid_n must be at least 256")
    T0 = params.T_e if T0 is None else float(T0)
    if not params.T_e <= T0 <= params.T_c:
        raise ValueError("T0 must lie in [T_e, T_c]")
    b = params.b
    if profile.total <= 0.0:
        mu = np.zeros(profile.n_epochs)
        mu[-1] = 1.0
        duals = DualState(mu, TailMultiplier.zero(profile.D, b))
        return build_report(PowerPolicy.constant(0.0, profile.D), duals, params, profile, T0,
                            "zero_energy")

    sol = grid_dual_solve(params, profile, grid_n, T0)
    policy, duals, st, fit_ok = extract_structure(sol, profile, params, T0, tol)
    notes = [f"grid objective {sol.objective:.10g}", f"dual iterations {sol.iterations}"]
    best = None
    for cand in [st] + _alternatives(st, sol):
        built = _polish(cand, params, profile, T0)
        if built is None:
            continue
        pol, du, _ = built
        du.iterations = sol.iterations
        rep = build_report(pol, du, params, profile, T0, "multi", notes)
        if rep.certified:
            return rep
        if best is None or rep.kkt.max_residual < best.kkt.max_residual:
            best = rep
    fallback = build_report(policy, duals, params, profile, T0, "multi_grid",
                            notes + ["continuous polish failed; grid policy returned"])
    if best is not None and best.kkt.max_residual < fallback.kkt.max_residual:
        best.notes.append("polish did not certify")
        return best
    return fallback


# -- restricted window --------------------------------------------------------


def restricted_interval_solve(params: ThermalParams, t1: float, t2: float, T_start: float,
                              energies, grid_n: int = 4096) -> PowerPolicy:
    """Window solve with the ceiling imposed only at the window end.

    ``energies`` lists ``(time, energy)`` arrivals in absolute time, the first
    at ``t1``. The returned policy is in window time, starting at 0. When
    ``T_start`` is already at the ceiling, any power above ``p_bar`` near the
    start would overshoot. The answer then is the constant
    ``min(p_bar, E/(t2 - t1))`` for a single arrival, and the full-ceiling
    solve from ``T_start`` otherwise.
    """
    if not t2 > t1:
        raise ValueError("need t1 < t2")
    if not params.T_e <= T_start <= params.T_c:
        raise ValueError("T_start must lie in [T_e, T_c]")
    arr = sorted((float(s) - t1, float(e)) for s, e in energies)
    if not arr or abs(arr[0][0]) > 1e-12:
        raise ValueError("first sub-arrival must be at t1")
    if any(not 0.0 <= s < t2 - t1 for s, _ in arr):
        raise ValueError("sub-arrivals must lie in [t1, t2)")
    L = t2 - t1
    profile = ArrivalProfile(L, tuple(s for s, _ in arr), tuple(e for _, e in arr))
    if T_start >= params.T_c - 1e-12:
        if profile.n_epochs == 1:
            return PowerPolicy.constant(min(params.p_bar, profile.total / L), L)
        return solve_multi(params, profile, grid_n, T0=T_start).policy
    sol = grid_dual_solve(params, profile, grid_n, T_start, rows="end")
    tail = np.cumsum(sol.mu[::-1])[::-1]
    C = float(sol.Lam_group[0])
    segs = []
    times = list(profile.times) + [L]
    for k, (a_, b_) in enumerate(zip(times, times[1:])):
        beta = float(tail[k])
        if beta <= 0.0 and C <= 0.0:
            raise ValueError("degenerate multipliers in restricted solve")
        segs.extend(recip_pieces(a_, b_, max(beta, 0.0), C, params.b))
    return PowerPolicy(tuple(segs))
