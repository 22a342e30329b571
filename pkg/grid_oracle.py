from __future__ import annotations

"""Brute-force verification of the joint solver.

Given (a, T_off) for a user, the remaining variables are fixed by tightness: P_b makes
energy causality tight and f_s makes the offload+edge latency tight. The oracle therefore
searches a 2-D grid per user:
  a     : linspace(0, a_max, a_points)
  T_off : t * (L - (1-a)RB/f_s_max) with t log-spaced in [1e-6, 1] (denser toward 0)
Rows with nothing to offload use T_off = 0, so a = a_max = 1 is the local-only corner.

Users are coupled through the P_b and f_s caps and the shared cooling term:
  I = 1 direct argmin; I = 2 joint enumeration by broadcasting; I = 3 coordinate cycles.
Each refinement level zooms into the neighbouring cells of the incumbent and keeps the
incumbent unless a strictly better point is found.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np

from compute_allocation import Solution
from dual_ascent import ENERGY_FLOOR, subgradients
from load_split import user_a_max
from mec_model import Violation, check_feasibility, cooling_power, total_ap_energy
from mec_utils import Allocation, DualVars, Infeasible, SystemConfig, UserParams, ValidationError
from subproblems import offload_stationarity


log = logging.getLogger(__name__)

T_FRACTION_MIN = 1e-6
MAX_ORACLE_USERS = 3
MAX_CYCLES = 50


@dataclass(frozen=True)
class GridSpec:
    a_points: int = 200
    t_points: int = 200
    refinement_levels: int = 3
    max_evaluations: int = 10_000_000

    def __post_init__(self) -> None:
        if self.a_points < 2 or self.t_points < 2:
            raise ValidationError(f"grid needs at least 2 points per axis, got {self.a_points}x{self.t_points}")
        if self.refinement_levels < 0 or self.max_evaluations < 1:
            raise ValidationError(f"invalid grid spec: {self}")

    @property
    def cells(self) -> int:
        return self.a_points * self.t_points


@dataclass
class _UserGrid:
    """Per-user candidate points, flattened to length K (row-major over a, t)."""

    a: np.ndarray
    t: np.ndarray
    T: np.ndarray
    f_s: np.ndarray
    P_b: np.ndarray
    E_comp: np.ndarray
    P_comp: np.ndarray
    ok: np.ndarray
    a_axis: np.ndarray
    t_axis: np.ndarray


def _evaluate_user(a_axis: np.ndarray, t_axis: np.ndarray, cfg: SystemConfig, u: UserParams) -> _UserGrid:
    L = cfg.compute_window
    A, Tf = np.meshgrid(a_axis, t_axis, indexing="ij")
    nats = (1.0 - A) * u.R
    cycles = nats * u.B
    offloads = cycles > 0.0
    T_hi = L - cycles / cfg.f_s_max
    T = np.where(offloads, Tf * T_hi, 0.0)
    ok = ~offloads | ((T_hi > 0.0) & (T > 0.0))

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        slack = L - T
        f_s = np.where(offloads, cycles / slack, 0.0)
        E_off = np.where(offloads, (cfg.sigma2 / u.g) * T * np.expm1(nats / (T * cfg.w)), 0.0)
        E_loc = (A * u.R * u.B) ** 3 * u.k / (L * L)
        denom = cfg.wpt_window * u.theta * u.H
        need = E_loc + E_off
        P_b = np.where(need > 0.0, need / denom if denom > 0.0 else np.inf, 0.0)
        E_comp = cycles * cfg.delta * f_s**2
        P_comp = cfg.delta * f_s**3

    ok &= np.isfinite(P_b) & np.isfinite(f_s) & (P_b <= cfg.P_b_max) & (f_s <= cfg.f_s_max * (1.0 + 1e-12))
    return _UserGrid(
        a=A.ravel(),
        t=Tf.ravel(),
        T=T.ravel(),
        f_s=f_s.ravel(),
        P_b=P_b.ravel(),
        E_comp=E_comp.ravel(),
        P_comp=P_comp.ravel(),
        ok=ok.ravel(),
        a_axis=a_axis,
        t_axis=t_axis,
    )


def _initial_axes(spec: GridSpec, cfg: SystemConfig, u: UserParams) -> tuple[np.ndarray, np.ndarray]:
    a_axis = np.linspace(0.0, user_a_max(cfg, u), spec.a_points)
    t_axis = np.geomspace(T_FRACTION_MIN, 1.0, spec.t_points)
    return a_axis, t_axis


def _refined_axes(grid: _UserGrid, k: int, spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    ia, it = divmod(int(k), grid.t_axis.size)
    a_lo = grid.a_axis[max(ia - 1, 0)]
    a_hi = grid.a_axis[min(ia + 1, grid.a_axis.size - 1)]
    t_lo = grid.t_axis[max(it - 1, 0)]
    t_hi = grid.t_axis[min(it + 1, grid.t_axis.size - 1)]
    return np.linspace(a_lo, a_hi, spec.a_points), np.linspace(t_lo, t_hi, spec.t_points)


def _objective(cfg: SystemConfig, P_b_sum, E_comp_sum, P_comp_sum):
    return cfg.wpt_window * P_b_sum + E_comp_sum + cooling_power(P_comp_sum, cfg) * cfg.compute_window


def _best_single(g: _UserGrid, cfg: SystemConfig) -> tuple[list[int], float]:
    obj = np.where(g.ok, _objective(cfg, g.P_b, g.E_comp, g.P_comp), np.inf)
    k = int(np.argmin(obj))
    return [k], float(obj[k])


def _best_pair(g1: _UserGrid, g2: _UserGrid, cfg: SystemConfig) -> tuple[list[int], float]:
    P_b = g1.P_b[:, None] + g2.P_b[None, :]
    f_s = g1.f_s[:, None] + g2.f_s[None, :]
    ok = g1.ok[:, None] & g2.ok[None, :] & (P_b <= cfg.P_b_max) & (f_s <= cfg.f_s_max * (1.0 + 1e-12))
    obj = _objective(cfg, P_b, g1.E_comp[:, None] + g2.E_comp[None, :], g1.P_comp[:, None] + g2.P_comp[None, :])
    obj = np.where(ok, obj, np.inf)
    flat = int(np.argmin(obj))
    k1, k2 = divmod(flat, g2.a.size)
    return [k1, k2], float(obj[k1, k2])


def _joint_value(grids: list[_UserGrid], ks: list[int], cfg: SystemConfig) -> float:
    if not all(bool(g.ok[k]) for g, k in zip(grids, ks)):
        return math.inf
    P_b = math.fsum(float(g.P_b[k]) for g, k in zip(grids, ks))
    f_s = math.fsum(float(g.f_s[k]) for g, k in zip(grids, ks))
    if P_b > cfg.P_b_max or f_s > cfg.f_s_max * (1.0 + 1e-12):
        return math.inf
    E_comp = math.fsum(float(g.E_comp[k]) for g, k in zip(grids, ks))
    P_comp = math.fsum(float(g.P_comp[k]) for g, k in zip(grids, ks))
    return float(_objective(cfg, P_b, E_comp, P_comp))


def _best_cycles(grids: list[_UserGrid], cfg: SystemConfig, start: list[int] | None) -> tuple[list[int], float]:
    if start is None:
        start = [_best_single(g, cfg)[0][0] for g in grids]
    ks = list(start)
    best = _joint_value(grids, ks, cfg)
    for _ in range(MAX_CYCLES):
        moved = False
        for j, g in enumerate(grids):
            others = [i for i in range(len(grids)) if i != j]
            P_b = g.P_b + math.fsum(float(grids[i].P_b[ks[i]]) for i in others)
            f_s = g.f_s + math.fsum(float(grids[i].f_s[ks[i]]) for i in others)
            E_comp = g.E_comp + math.fsum(float(grids[i].E_comp[ks[i]]) for i in others)
            P_comp = g.P_comp + math.fsum(float(grids[i].P_comp[ks[i]]) for i in others)
            ok = g.ok & (P_b <= cfg.P_b_max) & (f_s <= cfg.f_s_max * (1.0 + 1e-12))
            for i in others:
                ok &= bool(grids[i].ok[ks[i]])
            obj = np.where(ok, _objective(cfg, P_b, E_comp, P_comp), np.inf)
            k = int(np.argmin(obj))
            if float(obj[k]) < best:
                best = float(obj[k])
                ks[j] = k
                moved = True
        if not moved:
            break
    return ks, best


def _search(grids: list[_UserGrid], cfg: SystemConfig, start: list[int] | None) -> tuple[list[int], float]:
    if len(grids) == 1:
        return _best_single(grids[0], cfg)
    if len(grids) == 2:
        return _best_pair(grids[0], grids[1], cfg)
    return _best_cycles(grids, cfg, start)


def _check_budget(spec: GridSpec, n_users: int) -> None:
    if n_users > MAX_ORACLE_USERS:
        raise ValidationError(f"grid oracle supports at most {MAX_ORACLE_USERS} users, got {n_users}")
    K = spec.cells
    if n_users <= 2:
        per_level = K**n_users
    else:
        per_level = n_users * K * MAX_CYCLES
    total = per_level * (spec.refinement_levels + 1)
    if total > spec.max_evaluations:
        raise ValidationError(
            f"grid of {total} evaluations exceeds the cap of {spec.max_evaluations}; use fewer points"
        )


def grid_search(cfg: SystemConfig, users: list[UserParams], spec: GridSpec | None = None) -> Solution:
    spec = spec or GridSpec()
    _check_budget(spec, len(users))
    L = cfg.compute_window

    grids = [_evaluate_user(*_initial_axes(spec, cfg, u), cfg, u) for u in users]
    ks, best = _search(grids, cfg, None)
    if math.isinf(best):
        raise Infeasible("no grid point satisfies every constraint")
    picks = [(float(g.a[k]), float(g.t[k]), float(g.T[k])) for g, k in zip(grids, ks)]

    for level in range(1, spec.refinement_levels + 1):
        grids = [_evaluate_user(*_refined_axes(g, k, spec), cfg, u) for g, k, u in zip(grids, ks, users)]
        r_ks, r_best = _search(grids, cfg, None)
        if r_best < best:
            best, ks = r_best, r_ks
            picks = [(float(g.a[k]), float(g.t[k]), float(g.T[k])) for g, k in zip(grids, ks)]
        else:
            # keep the incumbent; the next zoom stays centred on it
            ks = [_nearest(g, a, t) for g, (a, t, _) in zip(grids, picks)]
        log.debug("oracle level %d: best %.12g", level, best)
    alloc = _allocation(picks, cfg, users, L)
    report = total_ap_energy(alloc, cfg, users)
    return Solution(
        allocation=alloc,
        report=report,
        dual=DualVars.zeros(len(users)),
        iterations=spec.refinement_levels + 1,
        converged=True,
        scheme="oracle",
    )


def _nearest(g: _UserGrid, a: float, t: float) -> int:
    ia = int(np.argmin(np.abs(g.a_axis - a)))
    it = int(np.argmin(np.abs(g.t_axis - t)))
    return ia * g.t_axis.size + it


def _allocation(picks: list[tuple[float, float, float]], cfg: SystemConfig, users: list[UserParams], L: float) -> Allocation:
    a_vals, f_u, f_s, P_b, T_off = [], [], [], [], []
    for (a, _, T), u in zip(picks, users):
        cycles = (1.0 - a) * u.R * u.B
        nats = (1.0 - a) * u.R
        e_loc = (a * u.R * u.B) ** 3 * u.k / (L * L)
        e_off = (cfg.sigma2 / u.g) * T * math.expm1(nats / (T * cfg.w)) if cycles > 0.0 else 0.0
        need = e_loc + e_off
        a_vals.append(a)
        f_u.append(a * u.R * u.B / L if a > 0.0 else 0.0)
        f_s.append(cycles / (L - T) if cycles > 0.0 else 0.0)
        P_b.append(need / (cfg.wpt_window * u.theta * u.H) if need > 0.0 else 0.0)
        T_off.append(T if cycles > 0.0 else 0.0)
    return Allocation(a=tuple(a_vals), f_u=tuple(f_u), f_s=tuple(f_s), P_b=tuple(P_b), T_off=tuple(T_off))


# ---------------------------------------------------------------------------
# KKT residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KKTReport:
    slackness_lambda: tuple[float, ...]
    slackness_mu: tuple[float, ...]
    slackness_nu: float
    slackness_pi: float
    stationarity: tuple[float, ...]
    primal: tuple[Violation, ...]

    @property
    def max_slackness(self) -> float:
        return max((*self.slackness_lambda, *self.slackness_mu, self.slackness_nu, self.slackness_pi), default=0.0)

    @property
    def max_primal(self) -> float:
        return max((v.residual for v in self.primal), default=0.0)

    @property
    def max_stationarity(self) -> float:
        return max(self.stationarity, default=0.0)

    def to_dict(self) -> dict:
        return {
            "slackness_lambda": list(self.slackness_lambda),
            "slackness_mu": list(self.slackness_mu),
            "slackness_nu": self.slackness_nu,
            "slackness_pi": self.slackness_pi,
            "stationarity": list(self.stationarity),
            "primal": [v.to_dict() for v in self.primal],
        }


def _product(mult: float, slack: float) -> float:
    if mult == 0.0:
        return 0.0
    return abs(mult * slack)


def kkt_residuals(sol: Solution, cfg: SystemConfig, users: list[UserParams]) -> KKTReport:
    alloc, omega = sol.allocation, sol.dual
    scale = max(abs(sol.report.E_total), ENERGY_FLOOR)
    g = subgradients(alloc, alloc.a, cfg, users)

    stationarity = []
    for i, u in enumerate(users):
        lam, mu = omega.lam[i], omega.mu[i]
        if (1.0 - alloc.a[i]) * u.R <= 0.0 or lam <= 0.0 or alloc.T_off[i] <= 0.0:
            stationarity.append(0.0)
            continue
        d = offload_stationarity(lam, mu, alloc.a[i], alloc.T_off[i], cfg, u)
        stationarity.append(abs(d) / (mu if mu > 0.0 else 1.0))

    return KKTReport(
        slackness_lambda=tuple(_product(omega.lam[i], g.lam[i]) / scale for i in range(len(users))),
        slackness_mu=tuple(_product(omega.mu[i], g.mu[i]) / scale for i in range(len(users))),
        slackness_nu=_product(omega.nu, g.nu) / scale,
        slackness_pi=_product(omega.pi, g.pi) / scale,
        stationarity=tuple(stationarity),
        primal=tuple(check_feasibility(alloc, cfg, users)),
    )
