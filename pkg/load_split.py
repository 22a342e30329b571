from __future__ import annotations

"""Load-management half-step: choose the local-computing ratios a.

With (f_s, P_b, T_off) and the multipliers held fixed, the Lagrangian is separable per
user and convex in a_i on [0, a_max]. Each user's minimiser is found by bisection on the
analytic derivative, with endpoint sign checks.

couple_fs=True replaces the fixed f_s by the latency-tight f_s(a) = (1-a)RB/((1-phi)T - T_off)
inside the edge and cooling terms; users are then minimised one at a time with scipy's
bounded scalar minimiser.

entry_ratio and min_power_ratio give the outer loop extra trial points: one for users
that offload nothing (their fixed T_off = 0 rules out every a < 1), one for
splits that need the least WPT power.
"""

from dataclasses import dataclass
import math

from scipy.optimize import bisect, brentq, minimize_scalar

from mec_model import cooling_energy, local_energy, safe_expm1
from mec_utils import Allocation, DegenerateOffload, DualVars, SystemConfig, UserParams
from subproblems import required_wpt_power


@dataclass(frozen=True)
class LoadBounds:
    a_min: tuple[float, ...]
    a_max: tuple[float, ...]


def user_a_max(cfg: SystemConfig, u: UserParams) -> float:
    if u.R <= 0.0:
        return 1.0
    return min(1.0, u.f_u_max * cfg.compute_window / (u.R * u.B))


def load_bounds(cfg: SystemConfig, users: list[UserParams]) -> LoadBounds:
    return LoadBounds(
        a_min=(0.0,) * len(users),
        a_max=tuple(user_a_max(cfg, u) for u in users),
    )


def _coupled_fs(a: float, T_off: float, cfg: SystemConfig, u: UserParams) -> float:
    cycles = (1.0 - a) * u.R * u.B
    if cycles <= 0.0:
        return 0.0
    slack = cfg.compute_window - T_off
    return cycles / slack if slack > 0.0 else math.inf


def _user_terms(
    a: float,
    i: int,
    fixed: Allocation,
    omega: DualVars,
    cfg: SystemConfig,
    u: UserParams,
    f_s: float,
) -> float:
    L = cfg.compute_window
    lam, mu = omega.lam[i], omega.mu[i]
    T_off, P_b = fixed.T_off[i], fixed.P_b[i]
    nats = (1.0 - a) * u.R
    cycles = nats * u.B

    if nats <= 0.0:
        e_off = 0.0
    elif T_off <= 0.0:
        raise DegenerateOffload(f"user {i}: a={a:g} < 1 with T_off = 0")
    else:
        e_off = (cfg.sigma2 / u.g) * T_off * safe_expm1(nats / (T_off * cfg.w))

    if cycles <= 0.0:
        t_exe = 0.0
    elif f_s <= 0.0:
        t_exe = math.inf
    else:
        t_exe = cycles / f_s

    terms = [cycles * cfg.delta * f_s * f_s] if cycles > 0.0 else []
    terms.append(lam * (local_energy(a, cfg, u) + e_off - P_b * cfg.wpt_window * u.theta * u.H))
    if mu > 0.0:
        terms.append(mu * (T_off + t_exe - L))
    else:
        terms.append(0.0)
    return math.fsum(terms)


def lagrangian_a(
    a: list[float] | tuple[float, ...],
    fixed: Allocation,
    omega: DualVars,
    cfg: SystemConfig,
    users: list[UserParams],
    couple_fs: bool = False,
) -> float:
    if couple_fs:
        f_s = [_coupled_fs(a[i], fixed.T_off[i], cfg, u) for i, u in enumerate(users)]
    else:
        f_s = list(fixed.f_s)
    parts = [_user_terms(a[i], i, fixed, omega, cfg, u, f_s[i]) for i, u in enumerate(users)]
    parts.append(cooling_energy(f_s, cfg))
    return math.fsum(parts)


def lagrangian_a_derivative(
    a: float,
    i: int,
    fixed: Allocation,
    omega: DualVars,
    cfg: SystemConfig,
    u: UserParams,
) -> float:
    """d/da_i of the fixed-f_s Lagrangian (requires T_off > 0 and f_s > 0)."""
    L = cfg.compute_window
    lam, mu = omega.lam[i], omega.mu[i]
    T_off, f_s = fixed.T_off[i], fixed.f_s[i]
    rb = u.R * u.B
    growth = safe_expm1((1.0 - a) * u.R / (T_off * cfg.w)) + 1.0
    local = 3.0 * a * a * rb**3 * u.k / (L * L)
    offload = (cfg.sigma2 * u.R / (u.g * cfg.w)) * growth
    return -u.R * cfg.delta * u.B * f_s * f_s + lam * (local - offload) - mu * rb / f_s


def optimize_a(
    fixed: Allocation,
    omega: DualVars,
    cfg: SystemConfig,
    users: list[UserParams],
    couple_fs: bool = False,
    xtol: float = 1e-12,
) -> tuple[float, ...]:
    bounds = load_bounds(cfg, users)
    if couple_fs:
        return _optimize_a_coupled(fixed, omega, cfg, users, bounds, xtol)

    out: list[float] = []
    for i, u in enumerate(users):
        hi = bounds.a_max[i]
        if u.R <= 0.0 or fixed.T_off[i] <= 0.0 or fixed.f_s[i] <= 0.0:
            out.append(hi)
            continue

        def deriv(x: float, i: int = i, u: UserParams = u) -> float:
            return lagrangian_a_derivative(x, i, fixed, omega, cfg, u)

        if deriv(0.0) >= 0.0:
            out.append(0.0)
        elif deriv(hi) <= 0.0:
            out.append(hi)
        else:
            out.append(bisect(deriv, 0.0, hi, xtol=xtol))
    return tuple(out)


def _optimize_a_coupled(
    fixed: Allocation,
    omega: DualVars,
    cfg: SystemConfig,
    users: list[UserParams],
    bounds: LoadBounds,
    xtol: float,
) -> tuple[float, ...]:
    a = list(fixed.a)
    for i, u in enumerate(users):
        hi = bounds.a_max[i]
        if u.R <= 0.0 or fixed.T_off[i] <= 0.0:
            a[i] = hi
            continue

        def obj(x: float, i: int = i) -> float:
            trial = list(a)
            trial[i] = x
            return lagrangian_a(trial, fixed, omega, cfg, users, couple_fs=True)

        res = minimize_scalar(obj, bounds=(0.0, hi), method="bounded", options={"xatol": max(xtol, 1e-10)})
        x, fx = float(res.x), float(res.fun)
        # the bounded method never evaluates the endpoints
        for edge in (0.0, hi):
            fe = obj(edge)
            if fe < fx:
                x, fx = edge, fe
        a[i] = x
    return tuple(a)


def entry_ratio(cfg: SystemConfig, u: UserParams, a_hi: float = 1.0) -> float:
    """Where a user that offloads nothing should move its ratio to.

    A small offload can use almost the whole compute window for transmission while its
    edge cost vanishes faster than linearly, so the one-sided slope at a_hi compares the
    marginal local energy with the marginal transmit energy at T_off = L. The returned
    ratio balances the two; a_hi when staying put is already stationary.
    """
    L = cfg.compute_window
    if u.R <= 0.0 or L <= 0.0:
        return a_hi
    rb = u.R * u.B
    unit = (cfg.sigma2 / u.g) * u.R / cfg.w

    def slope(x: float) -> float:
        local = 3.0 * x * x * rb**3 * u.k / (L * L)
        return local - unit * (safe_expm1((1.0 - x) * u.R / (L * cfg.w)) + 1.0)

    if slope(a_hi) <= 0.0:
        return a_hi
    if slope(0.0) >= 0.0:
        return 0.0
    return brentq(slope, 0.0, a_hi, xtol=1e-12)


def _min_power(a: float, cfg: SystemConfig, u: UserParams) -> float:
    L = cfg.compute_window
    cycles = (1.0 - a) * u.R * u.B
    if cycles <= 0.0:
        return required_wpt_power(a, 0.0, cfg, u)
    t_max = L - cycles / cfg.f_s_max
    if t_max <= 0.0:
        return math.inf
    return required_wpt_power(a, t_max, cfg, u)


def min_power_ratio(cfg: SystemConfig, u: UserParams) -> float:
    """Ratio in the user's load bounds that needs the least WPT power.

    Offloading is timed with the whole window left after edge execution at f_s_max,
    which is the most lenient setting of the other variables.
    """
    hi = user_a_max(cfg, u)
    L = cfg.compute_window
    if u.R <= 0.0 or L <= 0.0:
        return hi
    # below lo the edge alone cannot finish in time
    lo = min(hi, max(0.0, 1.0 - L * cfg.f_s_max / (u.R * u.B)))
    if hi - lo <= 0.0:
        return hi

    res = minimize_scalar(lambda x: _min_power(x, cfg, u), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    best, p_best = float(res.x), float(res.fun)
    for edge in (lo, hi):
        p = _min_power(edge, cfg, u)
        if p < p_best:
            best, p_best = edge, p
    return best
