from __future__ import annotations

"""Dual decomposition for a fixed local-computing ratio vector a.

Inputs:  a, SystemConfig, list[UserParams], DualOptions, optional start multipliers
Outputs: best multipliers DualVars, DualTrace (one DualIterate per iteration)

Per iteration:
  1. dual_value   - solve the three subproblems at omega, evaluate the Lagrangian
  2. recover_primal - offload time from the closed form, P_b energy-tight, f_s latency-tight
  3. subgradients - constraint slacks at the subproblem minimisers
  4. step         - projected subgradient step on (lambda, mu, nu, pi) with
                    eta(n) = eta0 / sqrt(n + 1). Each slack is divided by its constraint's
                    right-hand side (E_max, L, f_s_max, P_b_max) and each step is scaled
                    by its multiplier (or a reference value while the multiplier is
                    small); mu steps are further divided by the latency slack's
                    sensitivity to mu.
Starts from lambda at the tie value of pi = 0 and mu at reference_mu, or from given
multipliers. Stops when the recovered primal is feasible to `tol` and the relative gap
is below `gap_tol`; raises NonConvergence at the iteration cap.
"""

from dataclasses import dataclass, field
import logging
import math

from mec_model import (
    cooling_slope,
    local_cpu_frequency,
    local_energy,
    offload_energy,
    total_ap_energy,
)
from mec_utils import (
    Allocation,
    DualVars,
    Infeasible,
    InfeasibleLocalLoad,
    LatencyExhausted,
    NonConvergence,
    SystemConfig,
    UserParams,
    ValidationError,
)
from subproblems import (
    edge_objective,
    offload_time_value,
    optimal_offload_time,
    optimal_wpt_power,
    rate_excess,
    required_wpt_power,
    solve_edge_frequencies,
    wpt_coefficient,
)


log = logging.getLogger(__name__)

ENERGY_FLOOR = 1e-12
MIN_SENSITIVITY = 1e-3
# per-iteration bounds on the relative change of a latency price
MAX_MU_GROWTH = 1.0
MAX_MU_SHRINK = 0.5


@dataclass(frozen=True)
class DualOptions:
    eta0: float = 0.1
    max_iter: int = 20000
    gap_tol: float = 1e-3
    tol: float = 1e-6
    g_max: float = 1e3
    lambda_floor: float = 1e-6
    warm_start: bool = True

    def __post_init__(self) -> None:
        if self.eta0 <= 0 or self.max_iter < 1 or self.gap_tol <= 0 or self.tol <= 0:
            raise ValidationError(f"invalid dual options: {self}")
        if self.g_max <= 0 or self.lambda_floor <= 0:
            raise ValidationError(f"invalid dual options: {self}")


@dataclass(frozen=True)
class DualIterate:
    n: int
    omega: DualVars
    value: float
    subgrad_norm: float
    gap: float
    residual: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "value": self.value,
            "subgrad_norm": self.subgrad_norm,
            "gap": self.gap,
            "residual": self.residual,
            **self.omega.to_dict(),
        }


@dataclass
class DualTrace:
    iterates: list[DualIterate] = field(default_factory=list)
    converged: bool = False
    final_gap: float = math.inf
    best_primal: float = math.inf
    best_dual: float = -math.inf


@dataclass(frozen=True)
class Subgradient:
    lam: tuple[float, ...]
    mu: tuple[float, ...]
    nu: float
    pi: float


# ---------------------------------------------------------------------------
# Dual function
# ---------------------------------------------------------------------------


def _offload_cycles(a: float, u: UserParams) -> float:
    return (1.0 - a) * u.R * u.B


def dual_value(
    omega: DualVars,
    a: list[float] | tuple[float, ...],
    cfg: SystemConfig,
    users: list[UserParams],
    f0: tuple[float, ...] | None = None,
    lambda_floor: float = 1e-6,
) -> tuple[float, Allocation]:
    L = cfg.compute_window
    terms: list[float] = []
    f_u: list[float] = []
    P_b: list[float] = []
    T_off: list[float] = []

    for i, u in enumerate(users):
        lam, mu = omega.lam[i], omega.mu[i]
        terms.append(lam * local_energy(a[i], cfg, u))
        terms.append(offload_time_value(lam, mu, a[i], cfg, u))
        terms.append(min(0.0, wpt_coefficient(lam, omega.pi, cfg, u)) * cfg.P_b_max)
        terms.append(-mu * L)

        offloads = (1.0 - a[i]) * u.R > 0.0
        lam_c = max(lam, lambda_floor) if offloads else lam
        t = optimal_offload_time(lam_c, mu, a[i], cfg, u)
        T_off.append(t)
        P_b.append(optimal_wpt_power(lam, omega.pi, a[i], t, cfg, u))
        f_u.append(local_cpu_frequency(a[i], cfg, u))

    f_s = solve_edge_frequencies(omega, a, cfg, users, f0=f0)
    terms.append(edge_objective(f_s, omega, a, cfg, users))
    terms.append(-omega.nu * cfg.f_s_max)
    terms.append(-omega.pi * cfg.P_b_max)

    cand = Allocation(a=tuple(a), f_u=tuple(f_u), f_s=f_s, P_b=tuple(P_b), T_off=tuple(T_off))
    return math.fsum(terms), cand


def subgradients(
    cand: Allocation,
    a: list[float] | tuple[float, ...],
    cfg: SystemConfig,
    users: list[UserParams],
) -> Subgradient:
    L = cfg.compute_window
    g_lam: list[float] = []
    g_mu: list[float] = []
    for i, u in enumerate(users):
        need = local_energy(a[i], cfg, u)
        if (1.0 - a[i]) * u.R > 0.0 and cand.T_off[i] <= 0.0:
            need = math.inf
        else:
            need += offload_energy(a[i], cand.T_off[i], cfg, u)
        g_lam.append(need - cand.P_b[i] * cfg.wpt_window * u.theta * u.H)

        cycles = _offload_cycles(a[i], u)
        if cycles <= 0.0:
            t_exe = 0.0
        elif cand.f_s[i] <= 0.0:
            t_exe = math.inf
        else:
            t_exe = cycles / cand.f_s[i]
        g_mu.append(cand.T_off[i] + t_exe - L)

    return Subgradient(
        lam=tuple(g_lam),
        mu=tuple(g_mu),
        nu=math.fsum(cand.f_s) - cfg.f_s_max,
        pi=math.fsum(cand.P_b) - cfg.P_b_max,
    )


def recover_primal(
    omega: DualVars,
    a: list[float] | tuple[float, ...],
    cfg: SystemConfig,
    users: list[UserParams],
) -> Allocation:
    L = cfg.compute_window
    f_u: list[float] = []
    f_s: list[float] = []
    P_b: list[float] = []
    T_off: list[float] = []
    for i, u in enumerate(users):
        f_u.append(local_cpu_frequency(a[i], cfg, u))
        cycles = _offload_cycles(a[i], u)
        if cycles <= 0.0:
            T_off.append(0.0)
            f_s.append(0.0)
            P_b.append(required_wpt_power(a[i], 0.0, cfg, u))
            continue
        if omega.lam[i] <= 0.0:
            raise ValidationError(f"user {i}: lambda must be > 0 to recover an offloading allocation")
        t = optimal_offload_time(omega.lam[i], omega.mu[i], a[i], cfg, u)
        if t >= L:
            raise LatencyExhausted(f"user {i}: T_off={t:.6g} s leaves no time for edge execution (window {L:.6g} s)")
        T_off.append(t)
        f_s.append(cycles / (L - t))
        P_b.append(required_wpt_power(a[i], t, cfg, u))
    return Allocation(a=tuple(a), f_u=tuple(f_u), f_s=tuple(f_s), P_b=tuple(P_b), T_off=tuple(T_off))


# ---------------------------------------------------------------------------
# Start point
# ---------------------------------------------------------------------------


def check_inner_feasible(a: list[float] | tuple[float, ...], cfg: SystemConfig, users: list[UserParams]) -> None:
    """Raise Infeasible when no (f_s, P_b, T_off) can serve the split a."""
    L = cfg.compute_window
    for i, u in enumerate(users):
        if not (0.0 <= a[i] <= 1.0):
            raise Infeasible(f"user {i}: a={a[i]!r} outside [0, 1]", constraint="load_ratio")
        if u.R > 0.0 and L <= 0.0:
            raise Infeasible("phi = 1 leaves no time for computing", constraint="local_latency")
        try:
            local_cpu_frequency(a[i], cfg, u)
        except InfeasibleLocalLoad as e:
            raise Infeasible(f"user {i}: {e}", constraint="local_frequency") from e

    cycles = [_offload_cycles(a[i], u) for i, u in enumerate(users)]
    for i, c in enumerate(cycles):
        if c > 0.0 and c / cfg.f_s_max >= L:
            raise Infeasible(f"user {i}: edge execution alone exceeds the window", constraint="offload_latency")
    if math.fsum(cycles) / L >= cfg.f_s_max and math.fsum(cycles) > 0.0:
        raise Infeasible("server capacity cannot finish all offloaded cycles in time", constraint="edge_capacity")

    p_min = []
    for i, u in enumerate(users):
        t_max = L - cycles[i] / cfg.f_s_max
        p = required_wpt_power(a[i], t_max if cycles[i] > 0.0 else 0.0, cfg, u)
        if math.isinf(p):
            raise Infeasible(f"user {i}: no harvesting time for a positive energy need", constraint="energy_causality")
        p_min.append(p)
    if math.fsum(p_min) > cfg.P_b_max:
        raise Infeasible(
            f"minimum WPT power {math.fsum(p_min):.6g} W exceeds P_b_max={cfg.P_b_max:.6g} W",
            constraint="wpt_budget",
        )


def tie_lambda(pi: float, cfg: SystemConfig, u: UserParams, floor: float) -> float:
    """The lambda that zeroes the WPT coefficient c."""
    wpt = cfg.wpt_window
    denom = wpt * u.theta * u.H
    if denom <= 0.0:
        return floor
    return max((wpt + pi) / denom, floor)


def reference_mu(
    lam: list[float] | tuple[float, ...],
    a: list[float] | tuple[float, ...],
    cfg: SystemConfig,
    users: list[UserParams],
) -> list[float]:
    """Latency prices that split the compute window evenly between transfer and edge execution.

    The offloading side and the edge side each imply a price for that split and the
    optimal price lies between the two; the start is their geometric mean. Zero for
    users that offload nothing.
    """
    L = cfg.compute_window
    half = 0.5 * L
    cycles = [_offload_cycles(a[i], u) for i, u in enumerate(users)]
    P_half = cfg.delta * math.fsum((c / half) ** 3 for c in cycles if c > 0.0)
    slope = cooling_slope(P_half, cfg)
    out = [0.0] * len(users)
    for i, u in enumerate(users):
        if cycles[i] <= 0.0 or half <= 0.0:
            continue
        y = (1.0 - a[i]) * u.R / (half * cfg.w)
        mu_off = max(lam[i], 0.0) * (cfg.sigma2 / u.g) * rate_excess(y)
        f = cycles[i] / half
        mu_edge = 2.0 * cfg.delta * f**3 + 3.0 * cfg.delta * f**4 * L * slope / cycles[i]
        out[i] = math.sqrt(mu_off * mu_edge) if mu_off > 0.0 else mu_edge
    return out


# ---------------------------------------------------------------------------
# Ascent
# ---------------------------------------------------------------------------


def _clip(x: float, g_max: float) -> float:
    if math.isnan(x):
        return 0.0
    return max(-g_max, min(g_max, x))


def _latency_sensitivity(a: float, T: float, f_s: float, cfg: SystemConfig, u: UserParams) -> float:
    """-mu * d(T_off + t_exe)/d(mu) / L at the subproblem minimisers."""
    L = cfg.compute_window
    if T <= 0.0 or f_s <= 0.0:
        return 1.0
    y = (1.0 - a) * u.R / (T * cfg.w)
    # rate_excess(y) / (y^2 e^y), written to stay finite for large y
    if y < 1e-2:
        rho = rate_excess(y) / (y * y * math.exp(y))
    else:
        rho = (y - 1.0 + math.exp(-y)) / (y * y)
    t_exe = _offload_cycles(a, u) / f_s
    return max((T * rho + t_exe / 3.0) / L, MIN_SENSITIVITY)


def solve_dual(
    a: list[float] | tuple[float, ...],
    cfg: SystemConfig,
    users: list[UserParams],
    opts: DualOptions | None = None,
    start: DualVars | None = None,
) -> tuple[DualVars, DualTrace]:
    opts = opts or DualOptions()
    a = tuple(float(x) for x in a)
    if len(a) != len(users):
        raise ValidationError(f"a has {len(a)} entries, system has {len(users)} users")
    check_inner_feasible(a, cfg, users)

    n_users = len(users)
    L = cfg.compute_window
    floor = opts.lambda_floor
    wpt = cfg.wpt_window
    cycles = [_offload_cycles(a[i], u) for i, u in enumerate(users)]
    offloads = [c > 0.0 for c in cycles]

    lam_ref = [tie_lambda(0.0, cfg, u, floor) for u in users]
    mu_ref = reference_mu(lam_ref, a, cfg, users)
    e_max = [max(wpt * u.theta * u.H * cfg.P_b_max, ENERGY_FLOOR) for u in users]
    nu_ref = max((mu_ref[i] * cycles[i] for i in range(n_users)), default=0.0) * n_users**2 / cfg.f_s_max**2
    nu_ref = max(nu_ref, 1e-300)
    pi_ref = max(wpt, 1e-300)

    if start is not None and opts.warm_start:
        if len(start.lam) != n_users:
            raise ValidationError(f"start multipliers have {len(start.lam)} users, system has {n_users}")
        lam = [max(x, floor) for x in start.lam]
        mu = [start.mu[i] if start.mu[i] > 0.0 else mu_ref[i] for i in range(n_users)]
        nu, pi = start.nu, start.pi
    else:
        lam = list(lam_ref)
        mu = list(mu_ref)
        nu = pi = 0.0
    mu = [m if offloads[i] else 0.0 for i, m in enumerate(mu)]

    trace = DualTrace()
    best_omega: DualVars | None = None
    f_prev: tuple[float, ...] | None = None

    for n in range(opts.max_iter):
        omega = DualVars(lam=tuple(lam), mu=tuple(mu), nu=nu, pi=pi)
        value, cand = dual_value(omega, a, cfg, users, f0=f_prev, lambda_floor=floor)
        f_prev = cand.f_s
        trace.best_dual = max(trace.best_dual, value)

        residual = math.inf
        try:
            primal = recover_primal(omega, a, cfg, users)
            report = total_ap_energy(primal, cfg, users, tol=0.0)
            residual = max((v.residual for v in report.violations), default=0.0)
            if residual <= opts.tol and report.E_total < trace.best_primal:
                trace.best_primal = report.E_total
                best_omega = omega
        except LatencyExhausted as e:
            log.debug("iteration %d: %s", n, e)

        if math.isinf(trace.best_primal):
            gap = math.inf
        else:
            gap = (trace.best_primal - trace.best_dual) / max(abs(trace.best_primal), ENERGY_FLOOR)

        g = subgradients(cand, a, cfg, users)
        g_lam = [_clip(g.lam[i] / e_max[i], opts.g_max) for i in range(n_users)]
        g_mu = [_clip(g.mu[i] / L, opts.g_max) if offloads[i] else 0.0 for i in range(n_users)]
        g_nu = _clip(g.nu / cfg.f_s_max, opts.g_max)
        g_pi = _clip(g.pi / cfg.P_b_max, opts.g_max)
        norm = math.sqrt(math.fsum(x * x for x in g_lam + g_mu) + g_nu * g_nu + g_pi * g_pi)

        trace.iterates.append(DualIterate(n=n, omega=omega, value=value, subgrad_norm=norm, gap=gap, residual=residual))
        trace.final_gap = gap

        if residual <= opts.tol and gap <= opts.gap_tol and best_omega is not None:
            trace.converged = True
            log.debug("dual converged at n=%d, gap=%.3g", n, gap)
            return best_omega, trace

        eta = opts.eta0 / math.sqrt(n + 1.0)
        for i, u in enumerate(users):
            if cand.P_b[i] >= cfg.P_b_max and g_lam[i] > 0.0:
                # sending at P_b_max and still short: grow lambda by a fixed fraction
                lam[i] = lam[i] * (1.0 + eta)
            else:
                lam[i] = max(floor, lam[i] + eta * max(lam[i], lam_ref[i]) * g_lam[i])
            if offloads[i]:
                k = _latency_sensitivity(a[i], cand.T_off[i], cand.f_s[i], cfg, u)
                step = min(MAX_MU_GROWTH, max(-MAX_MU_SHRINK, eta * g_mu[i] / k))
                mu[i] = max(0.0, mu[i] * (1.0 + step))
        nu = max(0.0, nu + eta * max(nu, nu_ref) * g_nu)
        pi = max(0.0, pi + eta * max(pi, pi_ref) * g_pi)

    log.warning("dual ascent hit the iteration cap (%d), gap=%.3g", opts.max_iter, trace.final_gap)
    raise NonConvergence(
        f"dual ascent did not converge in {opts.max_iter} iterations (gap {trace.final_gap:.3g})",
        best=best_omega,
        trace=trace,
    )
