from __future__ import annotations

"""Physical model of the wireless-powered MEC slot.

Pure functions of (allocation, SystemConfig, UserParams):
  - harvested energy during the WPT phase
  - local computing (latency-tight frequency, time, energy)
  - offloading transmit power and edge execution cost
  - server cooling power (outside-air cubic regime, chilled-water linear regime)
  - the AP-side energy report and constraint residuals

All quantities are SI (s, Hz, W, J); R is in nats.
"""

from dataclasses import dataclass
import math

import numpy as np

from mec_utils import (
    Allocation,
    DegenerateOffload,
    InfeasibleLocalLoad,
    SystemConfig,
    UserParams,
)


def safe_expm1(x: float) -> float:
    """expm1 that saturates to +inf instead of raising OverflowError."""
    if x > 709.0:
        return math.inf
    return math.expm1(x)


def harvested_energy(P_b: float, cfg: SystemConfig, u: UserParams) -> float:
    return P_b * cfg.phi * cfg.T * u.theta * u.H


def local_cpu_frequency(a: float, cfg: SystemConfig, u: UserParams) -> float:
    """Smallest local frequency that finishes a*R nats within (1-phi)T."""
    if a <= 0.0:
        return 0.0
    L = cfg.compute_window
    if L <= 0.0:
        raise InfeasibleLocalLoad("phi = 1 leaves no time for local computing")
    f = a * u.R * u.B / L
    if f > u.f_u_max * (1.0 + 1e-12):
        raise InfeasibleLocalLoad(
            f"local load a={a:g} needs f_u={f:.6g} Hz > f_u_max={u.f_u_max:.6g} Hz"
        )
    return f


def local_energy(a: float, cfg: SystemConfig, u: UserParams) -> float:
    """Local energy at the latency-tight frequency: a^3 R^3 k B^3 / L^2."""
    if a <= 0.0 or u.R == 0.0:
        return 0.0
    L = cfg.compute_window
    return (a * u.R * u.B) ** 3 * u.k / (L * L)


def local_cost(a: float, f_u: float, cfg: SystemConfig, u: UserParams) -> tuple[float, float]:
    if a <= 0.0 or u.R == 0.0:
        return 0.0, 0.0
    cycles = a * u.R * u.B
    if f_u <= 0.0:
        return math.inf, 0.0
    return cycles / f_u, cycles * u.k * f_u * f_u


def offload_tx_power(a: float, T_off: float, cfg: SystemConfig, u: UserParams) -> float:
    nats = (1.0 - a) * u.R
    if nats <= 0.0:
        return 0.0
    if T_off <= 0.0:
        raise DegenerateOffload(f"offloading {nats:g} nats in zero time")
    return (cfg.sigma2 / u.g) * safe_expm1(nats / (T_off * cfg.w))


def offload_energy(a: float, T_off: float, cfg: SystemConfig, u: UserParams) -> float:
    if (1.0 - a) * u.R <= 0.0:
        return 0.0
    return offload_tx_power(a, T_off, cfg, u) * T_off


def edge_cost(a: float, f_s: float, cfg: SystemConfig, u: UserParams) -> tuple[float, float]:
    cycles = (1.0 - a) * u.R * u.B
    if cycles <= 0.0:
        return 0.0, 0.0
    if f_s <= 0.0:
        return math.inf, 0.0
    return cycles / f_s, cycles * cfg.delta * f_s * f_s


def cooling_threshold(cfg: SystemConfig) -> float:
    """P_TH: switch point between the cubic and the mixed cooling regime."""
    if cfg.eps1 <= 0.0:
        return cfg.P_a_max
    return min(cfg.P_a_max, math.sqrt(cfg.eps2 / (3.0 * cfg.eps1)))


def cooling_power(P_comp_total, cfg: SystemConfig):
    """Cooling power for a total server computing power (scalar or ndarray)."""
    p_th = cooling_threshold(cfg)
    if isinstance(P_comp_total, np.ndarray):
        P = P_comp_total
        return np.where(
            P <= p_th,
            cfg.eps1 * P**3,
            cfg.eps1 * p_th**3 + cfg.eps2 * (P - p_th),
        )
    P = float(P_comp_total)
    if P <= p_th:
        return cfg.eps1 * P**3
    return cfg.eps1 * p_th**3 + cfg.eps2 * (P - p_th)


def cooling_slope(P_comp_total: float, cfg: SystemConfig) -> float:
    """Left derivative of cooling_power with respect to the computing power."""
    p_th = cooling_threshold(cfg)
    if P_comp_total <= p_th:
        return 3.0 * cfg.eps1 * P_comp_total**2
    return cfg.eps2


def cooling_energy(f_s: list[float] | tuple[float, ...], cfg: SystemConfig) -> float:
    P = cfg.delta * math.fsum(f**3 for f in f_s)
    return cooling_power(P, cfg) * cfg.compute_window


@dataclass(frozen=True)
class Violation:
    constraint: str
    user: int | None
    residual: float

    def to_dict(self) -> dict:
        return {"constraint": self.constraint, "user": self.user, "residual": self.residual}


@dataclass(frozen=True)
class EnergyReport:
    E_h: tuple[float, ...]
    E_loc: tuple[float, ...]
    E_off: tuple[float, ...]
    E_comp: tuple[float, ...]
    E_wpt: float
    E_cool: float
    E_total: float
    P_comp: float
    violations: tuple[Violation, ...] = ()

    @property
    def E_comp_total(self) -> float:
        return math.fsum(self.E_comp)

    @property
    def E_server(self) -> float:
        """Energy spent at the edge server: task execution plus cooling."""
        return self.E_comp_total + self.E_cool

    @property
    def feasible(self) -> bool:
        return not self.violations


def _residual(lhs: float, rhs: float) -> float:
    if math.isinf(lhs):
        return math.inf
    return (lhs - rhs) / (rhs if rhs > 0.0 else 1.0)


def check_feasibility(
    alloc: Allocation,
    cfg: SystemConfig,
    users: list[UserParams],
    tol: float = 1e-9,
) -> list[Violation]:
    """Signed, RHS-normalised residuals of every violated constraint."""
    out: list[Violation] = []
    L = cfg.compute_window

    def add(cid: str, user: int | None, r: float) -> None:
        if r > tol:
            out.append(Violation(cid, user, r))

    for i, u in enumerate(users):
        a, f_u, f_s, P_b, T_off = alloc.a[i], alloc.f_u[i], alloc.f_s[i], alloc.P_b[i], alloc.T_off[i]

        domain = max(-a, a - 1.0, -f_u, -f_s, -P_b, -T_off)
        add("load_ratio", i, domain)

        E_loc = local_cost(a, f_u, cfg, u)[1]
        try:
            E_off = offload_energy(a, T_off, cfg, u)
        except DegenerateOffload:
            E_off = math.inf
        add("energy_causality", i, _residual(E_loc + E_off, harvested_energy(P_b, cfg, u)))

        t_exe = edge_cost(a, f_s, cfg, u)[0]
        if (1.0 - a) * u.R > 0.0:
            add("offload_latency", i, _residual(T_off + t_exe, L))

        add("local_latency", i, _residual(local_cost(a, f_u, cfg, u)[0], L))
        add("local_frequency", i, _residual(f_u, u.f_u_max))

    add("edge_capacity", None, _residual(math.fsum(alloc.f_s), cfg.f_s_max))
    add("wpt_budget", None, _residual(math.fsum(alloc.P_b), cfg.P_b_max))
    return out


def total_ap_energy(
    alloc: Allocation,
    cfg: SystemConfig,
    users: list[UserParams],
    tol: float = 1e-9,
) -> EnergyReport:
    if alloc.n_users != len(users):
        raise ValueError(f"allocation has {alloc.n_users} users, system has {len(users)}")

    E_h: list[float] = []
    E_loc: list[float] = []
    E_off: list[float] = []
    E_comp: list[float] = []
    for i, u in enumerate(users):
        a = alloc.a[i]
        E_h.append(harvested_energy(alloc.P_b[i], cfg, u))
        E_loc.append(local_cost(a, alloc.f_u[i], cfg, u)[1])
        E_off.append(offload_energy(a, alloc.T_off[i], cfg, u))
        E_comp.append(edge_cost(a, alloc.f_s[i], cfg, u)[1])

    E_wpt = cfg.phi * cfg.T * math.fsum(alloc.P_b)
    P_comp = cfg.delta * math.fsum(f**3 for f in alloc.f_s)
    E_cool = cooling_power(P_comp, cfg) * cfg.compute_window
    E_total = math.fsum([E_wpt, *E_comp, E_cool])

    return EnergyReport(
        E_h=tuple(E_h),
        E_loc=tuple(E_loc),
        E_off=tuple(E_off),
        E_comp=tuple(E_comp),
        E_wpt=E_wpt,
        E_cool=E_cool,
        E_total=E_total,
        P_comp=P_comp,
        violations=tuple(check_feasibility(alloc, cfg, users, tol=tol)),
    )
