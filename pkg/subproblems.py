from __future__ import annotations

"""Solutions of the three per-multiplier subproblems of the dual function.

  - optimal_offload_time: minimiser of lam*E_off(T) + mu*T (Lambert-W closed form)
  - optimal_wpt_power: minimiser of c*P_b over [0, P_b_max], energy-causality-tight on ties
  - solve_edge_frequencies: block-coordinate descent over the server frequency shares,
    each coordinate minimised by scipy's bounded scalar search, which needs no
    derivative at the cooling kink P_TH
"""

from dataclasses import dataclass
import logging
import math

from scipy.optimize import minimize_scalar

from lambertw import INV_E, lambert_w0
from mec_model import cooling_power, local_energy, offload_energy, safe_expm1
from mec_utils import DualVars, NonConvergence, SystemConfig, UserParams


log = logging.getLogger(__name__)

C_TOL = 1e-12
COORD_XTOL = 1e-9


def rate_excess(y: float) -> float:
    """(y - 1) * e^y + 1, the normalised marginal value of offloading time at rate y."""
    if abs(y) < 1e-2:
        y2 = y * y
        return y2 * (0.5 + y * (1.0 / 3.0 + y * (0.125 + y * (1.0 / 30.0 + y * (1.0 / 144.0 + y / 840.0)))))
    return (y - 1.0) * math.exp(y) + 1.0


# ---------------------------------------------------------------------------
# Offloading time
# ---------------------------------------------------------------------------


def optimal_offload_time(lam: float, mu: float, a: float, cfg: SystemConfig, u: UserParams) -> float:
    nats = (1.0 - a) * u.R
    if lam <= 0.0 or nats <= 0.0:
        return 0.0
    if mu <= 0.0:
        # infimum approached as T -> inf; cap at the compute window
        return cfg.compute_window
    q = u.g * mu / (cfg.sigma2 * lam)
    y = lambert_w0(q * INV_E - INV_E).value + 1.0
    if y <= 0.0:
        return cfg.compute_window
    return nats / (cfg.w * y)


def offload_time_value(lam: float, mu: float, a: float, cfg: SystemConfig, u: UserParams) -> float:
    """Infimum of lam*E_off(T) + mu*T over T >= 0."""
    nats = (1.0 - a) * u.R
    if lam <= 0.0 or nats <= 0.0:
        return 0.0
    s = cfg.sigma2 / u.g
    if mu <= 0.0:
        return lam * s * nats / cfg.w
    T = optimal_offload_time(lam, mu, a, cfg, u)
    return lam * s * T * safe_expm1(nats / (T * cfg.w)) + mu * T


def offload_stationarity(lam: float, mu: float, a: float, T_off: float, cfg: SystemConfig, u: UserParams) -> float:
    """d/dT [lam*E_off(T) + mu*T] at T_off."""
    nats = (1.0 - a) * u.R
    if nats <= 0.0 or T_off <= 0.0:
        return mu
    y = nats / (T_off * cfg.w)
    return mu - lam * (cfg.sigma2 / u.g) * rate_excess(y)


# ---------------------------------------------------------------------------
# WPT power
# ---------------------------------------------------------------------------


def wpt_coefficient(lam: float, pi: float, cfg: SystemConfig, u: UserParams) -> float:
    wpt = cfg.wpt_window
    return wpt - lam * wpt * u.theta * u.H + pi


def required_wpt_power(a: float, T_off: float, cfg: SystemConfig, u: UserParams) -> float:
    """Transmit power that makes the energy-causality constraint tight."""
    need = local_energy(a, cfg, u) + offload_energy(a, T_off, cfg, u)
    denom = cfg.wpt_window * u.theta * u.H
    if need <= 0.0:
        return 0.0
    if denom <= 0.0:
        return math.inf
    return need / denom


def optimal_wpt_power(
    lam: float,
    pi: float,
    a: float,
    T_off: float,
    cfg: SystemConfig,
    u: UserParams,
    c_tol: float = C_TOL,
) -> float:
    c = wpt_coefficient(lam, pi, cfg, u)
    band = c_tol * cfg.wpt_window
    if c > band:
        return 0.0
    if c < -band:
        return cfg.P_b_max
    return min(required_wpt_power(a, T_off, cfg, u), cfg.P_b_max)


# ---------------------------------------------------------------------------
# Edge CPU frequencies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _EdgeTerms:
    quad: tuple[float, ...]  # (1-a) R B delta
    inv: tuple[float, ...]  # mu (1-a) R B


def _edge_terms(omega: DualVars, a: list[float] | tuple[float, ...], cfg: SystemConfig, users: list[UserParams]) -> _EdgeTerms:
    quad = []
    inv = []
    for i, u in enumerate(users):
        cycles = (1.0 - a[i]) * u.R * u.B
        quad.append(cycles * cfg.delta)
        inv.append(omega.mu[i] * cycles)
    return _EdgeTerms(tuple(quad), tuple(inv))


def edge_objective(
    f_s: list[float] | tuple[float, ...],
    omega: DualVars,
    a: list[float] | tuple[float, ...],
    cfg: SystemConfig,
    users: list[UserParams],
) -> float:
    """Objective of the edge-frequency subproblem, cooling included."""
    terms = _edge_terms(omega, a, cfg, users)
    total = []
    for i, f in enumerate(f_s):
        if terms.inv[i] > 0.0:
            if f <= 0.0:
                return math.inf
            total.append(terms.inv[i] / f)
        total.append(terms.quad[i] * f * f + omega.nu * f)
    P = cfg.delta * math.fsum(f**3 for f in f_s)
    total.append(cooling_power(P, cfg) * cfg.compute_window)
    return math.fsum(total)


def _coordinate_minimiser(A: float, M: float, rest: float, nu: float, cfg: SystemConfig) -> float:
    """Minimiser over (0, f_s_max] of A x^2 + M/x + nu x + L * cooling(rest + delta x^3)."""
    f_max = cfg.f_s_max
    L = cfg.compute_window
    delta = cfg.delta

    def coord(x: float) -> float:
        return A * x * x + M / x + nu * x + cooling_power(rest + delta * x**3, cfg) * L

    res = minimize_scalar(coord, bounds=(0.0, f_max), method="bounded", options={"xatol": COORD_XTOL * f_max})
    x = float(res.x)
    # the bounded method never evaluates the endpoints
    if coord(f_max) < coord(x):
        return f_max
    return x


def solve_edge_frequencies(
    omega: DualVars,
    a: list[float] | tuple[float, ...],
    cfg: SystemConfig,
    users: list[UserParams],
    f0: list[float] | tuple[float, ...] | None = None,
    sweep_tol: float = 1e-6,
    max_sweeps: int = 200,
) -> tuple[float, ...]:
    terms = _edge_terms(omega, a, cfg, users)
    n = len(users)
    f = [0.0] * n if f0 is None else [float(x) for x in f0]
    active = [i for i in range(n) if terms.inv[i] > 0.0 and a[i] < 1.0]
    for i in range(n):
        if i not in active:
            f[i] = 0.0
    if not active:
        return tuple(f)

    coupled = (cfg.eps1 > 0.0 or cfg.eps2 > 0.0) and len(active) > 1
    for sweep in range(1, max_sweeps + 1):
        biggest = 0.0
        for j in active:
            rest = cfg.delta * math.fsum(f[i] ** 3 for i in active if i != j)
            x_new = _coordinate_minimiser(terms.quad[j], terms.inv[j], rest, omega.nu, cfg)
            biggest = max(biggest, abs(x_new - f[j]))
            f[j] = x_new
        if not coupled or biggest <= sweep_tol * cfg.f_s_max:
            log.debug("edge frequencies settled after %d sweep(s)", sweep)
            return tuple(f)

    raise NonConvergence(
        f"edge-frequency sweeps did not settle within {max_sweeps} sweeps",
        best=tuple(f),
    )
