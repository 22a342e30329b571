from __future__ import annotations

"""Joint allocation: alternating outer loop and fixed-ratio baselines.

Schemes:
  - proposed        : alternate (dual solve + primal recovery at fixed a) with the a-step
  - local|full|half : a fixed to 1 / 0 / 0.5, then one inner solve
  - cooling_unaware : proposed with the cooling model switched off, re-evaluated with it

Outer loop (proposed):
  a(0) is the cheapest of three start splits: min(0.5, a_max), full offloading and a_max
  (1 for empty tasks); when none of them is feasible, the per-user split that needs the
  least WPT power is tried before the instance is declared infeasible. Each a-step
  minimises the Lagrangian in a at the current primal/dual point (users that offload
  nothing take their target from entry_ratio instead); the move is halved until the true
  objective does not increase. Trial solves start from the current multipliers. Stops
  when max|da| <= a_tol and the relative objective change <= obj_tol.
"""

from dataclasses import dataclass, field, replace
import logging

from dual_ascent import DualOptions, DualTrace, recover_primal, solve_dual
from load_split import entry_ratio, load_bounds, min_power_ratio, optimize_a
from mec_model import EnergyReport, total_ap_energy
from mec_utils import (
    Allocation,
    DualVars,
    Infeasible,
    NonConvergence,
    SystemConfig,
    UserParams,
    ValidationError,
)


log = logging.getLogger(__name__)

BASELINE_RATIOS: dict[str, float] = {"local": 1.0, "full": 0.0, "half": 0.5}
SCHEMES: tuple[str, ...] = ("proposed", "local", "full", "half", "cooling_unaware")


@dataclass(frozen=True)
class JointOptions:
    a_tol: float = 1e-4
    obj_tol: float = 1e-5
    outer_max: int = 200
    max_backtracks: int = 8
    couple_fs_in_a_step: bool = False
    dual: DualOptions = field(default_factory=DualOptions)

    def __post_init__(self) -> None:
        if self.a_tol <= 0 or self.obj_tol <= 0 or self.outer_max < 1 or self.max_backtracks < 0:
            raise ValidationError(f"invalid joint options: {self}")


@dataclass(frozen=True)
class Solution:
    allocation: Allocation
    report: EnergyReport
    dual: DualVars
    iterations: int
    converged: bool
    scheme: str
    history: tuple[float, ...] = ()
    traces: tuple[DualTrace, ...] = ()


@dataclass(frozen=True)
class _Inner:
    a: tuple[float, ...]
    allocation: Allocation
    report: EnergyReport
    omega: DualVars
    trace: DualTrace
    converged: bool

    @property
    def energy(self) -> float:
        return self.report.E_total


def solve_fixed_a(
    a: tuple[float, ...],
    cfg: SystemConfig,
    users: list[UserParams],
    opts: DualOptions | None = None,
    start: DualVars | None = None,
) -> _Inner:
    """Inner problem at fixed a: dual ascent, then primal recovery."""
    opts = opts or DualOptions()
    try:
        omega, trace = solve_dual(a, cfg, users, opts, start=start)
        converged = True
    except NonConvergence as e:
        if e.best is None:
            raise
        omega, trace, converged = e.best, e.trace, False
    alloc = recover_primal(omega, a, cfg, users)
    report = total_ap_energy(alloc, cfg, users, tol=opts.tol)
    return _Inner(a=tuple(a), allocation=alloc, report=report, omega=omega, trace=trace, converged=converged)


def run_baseline(
    cfg: SystemConfig,
    users: list[UserParams],
    scheme: str,
    opts: JointOptions | None = None,
) -> Solution:
    if scheme not in BASELINE_RATIOS:
        raise ValidationError(f"unknown baseline scheme {scheme!r} (expected one of {', '.join(BASELINE_RATIOS)})")
    opts = opts or JointOptions()
    a = (BASELINE_RATIOS[scheme],) * len(users)
    inner = solve_fixed_a(a, cfg, users, opts.dual)
    return Solution(
        allocation=inner.allocation,
        report=inner.report,
        dual=inner.omega,
        iterations=1,
        converged=inner.converged and inner.report.feasible,
        scheme=scheme,
        history=(inner.energy,),
        traces=(inner.trace,),
    )


def initial_ratios(cfg: SystemConfig, users: list[UserParams]) -> tuple[float, ...]:
    bounds = load_bounds(cfg, users)
    return tuple(1.0 if u.R <= 0.0 else min(0.5, bounds.a_max[i]) for i, u in enumerate(users))


def _offloads_nothing(alloc: Allocation, i: int, u: UserParams) -> bool:
    return u.R > 0.0 and alloc.T_off[i] <= 0.0


def run_joint(
    cfg: SystemConfig,
    users: list[UserParams],
    opts: JointOptions | None = None,
    scheme: str = "proposed",
) -> Solution:
    opts = opts or JointOptions()
    bounds = load_bounds(cfg, users)
    traces: list[DualTrace] = []
    last_error: Infeasible | None = None

    def attempt(a: tuple[float, ...], start: DualVars | None = None) -> _Inner | None:
        nonlocal last_error
        try:
            inner = solve_fixed_a(a, cfg, users, opts.dual, start=start)
        except Infeasible as e:
            last_error = e
            return None
        except NonConvergence as e:
            log.debug("inner solve failed at a=%s: %s", a, e)
            if e.trace is not None:
                traces.append(e.trace)
            return None
        traces.append(inner.trace)
        return inner

    starts = [
        initial_ratios(cfg, users),
        tuple(1.0 if u.R <= 0.0 else 0.0 for u in users),
        bounds.a_max,
    ]
    state = None
    for a0 in dict.fromkeys(starts):
        cand = attempt(a0)
        if cand is not None and (state is None or cand.energy < state.energy):
            state = cand
    if state is None:
        # none of the usual splits works; try the one that needs the least WPT power
        state = attempt(tuple(min_power_ratio(cfg, u) for u in users))
    if state is None:
        constraint = last_error.constraint if last_error else ""
        raise Infeasible("no load split yields a feasible inner problem", constraint=constraint)

    history = [state.energy]
    converged = False
    iterations = 0
    for iterations in range(1, opts.outer_max + 1):
        target = optimize_a(
            state.allocation,
            state.omega,
            cfg,
            users,
            couple_fs=opts.couple_fs_in_a_step,
        )
        target = tuple(
            entry_ratio(cfg, u, bounds.a_max[i]) if _offloads_nothing(state.allocation, i, u) else target[i]
            for i, u in enumerate(users)
        )
        direction = [target[i] - state.a[i] for i in range(len(users))]
        if max((abs(d) for d in direction), default=0.0) == 0.0:
            converged = True
            break

        accepted = None
        scale = max(abs(state.energy), 1e-300)
        for bt in range(opts.max_backtracks + 1):
            t = 0.5**bt
            trial = tuple(
                min(bounds.a_max[i], max(0.0, state.a[i] + t * direction[i])) for i in range(len(users))
            )
            cand = attempt(trial, start=state.omega)
            if cand is not None and cand.energy <= state.energy + 1e-12 * scale:
                accepted = cand
                break
            log.debug("outer %d: backtrack %d rejected", iterations, bt)
        if accepted is None:
            log.debug("outer %d: no descent along the a-step; stopping", iterations)
            converged = True
            break

        da = max(abs(accepted.a[i] - state.a[i]) for i in range(len(users)))
        dobj = abs(state.energy - accepted.energy) / scale
        state = accepted
        history.append(state.energy)
        log.debug("outer %d: E=%.9g da=%.3g dobj=%.3g", iterations, state.energy, da, dobj)
        if da <= opts.a_tol and dobj <= opts.obj_tol:
            converged = True
            break

    if not converged:
        log.warning("outer loop hit its cap (%d iterations)", opts.outer_max)

    return Solution(
        allocation=state.allocation,
        report=state.report,
        dual=state.omega,
        iterations=iterations,
        converged=converged and state.converged and state.report.feasible,
        scheme=scheme,
        history=tuple(history),
        traces=tuple(traces),
    )


def run_cooling_unaware(
    cfg: SystemConfig,
    users: list[UserParams],
    opts: JointOptions | None = None,
) -> Solution:
    """Design without the cooling model, then charge the true cooling energy."""
    blind = replace(cfg, eps1=0.0, eps2=0.0)
    sol = run_joint(blind, users, opts, scheme="cooling_unaware")
    tol = (opts or JointOptions()).dual.tol
    report = total_ap_energy(sol.allocation, cfg, users, tol=tol)
    return replace(sol, report=report, converged=sol.converged and report.feasible)


def solve_scheme(
    scheme: str,
    cfg: SystemConfig,
    users: list[UserParams],
    opts: JointOptions | None = None,
) -> Solution:
    if scheme == "proposed":
        return run_joint(cfg, users, opts)
    if scheme == "cooling_unaware":
        return run_cooling_unaware(cfg, users, opts)
    return run_baseline(cfg, users, scheme, opts)
