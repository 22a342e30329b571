#mec_utils.py
from __future__ import annotations

"""Shared types, configuration parsing, errors and JSON helpers.

Everything here is plain data: the physical system (SystemConfig), one user's task and
channel (UserParams), a decision vector (Allocation) and the Lagrange multipliers
(DualVars). Defaults follow the parameter table used for the experiments.
"""

from dataclasses import dataclass, fields
from pathlib import Path
import json
import logging
import math
import sys


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class MecError(Exception):
    """Base class for every solver error."""


class ValidationError(MecError, ValueError):
    pass


class ParseError(MecError, ValueError):
    def __init__(self, msg: str, line: int | None = None, key: str | None = None) -> None:
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key:
            where.append(f"key {key!r}")
        super().__init__(f"{msg} ({', '.join(where)})" if where else msg)
        self.line = line
        self.key = key


class InfeasibleLocalLoad(MecError, ValueError):
    """Latency-tight local frequency exceeds the chip limit."""


class DegenerateOffload(MecError, ArithmeticError):
    """A positive offload amount with zero offloading time."""


class DomainError(MecError, ValueError):
    pass


class LatencyExhausted(MecError, RuntimeError):
    """Offloading time leaves no room for edge execution."""


class Infeasible(MecError):
    def __init__(self, msg: str, constraint: str = "") -> None:
        super().__init__(f"[{constraint}] {msg}" if constraint else msg)
        self.constraint = constraint


class NonConvergence(MecError, RuntimeError):
    def __init__(self, msg: str, best: object = None, trace: object = None) -> None:
        super().__init__(msg)
        self.best = best
        self.trace = trace


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


SYSTEM_DEFAULTS: dict[str, float] = {
    "T": 0.2,
    "phi": 0.4,
    "W": 5e6,
    "I": 5,
    "f_s_max": 2e9,
    "P_b_max": 20.0,
    "sigma2": 1e-9,
    "delta": 1e-26,
    "eps1": 1e-3,
    "eps2": 0.5,
    "P_a_max": 10.0,
}

USER_DEFAULTS: dict[str, float] = {
    "R": 1.5e3,
    "B": 1e3,
    "k": 1e-26,
    "f_u_max": 1e9,
    "theta": 0.3,
    "H": 1e-3,
    "g": 1e-7,
}


def _finite(name: str, v: float) -> None:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or math.isnan(v):
        raise ValidationError(f"{name} must be a number, got {v!r}")


@dataclass(frozen=True)
class SystemConfig:
    T: float = SYSTEM_DEFAULTS["T"]
    phi: float = SYSTEM_DEFAULTS["phi"]
    W: float = SYSTEM_DEFAULTS["W"]
    I: int = int(SYSTEM_DEFAULTS["I"])
    f_s_max: float = SYSTEM_DEFAULTS["f_s_max"]
    P_b_max: float = SYSTEM_DEFAULTS["P_b_max"]
    sigma2: float = SYSTEM_DEFAULTS["sigma2"]
    delta: float = SYSTEM_DEFAULTS["delta"]
    eps1: float = SYSTEM_DEFAULTS["eps1"]
    eps2: float = SYSTEM_DEFAULTS["eps2"]
    P_a_max: float = SYSTEM_DEFAULTS["P_a_max"]

    def __post_init__(self) -> None:
        for f in fields(self):
            _finite(f.name, getattr(self, f.name))
        if int(self.I) != self.I or self.I < 1:
            raise ValidationError(f"I must be a positive integer, got {self.I!r}")
        checks = [
            ("T", self.T > 0),
            ("phi", 0.0 <= self.phi <= 1.0),
            ("W", self.W > 0),
            ("f_s_max", self.f_s_max > 0),
            ("P_b_max", self.P_b_max > 0),
            ("sigma2", self.sigma2 > 0),
            ("delta", self.delta > 0),
            ("eps1", self.eps1 >= 0),
            ("eps2", self.eps2 >= 0),
            ("P_a_max", self.P_a_max >= 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValidationError(f"{name} out of range: {getattr(self, name)!r}")

    @property
    def w(self) -> float:
        """Per-user bandwidth (equal split of W)."""
        return self.W / self.I

    @property
    def compute_window(self) -> float:
        """Time left for offloading and computing, (1-phi)T."""
        return (1.0 - self.phi) * self.T

    @property
    def wpt_window(self) -> float:
        return self.phi * self.T


@dataclass(frozen=True)
class UserParams:
    R: float = USER_DEFAULTS["R"]
    B: float = USER_DEFAULTS["B"]
    k: float = USER_DEFAULTS["k"]
    f_u_max: float = USER_DEFAULTS["f_u_max"]
    theta: float = USER_DEFAULTS["theta"]
    H: float = USER_DEFAULTS["H"]
    g: float = USER_DEFAULTS["g"]

    def __post_init__(self) -> None:
        for f in fields(self):
            _finite(f.name, getattr(self, f.name))
        checks = [
            ("R", self.R >= 0),
            ("B", self.B > 0),
            ("k", self.k > 0),
            ("f_u_max", self.f_u_max > 0),
            ("theta", 0.0 < self.theta < 1.0),
            ("H", self.H > 0),
            ("g", self.g > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValidationError(f"{name} out of range: {getattr(self, name)!r}")

    @property
    def cycles(self) -> float:
        """Total CPU cycles of the task, R*B."""
        return self.R * self.B


def _pick(d: dict, defaults: dict[str, float], what: str) -> dict[str, float]:
    unknown = sorted(set(d) - set(defaults))
    if unknown:
        raise ValidationError(f"Unknown {what} key(s): {', '.join(unknown)}")
    out = dict(defaults)
    for key, v in d.items():
        try:
            out[key] = float(v)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"{what}.{key} must be numeric, got {v!r}") from e
    return out


def parse_system_config(d: dict | None = None) -> SystemConfig:
    vals = _pick(dict(d or {}), SYSTEM_DEFAULTS, "system")
    i_val = vals["I"]
    if i_val != int(i_val):
        raise ValidationError(f"I must be an integer, got {i_val!r}")
    vals["I"] = int(i_val)
    return SystemConfig(**vals)


def parse_user_params(d: dict | None = None) -> UserParams:
    return UserParams(**_pick(dict(d or {}), USER_DEFAULTS, "user"))


# ---------------------------------------------------------------------------
# Decision and dual vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Allocation:
    a: tuple[float, ...]
    f_u: tuple[float, ...]
    f_s: tuple[float, ...]
    P_b: tuple[float, ...]
    T_off: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.a)
        for name in ("f_u", "f_s", "P_b", "T_off"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"Allocation.{name} has {len(getattr(self, name))} entries, expected {n}")

    @property
    def n_users(self) -> int:
        return len(self.a)

    @classmethod
    def zeros(cls, n: int) -> Allocation:
        z = (0.0,) * n
        return cls(a=z, f_u=z, f_s=z, P_b=z, T_off=z)

    def user(self, i: int) -> dict[str, float]:
        return {
            "a": self.a[i],
            "f_u": self.f_u[i],
            "f_s": self.f_s[i],
            "P_b": self.P_b[i],
            "T_off": self.T_off[i],
        }

    def permuted(self, order: list[int]) -> Allocation:
        return Allocation(
            a=tuple(self.a[i] for i in order),
            f_u=tuple(self.f_u[i] for i in order),
            f_s=tuple(self.f_s[i] for i in order),
            P_b=tuple(self.P_b[i] for i in order),
            T_off=tuple(self.T_off[i] for i in order),
        )


@dataclass(frozen=True)
class DualVars:
    lam: tuple[float, ...]
    mu: tuple[float, ...]
    nu: float = 0.0
    pi: float = 0.0

    def __post_init__(self) -> None:
        if len(self.lam) != len(self.mu):
            raise ValidationError("DualVars: lam and mu must have one entry per user")
        for v in (*self.lam, *self.mu, self.nu, self.pi):
            if not (v >= 0.0):
                raise ValidationError(f"DualVars components must be >= 0, got {v!r}")

    @classmethod
    def zeros(cls, n: int) -> DualVars:
        return cls(lam=(0.0,) * n, mu=(0.0,) * n)

    def to_dict(self) -> dict:
        return {"lambda": list(self.lam), "mu": list(self.mu), "nu": self.nu, "pi": self.pi}


# ---------------------------------------------------------------------------
# IO
# ---------------------------------------------------------------------------


def read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except Exception as e:
        raise ValueError(f"Failed to read JSON: {path} ({e})") from e


def setup_logging(verbosity: int = 0) -> None:
    """Configure the root logger once: 0 -> WARNING, 1 -> INFO, 2+ -> DEBUG, <0 -> ERROR."""
    if verbosity < 0:
        level = logging.ERROR
    elif verbosity == 0:
        level = logging.WARNING
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = logging.DEBUG
    root = logging.getLogger()
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
        root.addHandler(handler)
    root.setLevel(level)
