from __future__ import annotations

"""Scenario files: system, users, solver options and up to two sweep axes.

Format (one `key = value` per line, `#` starts a comment):

  system.T = 0.2            # s; also phi, W, I, f_s_max, P_b_max, sigma2, delta
  system.w = 1e6            # per-user bandwidth (Hz); sets W = w * I at every point
  cooling.eps1 = 1e-3       # also eps2, P_a_max
  user.R = 1.5 Knats        # template for every user; R accepts nats, K or Knats
  user.2.H = 2e-3           # override for user 2 (1-based)
  solver.gap_tol = 1e-3     # DualOptions / JointOptions fields
  oracle.a_points = 100     # GridSpec fields
  sweep.param = R
  sweep.values = 0.5:0.5:4 Knats     # start:step:stop (inclusive) or a comma list
  sweep.param2 = theta                # optional second axis (inner loop)
  sweep.values2 = 0.3, 0.6

A .json file with the same keys, nested or dotted, is accepted too. Omitted keys take the
defaults of the parameter table.
"""

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
import json
import math
import re

from compute_allocation import JointOptions
from dual_ascent import DualOptions
from grid_oracle import GridSpec
from mec_utils import (
    SYSTEM_DEFAULTS,
    USER_DEFAULTS,
    ParseError,
    SystemConfig,
    UserParams,
    ValidationError,
    parse_system_config,
    parse_user_params,
)


COOLING_KEYS = ("eps1", "eps2", "P_a_max")
SYSTEM_KEYS = tuple(k for k in SYSTEM_DEFAULTS if k not in COOLING_KEYS)
USER_KEYS = tuple(USER_DEFAULTS)
SWEEPABLE = (*SYSTEM_DEFAULTS, "w", *USER_KEYS)

_DUAL_FIELDS = {f.name: f.type for f in fields(DualOptions)}
_JOINT_FIELDS = {f.name: f.type for f in fields(JointOptions) if f.name != "dual"}
_GRID_FIELDS = {f.name: f.type for f in fields(GridSpec)}

_R_UNITS = {"knats": 1e3, "k": 1e3, "nats": 1.0}
_UNIT_RE = re.compile(r"^(.*?)\s*(knats|nats|k)\s*$", re.IGNORECASE)
_USER_OVERRIDE_RE = re.compile(r"^user\.(\d+)\.(\w+)$")


@dataclass(frozen=True)
class SweepAxis:
    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class SweepPoint:
    index: int
    labels: tuple[tuple[str, float], ...]
    config: SystemConfig
    users: tuple[UserParams, ...]

    @property
    def label_dict(self) -> dict[str, float]:
        return dict(self.labels)


@dataclass(frozen=True)
class Scenario:
    system: dict[str, float] = field(default_factory=dict)
    user_template: dict[str, float] = field(default_factory=dict)
    user_overrides: dict[int, dict[str, float]] = field(default_factory=dict)
    per_user_w: float | None = None
    dual: DualOptions = field(default_factory=DualOptions)
    joint: JointOptions = field(default_factory=JointOptions)
    grid: GridSpec = field(default_factory=GridSpec)
    sweep: tuple[SweepAxis, ...] = ()
    source: str = ""

    def build(self, values: dict[str, float] | None = None) -> tuple[SystemConfig, list[UserParams]]:
        """SystemConfig and users with sweep values applied."""
        values = dict(values or {})
        sys_d = dict(self.system)
        user_d = dict(self.user_template)
        per_user_w = self.per_user_w
        for key, v in values.items():
            if key == "w":
                per_user_w = v
            elif key in SYSTEM_DEFAULTS:
                sys_d[key] = v
            else:
                user_d[key] = v
        if per_user_w is not None:
            n = int(sys_d.get("I", SYSTEM_DEFAULTS["I"]))
            sys_d["W"] = per_user_w * n
        cfg = parse_system_config(sys_d)

        users: list[UserParams] = []
        for i in range(1, cfg.I + 1):
            d = dict(user_d)
            for key, v in self.user_overrides.get(i, {}).items():
                if key not in values:
                    d[key] = v
            users.append(parse_user_params(d))
        return cfg, users

    @property
    def config(self) -> SystemConfig:
        return self.build()[0]

    @property
    def users(self) -> list[UserParams]:
        return self.build()[1]

    def points(self) -> list[SweepPoint]:
        axes = list(self.sweep)
        combos: list[tuple[tuple[str, float], ...]] = [()]
        for axis in axes:
            combos = [c + ((axis.param, v),) for c in combos for v in axis.values]
        out = []
        for idx, labels in enumerate(combos):
            cfg, users = self.build(dict(labels))
            out.append(SweepPoint(index=idx, labels=labels, config=cfg, users=tuple(users)))
        return out


# ---------------------------------------------------------------------------
# Value parsing
# ---------------------------------------------------------------------------


def _split_unit(text: str, key: str, line: int | None) -> tuple[str, float | None]:
    """(number text, multiplier); the multiplier is None when no unit is given."""
    m = _UNIT_RE.match(text)
    if not m:
        return text, None
    if key != "R":
        raise ParseError(f"unit suffix {m.group(2)!r} is only accepted for R", line=line, key=key)
    return m.group(1), _R_UNITS[m.group(2).lower()]


def _number(text: str, key: str, line: int | None) -> float:
    try:
        v = float(text.strip())
    except ValueError as e:
        raise ParseError(f"not a number: {text.strip()!r}", line=line, key=key) from e
    if math.isnan(v):
        raise ParseError("NaN is not a valid value", line=line, key=key)
    return v


def _scaled(v: float, mult: float | None) -> float:
    if mult is None or mult == 1.0:
        return v
    return round(v * mult, 12)


def parse_quantity(text: str, key: str, line: int | None = None) -> float:
    body, mult = _split_unit(text.strip(), key, line)
    return _scaled(_number(body, key, line), mult)


def parse_values(text: str, key: str, line: int | None = None) -> tuple[float, ...]:
    """Comma list or inclusive start:step:stop range.

    A range takes one trailing unit. In a list each item may carry its own unit; a unit on
    the last item only applies to the whole list when no other item has one.
    """
    text = text.strip()
    if ":" in text:
        body, mult = _split_unit(text, key, line)
        parts = body.split(":")
        if len(parts) != 3:
            raise ParseError(f"range must be start:step:stop, got {body!r}", line=line, key=key)
        start, step, stop = (_number(p, key, line) for p in parts)
        if step <= 0 or stop < start:
            raise ParseError(f"empty or reversed range {body!r}", line=line, key=key)
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(_scaled(start + i * step, mult) for i in range(count))

    items = [_split_unit(p.strip(), key, line) for p in text.split(",") if p.strip()]
    if not items:
        raise ParseError("empty value list", line=line, key=key)
    shared = items[-1][1] if all(m is None for _, m in items[:-1]) else None
    return tuple(_scaled(_number(body, key, line), mult if mult is not None else shared) for body, mult in items)


def _option(text: str, type_name: str, key: str, line: int | None):
    t = str(type_name)
    s = text.strip()
    if t == "bool":
        low = s.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ParseError(f"not a boolean: {s!r}", line=line, key=key)
    if t == "int":
        v = _number(s, key, line)
        if v != int(v):
            raise ParseError(f"not an integer: {s!r}", line=line, key=key)
        return int(v)
    return _number(s, key, line)


def _sweep_param(text: str, line: int | None, key: str) -> str:
    name = text.strip()
    for prefix in ("system.", "cooling.", "user."):
        if name.startswith(prefix):
            name = name[len(prefix):]
    if name not in SWEEPABLE:
        raise ParseError(f"cannot sweep {text.strip()!r} (choose from {', '.join(SWEEPABLE)})", line=line, key=key)
    return name


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _read_pairs(path: Path) -> list[tuple[int | None, str, str]]:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno) from e
        pairs: list[tuple[int | None, str, str]] = []

        def walk(prefix: str, obj: object) -> None:
            if isinstance(obj, dict):
                for k, v in obj.items():
                    walk(f"{prefix}.{k}" if prefix else str(k), v)
            elif isinstance(obj, list):
                pairs.append((None, prefix, ", ".join(str(x) for x in obj)))
            else:
                pairs.append((None, prefix, str(obj)))

        walk("", doc)
        return pairs

    out: list[tuple[int | None, str, str]] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ParseError("expected 'key = value'", line=no)
        key, value = (x.strip() for x in s.split("=", 1))
        if not key:
            raise ParseError("missing key", line=no)
        if not value:
            raise ParseError("missing value", line=no, key=key)
        out.append((no, key, value))
    return out


def parse_scenario_pairs(pairs: list[tuple[int | None, str, str]], source: str = "") -> Scenario:
    system: dict[str, float] = {}
    template: dict[str, float] = {}
    overrides: dict[int, dict[str, float]] = {}
    dual_kw: dict[str, object] = {}
    joint_kw: dict[str, object] = {}
    grid_kw: dict[str, object] = {}
    sweep_raw: dict[str, tuple[int | None, str]] = {}
    per_user_w: float | None = None
    seen: set[str] = set()

    for line, key, value in pairs:
        if key in seen:
            raise ParseError("duplicate key", line=line, key=key)
        seen.add(key)
        section, _, name = key.partition(".")

        m = _USER_OVERRIDE_RE.match(key)
        if m:
            idx, name = int(m.group(1)), m.group(2)
            if idx < 1:
                raise ParseError("user index is 1-based", line=line, key=key)
            if name not in USER_KEYS:
                raise ParseError(f"unknown user field {name!r}", line=line, key=key)
            overrides.setdefault(idx, {})[name] = parse_quantity(value, name, line)
        elif section == "system" and name == "w":
            per_user_w = parse_quantity(value, name, line)
        elif section == "system" and name in SYSTEM_KEYS:
            system[name] = parse_quantity(value, name, line)
        elif section == "cooling" and name in COOLING_KEYS:
            system[name] = parse_quantity(value, name, line)
        elif section == "user" and name in USER_KEYS:
            template[name] = parse_quantity(value, name, line)
        elif section == "solver" and name in _DUAL_FIELDS:
            dual_kw[name] = _option(value, _DUAL_FIELDS[name], key, line)
        elif section == "solver" and name in _JOINT_FIELDS:
            joint_kw[name] = _option(value, _JOINT_FIELDS[name], key, line)
        elif section == "oracle" and name in _GRID_FIELDS:
            grid_kw[name] = _option(value, _GRID_FIELDS[name], key, line)
        elif section == "sweep" and name in ("param", "values", "param2", "values2"):
            sweep_raw[name] = (line, value)
        else:
            raise ParseError("unknown key", line=line, key=key)

    if per_user_w is not None and "W" in system:
        raise ParseError("system.w and system.W are mutually exclusive", key="system.w")

    axes: list[SweepAxis] = []
    for p_key, v_key in (("param", "values"), ("param2", "values2")):
        if (p_key in sweep_raw) != (v_key in sweep_raw):
            missing = v_key if p_key in sweep_raw else p_key
            raise ParseError(f"sweep.{missing} is required with sweep.{p_key if missing == v_key else v_key}", key=f"sweep.{missing}")
        if p_key in sweep_raw:
            p_line, p_text = sweep_raw[p_key]
            param = _sweep_param(p_text, p_line, f"sweep.{p_key}")
            v_line, v_text = sweep_raw[v_key]
            axes.append(SweepAxis(param, parse_values(v_text, param, v_line)))
    if "param2" in sweep_raw and "param" not in sweep_raw:
        raise ParseError("sweep.param2 needs sweep.param", key="sweep.param2")
    if len(axes) == 2 and axes[0].param == axes[1].param:
        raise ParseError("sweep axes must differ", key="sweep.param2")

    try:
        dual = DualOptions(**dual_kw)
        joint = JointOptions(**joint_kw, dual=dual)
        grid = GridSpec(**grid_kw)
    except TypeError as e:
        raise ValidationError(str(e)) from e

    sc = Scenario(
        system=system,
        user_template=template,
        user_overrides=overrides,
        per_user_w=per_user_w,
        dual=dual,
        joint=joint,
        grid=grid,
        sweep=tuple(axes),
        source=source,
    )
    _validate(sc)
    return sc


def _validate(sc: Scenario) -> None:
    points = sc.points()
    max_users = max(p.config.I for p in points)
    for idx in sc.user_overrides:
        if idx > max_users:
            raise ValidationError(f"user.{idx}.* overrides a user beyond I={max_users}")


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"scenario file not found: {path}")
    return parse_scenario_pairs(_read_pairs(path), source=str(path))


def with_sweep(sc: Scenario, *axes: SweepAxis) -> Scenario:
    """Copy of a scenario with its sweep replaced (validated)."""
    out = replace(sc, sweep=tuple(axes))
    _validate(out)
    return out
