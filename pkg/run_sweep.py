from __future__ import annotations

"""Run a scenario's sweep and emit one record per (sweep point, scheme).

Input : a Scenario (scenario.py)
Output: CSV or JSON records, optional dual-iteration trace (JSON lines)

CSV columns, in order:
  sweep_param, sweep_value, [sweep_param2, sweep_value2,] scheme, status,
  E_total_J, E_wpt_J, E_comp_J, E_cool_J,
  then per user i = 1..I: a_i, f_u_Hz_i, f_s_Hz_i, T_off_s_i, P_b_W_i
  [, wall_time_s with include_timing]

Status is ok, nonconverged, infeasible or error. A failing record never aborts the sweep.
Wall time is left out of files unless asked for, so identical scenarios give identical bytes.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
import csv
import io
import json
import logging
import math
import time

from compute_allocation import JointOptions, Solution, solve_scheme
from grid_oracle import GridSpec, grid_search, kkt_residuals
from mec_utils import (
    Infeasible,
    MecError,
    NonConvergence,
    ValidationError,
    read_json,
)
from scenario import Scenario, SweepPoint


log = logging.getLogger(__name__)

ALL_SCHEMES: tuple[str, ...] = ("proposed", "local", "full", "half")
MODES: tuple[str, ...] = ("proposed", "local", "full", "half", "cooling_unaware", "oracle")

STATUS_OK = "ok"
STATUS_NONCONVERGED = "nonconverged"
STATUS_INFEASIBLE = "infeasible"
STATUS_ERROR = "error"

ENERGY_COLUMNS = ("E_total_J", "E_wpt_J", "E_comp_J", "E_cool_J")
USER_COLUMNS = ("a", "f_u_Hz", "f_s_Hz", "T_off_s", "P_b_W")


def resolve_modes(mode: str) -> tuple[str, ...]:
    """'all' or a comma list of schemes -> ordered, de-duplicated tuple."""
    out: list[str] = []
    for part in (p.strip() for p in mode.split(",")):
        if not part:
            continue
        names = ALL_SCHEMES if part == "all" else (part,)
        for name in names:
            if name not in MODES:
                raise ValidationError(f"unknown mode {name!r} (expected all or one of {', '.join(MODES)})")
            if name not in out:
                out.append(name)
    if not out:
        raise ValidationError("no scheme requested")
    return tuple(out)


@dataclass
class SweepRecord:
    index: int
    scheme: str
    status: str
    sweep_param: str = ""
    sweep_value: float | None = None
    sweep_param2: str = ""
    sweep_value2: float | None = None
    message: str = ""
    E_total: float | None = None
    E_wpt: float | None = None
    E_comp: float | None = None
    E_cool: float | None = None
    users: list[dict] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    violations: list[dict] = field(default_factory=list)
    kkt: dict | None = None
    wall_time: float = 0.0
    traces: list[list[dict]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "index": self.index,
            "sweep_param": self.sweep_param,
            "sweep_value": self.sweep_value,
            "sweep_param2": self.sweep_param2,
            "sweep_value2": self.sweep_value2,
            "scheme": self.scheme,
            "status": self.status,
            "message": self.message,
            "E_total_J": self.E_total,
            "E_wpt_J": self.E_wpt,
            "E_comp_J": self.E_comp,
            "E_cool_J": self.E_cool,
            "users": [dict(u) for u in self.users],
            "converged": self.converged,
            "iterations": self.iterations,
            "violations": [dict(v) for v in self.violations],
            "kkt": self.kkt,
        }
        if include_timing:
            d["wall_time_s"] = self.wall_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SweepRecord:
        return cls(
            index=int(d["index"]),
            scheme=d["scheme"],
            status=d["status"],
            sweep_param=d.get("sweep_param", ""),
            sweep_value=d.get("sweep_value"),
            sweep_param2=d.get("sweep_param2", ""),
            sweep_value2=d.get("sweep_value2"),
            message=d.get("message", ""),
            E_total=d.get("E_total_J"),
            E_wpt=d.get("E_wpt_J"),
            E_comp=d.get("E_comp_J"),
            E_cool=d.get("E_cool_J"),
            users=[dict(u) for u in d.get("users", [])],
            converged=bool(d.get("converged", False)),
            iterations=int(d.get("iterations", 0)),
            violations=[dict(v) for v in d.get("violations", [])],
            kkt=d.get("kkt"),
            wall_time=float(d.get("wall_time_s", 0.0)),
        )


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------


def _labels(point: SweepPoint) -> dict:
    out: dict = {}
    for n, (param, value) in enumerate(point.labels):
        suffix = "" if n == 0 else "2"
        out[f"sweep_param{suffix}"] = param
        out[f"sweep_value{suffix}"] = value
    return out


def _user_rows(sol: Solution) -> list[dict]:
    alloc, rep = sol.allocation, sol.report
    return [
        {
            "a": alloc.a[i],
            "f_u_Hz": alloc.f_u[i],
            "f_s_Hz": alloc.f_s[i],
            "T_off_s": alloc.T_off[i],
            "P_b_W": alloc.P_b[i],
            "E_loc_J": rep.E_loc[i],
            "E_off_J": rep.E_off[i],
            "E_h_J": rep.E_h[i],
        }
        for i in range(alloc.n_users)
    ]


def _solve(point: SweepPoint, scheme: str, joint: JointOptions, grid: GridSpec) -> Solution:
    users = list(point.users)
    if scheme == "oracle":
        return grid_search(point.config, users, grid)
    return solve_scheme(scheme, point.config, users, joint)


def solve_point(
    point: SweepPoint,
    scheme: str,
    joint: JointOptions,
    grid: GridSpec,
    trace: bool = False,
) -> SweepRecord:
    """Solve one sweep point with one scheme; solver failures become the record status."""
    rec = SweepRecord(index=point.index, scheme=scheme, status=STATUS_ERROR, **_labels(point))
    t0 = time.perf_counter()
    try:
        sol = _solve(point, scheme, joint, grid)
    except Infeasible as e:
        rec.status, rec.message = STATUS_INFEASIBLE, str(e)
    except NonConvergence as e:
        rec.status, rec.message = STATUS_NONCONVERGED, str(e)
        if trace and e.trace is not None:
            rec.traces = [[it.to_dict() for it in e.trace.iterates]]
    except MecError as e:
        rec.message = f"{type(e).__name__}: {e}"
    except (ArithmeticError, ValueError) as e:
        rec.message = f"{type(e).__name__}: {e}"
    else:
        rep = sol.report
        rec.E_total = rep.E_total
        rec.E_wpt = rep.E_wpt
        rec.E_comp = rep.E_comp_total
        rec.E_cool = rep.E_cool
        rec.users = _user_rows(sol)
        rec.converged = sol.converged
        rec.iterations = sol.iterations
        rec.violations = [v.to_dict() for v in rep.violations]
        if rep.violations:
            rec.status = STATUS_INFEASIBLE
            rec.message = "returned allocation violates " + ", ".join(sorted({v.constraint for v in rep.violations}))
        elif not sol.converged:
            rec.status = STATUS_NONCONVERGED
            rec.message = "iteration cap reached"
        else:
            rec.status = STATUS_OK
        if scheme == "proposed":
            try:
                rec.kkt = kkt_residuals(sol, point.config, list(point.users)).to_dict()
            except MecError as e:
                log.debug("point %d: no KKT report (%s)", point.index, e)
        if trace:
            rec.traces = [[it.to_dict() for it in tr.iterates] for tr in sol.traces]
    rec.wall_time = time.perf_counter() - t0
    if not rec.ok:
        log.warning("point %d (%s): %s %s", point.index, scheme, rec.status, rec.message)
    return rec


def _solve_task(args: tuple) -> SweepRecord:
    return solve_point(*args)


def run(
    scenario: Scenario,
    modes: tuple[str, ...] | str = "all",
    jobs: int = 1,
    trace: bool = False,
) -> list[SweepRecord]:
    """Every sweep point times every scheme, in sweep order (points outer, schemes inner)."""
    if isinstance(modes, str):
        modes = resolve_modes(modes)
    if jobs < 1:
        raise ValidationError(f"jobs must be >= 1, got {jobs}")
    tasks = [(p, s, scenario.joint, scenario.grid, trace) for p in scenario.points() for s in modes]
    log.info("running %d task(s) with %d job(s)", len(tasks), jobs)
    if jobs == 1 or len(tasks) == 1:
        return [_solve_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map() yields in submission order
        return list(pool.map(_solve_task, tasks))


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def fmt_num(v: object) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def csv_columns(records: list[SweepRecord], include_timing: bool = False) -> list[str]:
    cols = ["sweep_param", "sweep_value"]
    if any(r.sweep_param2 for r in records):
        cols += ["sweep_param2", "sweep_value2"]
    cols += ["scheme", "status", *ENERGY_COLUMNS]
    n_users = max((len(r.users) for r in records), default=0)
    for i in range(1, n_users + 1):
        cols += [f"{c}_{i}" for c in USER_COLUMNS]
    if include_timing:
        cols.append("wall_time_s")
    return cols


def _csv_row(r: SweepRecord, cols: list[str]) -> list[str]:
    flat = r.to_dict(include_timing=True)
    for i, u in enumerate(r.users, start=1):
        for c in USER_COLUMNS:
            flat[f"{c}_{i}"] = u.get(c)
    return [fmt_num(flat.get(c)) for c in cols]


def to_csv(records: list[SweepRecord], include_timing: bool = False) -> str:
    cols = csv_columns(records, include_timing)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow(_csv_row(r, cols))
    return buf.getvalue()


def to_json(records: list[SweepRecord], include_timing: bool = False) -> str:
    doc = {"records": [r.to_dict(include_timing) for r in records]}
    return json.dumps(doc, indent=2) + "\n"


def emit(records: list[SweepRecord], fmt: str, path: Path | str, include_timing: bool = False) -> Path:
    if not records:
        raise ValidationError("nothing to emit")
    if fmt == "csv":
        text = to_csv(records, include_timing)
    elif fmt == "json":
        text = to_json(records, include_timing)
    else:
        raise ValidationError(f"unknown format {fmt!r} (expected csv or json)")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def trace_path(out: Path | str) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".trace.jsonl")


def emit_trace(records: list[SweepRecord], path: Path | str) -> Path:
    """One JSON object per dual iteration."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for r in records:
            for solve_no, iterates in enumerate(r.traces):
                for it in iterates:
                    row = {"index": r.index, "scheme": r.scheme, "inner_solve": solve_no, **it}
                    f.write(json.dumps(row) + "\n")
    return path


def _csv_value(text: str) -> float | None:
    return None if text == "" else float(text)


def load_results(path: Path | str) -> list[SweepRecord]:
    """Read records back from an emitted CSV or JSON file."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = read_json(path)
        return [SweepRecord.from_dict(d) for d in doc["records"]]

    with path.open("r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    out = []
    for index, row in enumerate(rows):
        users = []
        i = 1
        while f"a_{i}" in row:
            if row[f"a_{i}"] != "":
                users.append({c: _csv_value(row[f"{c}_{i}"]) for c in USER_COLUMNS})
            i += 1
        out.append(
            SweepRecord(
                index=index,
                scheme=row["scheme"],
                status=row["status"],
                sweep_param=row.get("sweep_param", ""),
                sweep_value=_csv_value(row.get("sweep_value", "")),
                sweep_param2=row.get("sweep_param2", "") or "",
                sweep_value2=_csv_value(row.get("sweep_value2", "") or ""),
                E_total=_csv_value(row["E_total_J"]),
                E_wpt=_csv_value(row["E_wpt_J"]),
                E_comp=_csv_value(row["E_comp_J"]),
                E_cool=_csv_value(row["E_cool_J"]),
                users=users,
                wall_time=float(row.get("wall_time_s") or 0.0),
            )
        )
    return out

