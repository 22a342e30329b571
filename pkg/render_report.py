from __future__ import annotations

"""Summarise emitted sweep records as text tables and, optionally, a PDF.

Inputs:
  - a results file written by run_sweep.emit (CSV or JSON)
Outputs:
  - text report on stdout or --out
  - --pdf: the same tables on A4 landscape pages

Sections:
  1. total AP energy (mJ) per sweep point and scheme
  2. average energy per user (mJ)
  3. saving of the proposed scheme over every other scheme (%)
  4. server-side split (computing vs cooling, mJ)
  5. two-axis sweeps only: offloading time (ms) and WPT power (mW) per cell
"""

from pathlib import Path
import argparse
import math

from reportlab.lib.pagesizes import A4, landscape
from reportlab.lib.units import mm
from reportlab.pdfgen import canvas

from run_sweep import SweepRecord, load_results


Key = tuple[str, float | None, str, float | None]


def _format_table(rows: list[dict[str, str]], cols: list[str]) -> list[str]:
    widths: dict[str, int] = {c: len(c) for c in cols}
    for row in rows:
        for c in cols:
            widths[c] = max(widths[c], len(str(row.get(c, ""))))

    def fmt_row(d: dict[str, str]) -> str:
        return "  ".join(str(d.get(c, "")).rjust(widths[c]) for c in cols)

    header = "  ".join(c.rjust(widths[c]) for c in cols)
    sep = "  ".join(("-" * widths[c]) for c in cols)
    out = [header, sep]
    out.extend(fmt_row(r) for r in rows)
    return out


def _num(v: float | None, scale: float = 1.0, digits: int = 6) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "n/a"
    return f"{v * scale:.{digits}g}"


def _key(r: SweepRecord) -> Key:
    return (r.sweep_param, r.sweep_value, r.sweep_param2, r.sweep_value2)


def _point_label(key: Key) -> dict[str, str]:
    p1, v1, p2, v2 = key
    out = {"point": "single" if not p1 else f"{p1}={_num(v1)}"}
    if p2:
        out["point"] += f", {p2}={_num(v2)}"
    return out


def group_records(records: list[SweepRecord]) -> tuple[list[Key], list[str], dict[tuple[Key, str], SweepRecord]]:
    """Points and schemes in first-seen order, and the (point, scheme) lookup."""
    keys: list[Key] = []
    schemes: list[str] = []
    table: dict[tuple[Key, str], SweepRecord] = {}
    for r in records:
        k = _key(r)
        if k not in keys:
            keys.append(k)
        if r.scheme not in schemes:
            schemes.append(r.scheme)
        table[(k, r.scheme)] = r
    return keys, schemes, table


def _energy(r: SweepRecord | None) -> float | None:
    if r is None or not r.ok:
        return None
    return r.E_total


def _cell(r: SweepRecord | None, value: float | None, scale: float) -> str:
    if r is None:
        return ""
    if not r.ok:
        return r.status
    return _num(value, scale)


def energy_rows(records: list[SweepRecord], per_user: bool = False) -> tuple[list[dict[str, str]], list[str]]:
    keys, schemes, table = group_records(records)
    rows = []
    for k in keys:
        row = _point_label(k)
        for s in schemes:
            r = table.get((k, s))
            e = _energy(r)
            if per_user and e is not None and r is not None and r.users:
                e = e / len(r.users)
            row[s] = _cell(r, e, 1e3)
        rows.append(row)
    return rows, ["point", *schemes]


def saving_percent(proposed: float | None, other: float | None) -> float | None:
    if proposed is None or other is None or other <= 0.0:
        return None
    return 100.0 * (other - proposed) / other


def saving_rows(records: list[SweepRecord]) -> tuple[list[dict[str, str]], list[str]]:
    keys, schemes, table = group_records(records)
    others = [s for s in schemes if s != "proposed"]
    if "proposed" not in schemes or not others:
        return [], []
    rows = []
    acc: dict[str, list[float]] = {s: [] for s in others}
    for k in keys:
        row = _point_label(k)
        p = _energy(table.get((k, "proposed")))
        for s in others:
            v = saving_percent(p, _energy(table.get((k, s))))
            row[s] = _num(v, digits=4)
            if v is not None:
                acc[s].append(v)
        rows.append(row)
    mean = {"point": "mean"}
    for s in others:
        mean[s] = _num(sum(acc[s]) / len(acc[s]), digits=4) if acc[s] else "n/a"
    rows.append(mean)
    return rows, ["point", *others]


def server_rows(records: list[SweepRecord]) -> tuple[list[dict[str, str]], list[str]]:
    rows = []
    for r in records:
        if not r.ok or r.E_comp is None or r.E_cool is None:
            continue
        row = _point_label(_key(r))
        row["scheme"] = r.scheme
        row["E_comp"] = _num(r.E_comp, 1e3)
        row["E_cool"] = _num(r.E_cool, 1e3)
        row["E_server"] = _num(r.E_comp + r.E_cool, 1e3)
        rows.append(row)
    return rows, ["point", "scheme", "E_comp", "E_cool", "E_server"]


def _mean_user(r: SweepRecord, field: str) -> float | None:
    vals = [u.get(field) for u in r.users if u.get(field) is not None]
    if not vals:
        return None
    return sum(vals) / len(vals)


def pivot_rows(
    records: list[SweepRecord],
    field: str,
    scale: float,
    scheme: str | None = None,
) -> tuple[list[dict[str, str]], list[str]]:
    """Outer axis down, inner axis across; cells hold the per-user mean of `field`."""
    two_axis = [r for r in records if r.sweep_param2]
    if not two_axis:
        return [], []
    scheme = scheme or two_axis[0].scheme
    sel = [r for r in two_axis if r.scheme == scheme]
    if not sel:
        return [], []
    p1, p2 = sel[0].sweep_param, sel[0].sweep_param2
    outer: list[float | None] = []
    inner: list[float | None] = []
    for r in sel:
        if r.sweep_value not in outer:
            outer.append(r.sweep_value)
        if r.sweep_value2 not in inner:
            inner.append(r.sweep_value2)
    cells = {(r.sweep_value, r.sweep_value2): r for r in sel}
    cols = [p1, *(f"{p2}={_num(v)}" for v in inner)]
    rows = []
    for v1 in outer:
        row = {p1: _num(v1)}
        for v2, col in zip(inner, cols[1:]):
            r = cells.get((v1, v2))
            row[col] = _cell(r, _mean_user(r, field) if r is not None else None, scale)
        rows.append(row)
    return rows, cols


def report_lines(records: list[SweepRecord], title: str = "") -> list[str]:
    lines: list[str] = []
    if title:
        lines.append(title)
        lines.append("")
    n_bad = sum(1 for r in records if not r.ok)
    lines.append(f"{len(records)} record(s), {n_bad} not ok")
    lines.append("")

    sections = [
        ("Total AP energy (mJ)", energy_rows(records)),
        ("Average energy per user (mJ)", energy_rows(records, per_user=True)),
        ("Saving of the proposed scheme (%)", saving_rows(records)),
        ("Server-side energy (mJ)", server_rows(records)),
        ("Offloading time per cell (ms)", pivot_rows(records, "T_off_s", 1e3)),
        ("WPT transmit power per cell (mW)", pivot_rows(records, "P_b_W", 1e3)),
    ]
    for heading, (rows, cols) in sections:
        if not rows:
            continue
        lines.append(heading)
        lines.append("-" * len(heading))
        lines.extend(_format_table(rows, cols))
        lines.append("")

    bad = [r for r in records if not r.ok]
    if bad:
        lines.append("Records not ok")
        lines.append("--------------")
        for r in bad:
            lines.append(f"{_point_label(_key(r))['point']} {r.scheme}: {r.status} {r.message}".rstrip())
        lines.append("")
    return lines


def write_pdf(lines: list[str], out_pdf: Path, font_size: float = 8.0) -> int:
    """Monospaced text pages; returns the page count."""
    page_w, page_h = landscape(A4)
    margin = 12 * mm
    leading = font_size * 1.25
    out_pdf.parent.mkdir(parents=True, exist_ok=True)
    c = canvas.Canvas(str(out_pdf), pagesize=(page_w, page_h))
    pages = 1
    y = page_h - margin
    c.setFont("Courier", font_size)
    for line in lines:
        if y < margin + leading:
            c.showPage()
            pages += 1
            c.setFont("Courier", font_size)
            y = page_h - margin
        c.drawString(margin, y, line)
        y -= leading
    c.save()
    return pages


def main() -> None:
    ap = argparse.ArgumentParser(description="Summarise sweep results (CSV or JSON) as tables.")
    ap.add_argument("results", help="Results file written by run_sweep/main.py run.")
    ap.add_argument("--out", default=None, help="Write the text report here instead of stdout.")
    ap.add_argument("--pdf", default=None, help="Also write the report as a PDF.")
    args = ap.parse_args()

    path = Path(args.results)
    if not path.is_file():
        raise SystemExit(f"Missing results file: {path}")
    records = load_results(path)
    if not records:
        raise SystemExit(f"No records in {path}")

    lines = report_lines(records, title=f"Sweep report: {path.name}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"Wrote report: {out}")
    else:
        print("\n".join(lines))
    if args.pdf:
        n = write_pdf(lines, Path(args.pdf))
        print(f"Wrote PDF: {args.pdf} ({n} page(s))")


if __name__ == "__main__":
    main()
