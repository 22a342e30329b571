# main.py
from __future__ import annotations

"""Command line entry point.

  python main.py run <scenario> [--mode M] [--out PATH] [--format csv|json] [--trace]
                                [--jobs N] [--timing] [--report] [--pdf PATH] [-v|-q]

Exit status: 0 when every record is ok, 2 when any record is not, 1 on usage, parse or
validation errors.
"""

import argparse
import sys
from pathlib import Path

from mec_utils import ParseError, ValidationError, setup_logging
from render_report import report_lines, write_pdf
from run_sweep import MODES, emit, emit_trace, resolve_modes, run, trace_path
from scenario import load_scenario


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RECORD_FAILED = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="main.py", description="Cooling-aware WPT-MEC minimum-energy solver")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    rp = sub.add_parser("run", help="Solve a scenario (every sweep point x every scheme).")
    rp.add_argument("scenario", help="Scenario file (.cfg key-value or .json).")
    rp.add_argument(
        "--mode",
        default="all",
        help=f"all (proposed, local, full, half) or a comma list of: {', '.join(MODES)}.",
    )
    rp.add_argument("--out", default=None, help="Output file (default out/<scenario>.<format>).")
    rp.add_argument("--format", choices=("csv", "json"), default="csv")
    rp.add_argument("--trace", action="store_true", help="Also write dual iterations to <out>.trace.jsonl.")
    rp.add_argument("--jobs", type=int, default=1, help="Sweep points solved in parallel.")
    rp.add_argument("--timing", action="store_true", help="Include wall time (output no longer byte-stable).")
    rp.add_argument("--report", action="store_true", help="Write a text summary to <out>.report.txt.")
    rp.add_argument("--pdf", default=None, help="Write the summary as a PDF.")
    rp.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable).")
    rp.add_argument("-q", "--quiet", action="store_true", help="Errors only.")
    return ap


def cmd_run(args: argparse.Namespace) -> int:
    setup_logging(-1 if args.quiet else args.verbose)
    if args.jobs < 1:
        raise SystemExit("--jobs must be a positive integer.")

    scenario_path = Path(args.scenario)
    out = Path(args.out) if args.out else Path("out") / f"{scenario_path.stem}.{args.format}"
    try:
        modes = resolve_modes(args.mode)
        sc = load_scenario(scenario_path)
    except (ParseError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    records = run(sc, modes, jobs=args.jobs, trace=args.trace)
    emit(records, args.format, out, include_timing=args.timing)
    print(f"Wrote {len(records)} record(s): {out}")

    if args.trace:
        tp = emit_trace(records, trace_path(out))
        print(f"Wrote trace: {tp}")

    if args.report or args.pdf:
        lines = report_lines(records, title=f"Sweep report: {scenario_path.name}")
        if args.report:
            rp = out.with_name(out.name + ".report.txt")
            rp.write_text("\n".join(lines) + "\n", encoding="utf-8")
            print(f"Wrote report: {rp}")
        if args.pdf:
            n = write_pdf(lines, Path(args.pdf))
            print(f"Wrote PDF: {args.pdf} ({n} page(s))")

    n_bad = sum(1 for r in records if not r.ok)
    if n_bad:
        print(f"{n_bad} of {len(records)} record(s) not ok", file=sys.stderr)
        return EXIT_RECORD_FAILED
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
