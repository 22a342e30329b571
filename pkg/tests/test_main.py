from __future__ import annotations

import contextlib
import io
import json
import tempfile
import unittest
from pathlib import Path

from main import EXIT_OK, EXIT_RECORD_FAILED, EXIT_USAGE, main


class TestRunCommand(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def _scenario(self, text: str) -> str:
        p = self.dir / "case.cfg"
        p.write_text(text, encoding="utf-8")
        return str(p)

    def _main(self, *argv: str) -> int:
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            return main(list(argv))

    def test_all_records_ok(self) -> None:
        out = self.dir / "r.csv"
        code = self._main("run", self._scenario("system.I = 1\n"), "--mode", "local,full", "--out", str(out), "-q")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(out.read_text(encoding="utf-8").splitlines()), 3)

    def test_failed_record_sets_status_two(self) -> None:
        out = self.dir / "r.json"
        sc = self._scenario("system.phi = 0.7\nuser.R = 4K\n")
        code = self._main("run", sc, "--mode", "local", "--format", "json", "--out", str(out), "-q")
        self.assertEqual(code, EXIT_RECORD_FAILED)
        doc = json.loads(out.read_text(encoding="utf-8"))
        self.assertEqual(doc["records"][0]["status"], "infeasible")

    def test_bad_inputs_exit_one(self) -> None:
        out = str(self.dir / "r.csv")
        self.assertEqual(self._main("run", str(self.dir / "missing.cfg"), "--out", out, "-q"), EXIT_USAGE)
        self.assertEqual(self._main("run", self._scenario("system.T = -1\n"), "--out", out, "-q"), EXIT_USAGE)
        self.assertEqual(self._main("run", self._scenario(""), "--mode", "greedy", "--out", out, "-q"), EXIT_USAGE)
        with self.assertRaises(SystemExit) as ctx:
            self._main("run", self._scenario(""), "--format", "xml")
        self.assertEqual(ctx.exception.code, EXIT_USAGE)
        with self.assertRaises(SystemExit) as ctx:
            self._main()
        self.assertEqual(ctx.exception.code, EXIT_USAGE)

    def test_trace_report_and_pdf(self) -> None:
        out = self.dir / "r.csv"
        pdf = self.dir / "r.pdf"
        sc = self._scenario("system.I = 1\nsweep.param = R\nsweep.values = 1K, 3K\n")
        code = self._main("run", sc, "--mode", "proposed,local", "--out", str(out), "--trace", "--report", "--pdf", str(pdf), "-q")
        self.assertEqual(code, EXIT_OK)
        self.assertTrue((self.dir / "r.csv.trace.jsonl").is_file())
        report = (self.dir / "r.csv.report.txt").read_text(encoding="utf-8")
        self.assertIn("Total AP energy (mJ)", report)
        self.assertTrue(pdf.read_bytes().startswith(b"%PDF"))

    def test_timing_column_is_opt_in(self) -> None:
        out = self.dir / "r.csv"
        sc = self._scenario("system.I = 1\n")
        self._main("run", sc, "--mode", "local", "--out", str(out), "-q")
        self.assertNotIn("wall_time_s", out.read_text(encoding="utf-8"))
        self._main("run", sc, "--mode", "local", "--out", str(out), "--timing", "-q")
        self.assertIn("wall_time_s", out.read_text(encoding="utf-8").splitlines()[0])


if __name__ == "__main__":
    unittest.main()
