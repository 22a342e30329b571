from __future__ import annotations

import unittest

from dual_ascent import recover_primal, solve_dual
from load_split import (
    entry_ratio,
    lagrangian_a,
    lagrangian_a_derivative,
    load_bounds,
    min_power_ratio,
    optimize_a,
    user_a_max,
)
from mec_utils import Allocation, DualVars, SystemConfig, UserParams


class TestBounds(unittest.TestCase):
    def test_a_max(self) -> None:
        cfg = SystemConfig()
        self.assertEqual(user_a_max(cfg, UserParams()), 1.0)
        self.assertEqual(user_a_max(cfg, UserParams(R=0.0)), 1.0)
        self.assertAlmostEqual(user_a_max(cfg, UserParams(R=2e5)), 0.6, delta=1e-12)
        b = load_bounds(cfg, [UserParams(), UserParams(R=2e5)])
        self.assertEqual(b.a_min, (0.0, 0.0))
        self.assertEqual(len(b.a_max), 2)


class TestAStep(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.cfg = SystemConfig(I=2)
        cls.users = [UserParams(R=2.5e3), UserParams(R=4e3, H=2e-3)]
        cls.a = (0.5, 0.5)
        cls.omega, _ = solve_dual(cls.a, cls.cfg, cls.users)
        cls.fixed = recover_primal(cls.omega, cls.a, cls.cfg, cls.users)

    def test_derivative_matches_finite_difference(self) -> None:
        h = 1e-6
        for i, u in enumerate(self.users):
            for x in (0.2, 0.5, 0.8):
                lo = list(self.a)
                hi = list(self.a)
                lo[i], hi[i] = x - h, x + h
                fd = (lagrangian_a(hi, self.fixed, self.omega, self.cfg, self.users)
                      - lagrangian_a(lo, self.fixed, self.omega, self.cfg, self.users)) / (2.0 * h)
                d = lagrangian_a_derivative(x, i, self.fixed, self.omega, self.cfg, u)
                self.assertLessEqual(abs(d - fd), 1e-6 + 1e-4 * abs(d), msg=f"user {i} a={x}: {d!r} vs {fd!r}")

    def test_minimiser_beats_the_grid(self) -> None:
        best = optimize_a(self.fixed, self.omega, self.cfg, self.users)
        b = load_bounds(self.cfg, self.users)
        for i in range(2):
            self.assertGreaterEqual(best[i], 0.0)
            self.assertLessEqual(best[i], b.a_max[i])
        f_best = lagrangian_a(best, self.fixed, self.omega, self.cfg, self.users)
        for i in range(2):
            for k in range(11):
                trial = list(best)
                trial[i] = k / 10.0 * b.a_max[i]
                f = lagrangian_a(trial, self.fixed, self.omega, self.cfg, self.users)
                self.assertGreaterEqual(f, f_best - 1e-12 * abs(f_best), msg=f"user {i} a={trial[i]}")

    def test_coupled_mode_stays_in_bounds(self) -> None:
        best = optimize_a(self.fixed, self.omega, self.cfg, self.users, couple_fs=True)
        for i in range(2):
            self.assertGreaterEqual(best[i], 0.0)
            self.assertLessEqual(best[i], 1.0)

    def test_empty_task_goes_local(self) -> None:
        cfg = SystemConfig(I=1)
        fixed = Allocation.zeros(1)
        self.assertEqual(optimize_a(fixed, DualVars.zeros(1), cfg, [UserParams(R=0.0)]), (1.0,))


class TestEntryRatio(unittest.TestCase):
    def test_small_task_balances_local_and_transmit_slopes(self) -> None:
        cfg = SystemConfig(T=0.098, I=1)
        a = entry_ratio(cfg, UserParams(R=553.0))
        self.assertAlmostEqual(a, 0.868, delta=2e-3)

    def test_stays_local_when_local_is_cheaper_at_the_margin(self) -> None:
        cfg = SystemConfig()
        self.assertEqual(entry_ratio(cfg, UserParams()), 1.0)
        self.assertEqual(entry_ratio(cfg, UserParams(), a_hi=0.7), 0.7)
        self.assertEqual(entry_ratio(cfg, UserParams(R=0.0), a_hi=0.4), 0.4)

    def test_root_is_inside_the_bounds(self) -> None:
        cfg = SystemConfig(T=0.098, I=1)
        u = UserParams(R=553.0)
        self.assertEqual(entry_ratio(cfg, u, a_hi=0.5), 0.5)
        self.assertLess(entry_ratio(cfg, u), 1.0)


class TestMinPowerRatio(unittest.TestCase):
    def test_tight_wpt_budget(self) -> None:
        cfg = SystemConfig(I=1, P_b_max=0.2)
        a = min_power_ratio(cfg, UserParams(R=3e3))
        self.assertGreaterEqual(a, 0.26)
        self.assertLessEqual(a, 0.39)

    def test_empty_task_is_local(self) -> None:
        self.assertEqual(min_power_ratio(SystemConfig(I=1), UserParams(R=0.0)), 1.0)


if __name__ == "__main__":
    unittest.main()
