from __future__ import annotations

from dataclasses import replace
import math
import unittest

from mec_model import cooling_energy, offload_energy
from mec_utils import DualVars, SystemConfig, UserParams
from subproblems import (
    edge_objective,
    offload_stationarity,
    offload_time_value,
    optimal_offload_time,
    optimal_wpt_power,
    rate_excess,
    required_wpt_power,
    solve_edge_frequencies,
    wpt_coefficient,
)


W0_AT_ONE = 0.5671432904097838


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


class TestOffloadTime(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.cfg = SystemConfig()  # w = 1 MHz
        cls.u = UserParams()
        cls.s = cls.cfg.sigma2 / cls.u.g

    def test_unit_rate_when_mu_equals_noise_price(self) -> None:
        lam = 2.0
        T = optimal_offload_time(lam, lam * self.s, 0.0, self.cfg, self.u)
        self.assertLess(_rel(T, 1.5e-3), 1e-12)

    def test_closed_form_against_w0_of_one(self) -> None:
        lam = 1.0
        mu = lam * self.s * (math.e + 1.0)  # q/e - 1/e = 1
        T = optimal_offload_time(lam, mu, 0.0, self.cfg, self.u)
        expected = 1500.0 / (1e6 * (W0_AT_ONE + 1.0))
        self.assertLess(_rel(T, expected), 1e-12)
        self.assertLess(abs(offload_stationarity(lam, mu, 0.0, T, self.cfg, self.u)) / mu, 1e-10)

    def test_minimises_the_offload_lagrangian(self) -> None:
        lam, mu = 3.0, 0.7
        T = optimal_offload_time(lam, mu, 0.25, self.cfg, self.u)
        best = offload_time_value(lam, mu, 0.25, self.cfg, self.u)

        def f(t: float) -> float:
            return lam * offload_energy(0.25, t, self.cfg, self.u) + mu * t

        self.assertLess(_rel(f(T), best), 1e-12)
        for factor in (0.9, 0.99, 1.01, 1.1):
            self.assertGreaterEqual(f(T * factor), best, msg=f"T*{factor}")

    def test_degenerate_multipliers(self) -> None:
        self.assertEqual(optimal_offload_time(0.0, 1.0, 0.0, self.cfg, self.u), 0.0)
        self.assertEqual(optimal_offload_time(1.0, 1.0, 1.0, self.cfg, self.u), 0.0)
        self.assertEqual(optimal_offload_time(1.0, 0.0, 0.0, self.cfg, self.u), self.cfg.compute_window)
        # with no time price the infimum is the zero-rate limit
        self.assertLess(_rel(offload_time_value(1.0, 0.0, 0.0, self.cfg, self.u), self.s * 1500.0 / 1e6), 1e-12)

    def test_rate_excess_series_matches_direct_form(self) -> None:
        for y in (1e-3, 0.0099, 0.0101, 0.5, 2.0):
            direct = (y - 1.0) * math.exp(y) + 1.0
            self.assertLess(_rel(rate_excess(y), direct), 1e-8, msg=f"y={y}")


class TestWptPower(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.cfg = SystemConfig()
        cls.u = UserParams()

    def test_sign_of_coefficient_picks_the_branch(self) -> None:
        self.assertEqual(optimal_wpt_power(0.0, 0.0, 1.0, 0.0, self.cfg, self.u), 0.0)
        self.assertEqual(optimal_wpt_power(1e6, 0.0, 1.0, 0.0, self.cfg, self.u), self.cfg.P_b_max)

    def test_tie_makes_energy_causality_tight(self) -> None:
        lam = 1.0 / (self.u.theta * self.u.H)
        self.assertLess(abs(wpt_coefficient(lam, 0.0, self.cfg, self.u)), 1e-12 * self.cfg.wpt_window)
        p = optimal_wpt_power(lam, 0.0, 1.0, 0.0, self.cfg, self.u)
        self.assertLess(_rel(p, 0.09765625), 1e-12)
        self.assertEqual(p, required_wpt_power(1.0, 0.0, self.cfg, self.u))


class TestEdgeCoordinate(unittest.TestCase):
    def test_huge_latency_price_runs_at_full_speed(self) -> None:
        cfg = SystemConfig(I=1)
        omega = DualVars(lam=(1.0,), mu=(1e30,))
        self.assertEqual(solve_edge_frequencies(omega, (0.0,), cfg, [UserParams()]), (cfg.f_s_max,))

    def test_linear_cooling_regime_is_stationary(self) -> None:
        # P_a_max = 0 puts every positive computing power on the linear cooling branch
        cfg = SystemConfig(I=1, delta=1e-23, P_a_max=0.0, eps2=2.0)
        users = [UserParams()]
        omega = DualVars(lam=(1.0,), mu=(1.0,))
        (f,) = solve_edge_frequencies(omega, (0.0,), cfg, users)
        h = 1e-4 * f
        up = edge_objective((f + h,), omega, (0.0,), cfg, users)
        down = edge_objective((f - h,), omega, (0.0,), cfg, users)
        slope = (up - down) / (2.0 * h)
        scale = omega.mu[0] * users[0].cycles / f**2
        self.assertLess(abs(slope) / scale, 1e-4)
        mid = edge_objective((f,), omega, (0.0,), cfg, users)
        self.assertLessEqual(mid, min(up, down))

    def test_objective_charges_the_model_cooling_energy(self) -> None:
        hot = SystemConfig(I=2, P_a_max=100.0)
        cold = replace(hot, eps1=0.0, eps2=0.0)
        users = [UserParams()] * 2
        omega = DualVars(lam=(1.0, 1.0), mu=(1.0, 2.0), nu=1e-12)
        for f in ((4e8, 9e8), (1e9, 1e9), (2e8, 5e8)):
            extra = edge_objective(f, omega, (0.0, 0.5), hot, users) - edge_objective(f, omega, (0.0, 0.5), cold, users)
            self.assertLess(_rel(extra, cooling_energy(f, hot)), 1e-9, msg=f"f_s={f}")


class TestEdgeFrequencies(unittest.TestCase):
    def test_single_user_without_cooling_is_cube_root(self) -> None:
        cfg = SystemConfig(I=1, eps1=0.0, eps2=0.0)
        users = [UserParams()]
        omega = DualVars(lam=(1.0,), mu=(1.0,))
        (f,) = solve_edge_frequencies(omega, (0.0,), cfg, users)
        self.assertLess(_rel(f, (1.0 / (2.0 * cfg.delta)) ** (1.0 / 3.0)), 1e-6)
        self.assertLess(_rel(f, 3.684031498640386e8), 1e-6)

    def test_local_and_priceless_users_get_no_share(self) -> None:
        cfg = SystemConfig(I=3)
        users = [UserParams()] * 3
        omega = DualVars(lam=(1.0,) * 3, mu=(1.0, 0.0, 1.0))
        f = solve_edge_frequencies(omega, (0.0, 0.0, 1.0), cfg, users)
        self.assertGreater(f[0], 0.0)
        self.assertEqual(f[1:], (0.0, 0.0))

    def test_coupled_solution_is_a_coordinate_minimum(self) -> None:
        cfg = SystemConfig(I=3, delta=1e-23, P_a_max=0.0, eps2=2.0)
        users = [UserParams(R=1e3), UserParams(R=2e3), UserParams(R=3e3)]
        omega = DualVars(lam=(1.0,) * 3, mu=(0.5, 1.0, 2.0), nu=1e-12)
        a = (0.2, 0.0, 0.5)
        f = solve_edge_frequencies(omega, a, cfg, users)
        base = edge_objective(f, omega, a, cfg, users)
        for j in range(3):
            for factor in (0.98, 1.02):
                trial = list(f)
                trial[j] *= factor
                self.assertGreaterEqual(
                    edge_objective(trial, omega, a, cfg, users),
                    base * (1.0 - 1e-12),
                    msg=f"user {j} x{factor}",
                )

    def test_cooling_lowers_the_frequencies(self) -> None:
        users = [UserParams()] * 2
        omega = DualVars(lam=(1.0, 1.0), mu=(1.0, 1.0))
        hot = SystemConfig(I=2, delta=1e-23, P_a_max=0.0, eps2=4.0)
        cold = SystemConfig(I=2, delta=1e-23, eps1=0.0, eps2=0.0)
        f_hot = solve_edge_frequencies(omega, (0.0, 0.0), hot, users)
        f_cold = solve_edge_frequencies(omega, (0.0, 0.0), cold, users)
        for i in range(2):
            self.assertLess(f_hot[i], f_cold[i])


if __name__ == "__main__":
    unittest.main()
