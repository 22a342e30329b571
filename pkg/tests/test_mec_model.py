from __future__ import annotations

from dataclasses import replace
import math
import unittest

import numpy as np

from mec_model import (
    check_feasibility,
    cooling_energy,
    cooling_power,
    cooling_slope,
    cooling_threshold,
    edge_cost,
    harvested_energy,
    local_cost,
    local_cpu_frequency,
    local_energy,
    offload_energy,
    offload_tx_power,
    total_ap_energy,
)
from mec_utils import (
    Allocation,
    DegenerateOffload,
    InfeasibleLocalLoad,
    SystemConfig,
    UserParams,
    ValidationError,
    parse_system_config,
    parse_user_params,
)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


class TestConfig(unittest.TestCase):
    def test_defaults_match_parameter_table(self) -> None:
        cfg = parse_system_config({})
        self.assertEqual((cfg.T, cfg.phi, cfg.W, cfg.I), (0.2, 0.4, 5e6, 5))
        self.assertEqual(cfg.w, 1e6)
        u = parse_user_params({})
        self.assertEqual((u.R, u.B, u.theta, u.H), (1.5e3, 1e3, 0.3, 1e-3))

    def test_out_of_range_fields_are_rejected(self) -> None:
        with self.assertRaises(ValidationError):
            parse_system_config({"phi": 1.5})
        with self.assertRaises(ValidationError):
            parse_user_params({"theta": 1.0})
        with self.assertRaises(ValidationError):
            parse_system_config({"I": 2.5})

    def test_unknown_keys_are_rejected(self) -> None:
        with self.assertRaises(ValidationError):
            parse_system_config({"Tslot": 0.2})


class TestQuantities(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.cfg = SystemConfig()
        cls.u = UserParams()

    def test_harvested_energy(self) -> None:
        self.assertLess(_rel(harvested_energy(20.0, self.cfg, self.u), 4.8e-4), 1e-12)

    def test_local_frequency_is_latency_tight(self) -> None:
        f = local_cpu_frequency(1.0, self.cfg, self.u)
        self.assertLess(_rel(f, 1.25e7), 1e-12)
        t, e = local_cost(1.0, f, self.cfg, self.u)
        self.assertLess(_rel(t, self.cfg.compute_window), 1e-12)
        self.assertLess(_rel(e, local_energy(1.0, self.cfg, self.u)), 1e-12)
        self.assertEqual(local_cpu_frequency(0.0, self.cfg, self.u), 0.0)

    def test_local_frequency_above_chip_limit_raises(self) -> None:
        big = UserParams(R=2e5)
        with self.assertRaises(InfeasibleLocalLoad):
            local_cpu_frequency(1.0, self.cfg, big)

    def test_offload_power_at_unit_rate(self) -> None:
        cfg = SystemConfig(W=1e6, I=1)
        u = UserParams(R=1e3, g=1e-3)
        p = offload_tx_power(0.0, 1e-3, cfg, u)
        self.assertLess(_rel(p, 1e-6 * math.expm1(1.0)), 1e-12)
        self.assertLess(_rel(offload_energy(0.0, 1e-3, cfg, u), p * 1e-3), 1e-12)

    def test_offload_without_time_is_degenerate(self) -> None:
        with self.assertRaises(DegenerateOffload):
            offload_tx_power(0.5, 0.0, self.cfg, self.u)
        self.assertEqual(offload_tx_power(1.0, 0.0, self.cfg, self.u), 0.0)

    def test_edge_cost(self) -> None:
        t, e = edge_cost(0.0, 1e8, self.cfg, self.u)
        self.assertLess(_rel(t, 0.015), 1e-12)
        self.assertLess(_rel(e, 1.5e-4), 1e-12)
        self.assertEqual(edge_cost(1.0, 0.0, self.cfg, self.u), (0.0, 0.0))


class TestCooling(unittest.TestCase):
    def setUp(self) -> None:
        self.cfg = SystemConfig()

    def test_threshold_is_capped_by_outside_air_limit(self) -> None:
        self.assertEqual(cooling_threshold(self.cfg), 10.0)
        cfg = SystemConfig(P_a_max=100.0)
        self.assertLess(_rel(cooling_threshold(cfg), math.sqrt(0.5 / 3e-3)), 1e-12)

    def test_both_regimes(self) -> None:
        self.assertLess(_rel(cooling_power(5.0, self.cfg), 0.125), 1e-12)
        self.assertLess(_rel(cooling_power(12.0, self.cfg), 2.0), 1e-12)
        self.assertLess(_rel(cooling_slope(5.0, self.cfg), 0.075), 1e-12)
        self.assertEqual(cooling_slope(12.0, self.cfg), 0.5)

    def test_continuous_and_nondecreasing(self) -> None:
        P = np.linspace(0.0, 30.0, 3001)
        C = cooling_power(P, self.cfg)
        self.assertTrue(np.all(np.diff(C) >= -1e-15), msg="cooling power must not decrease")
        below = cooling_power(10.0 - 1e-9, self.cfg)
        above = cooling_power(10.0 + 1e-9, self.cfg)
        self.assertLess(abs(above - below), 1e-7)
        for p in (0.0, 3.0, 10.0, 17.5):
            self.assertLess(abs(float(C[int(p * 100)]) - cooling_power(p, self.cfg)), 1e-12)


class TestEnergyReport(unittest.TestCase):
    def test_local_only_chain(self) -> None:
        cfg = SystemConfig(I=1)
        u = UserParams()
        alloc = Allocation(a=(1.0,), f_u=(1.25e7,), f_s=(0.0,), P_b=(0.09765625,), T_off=(0.0,))
        rep = total_ap_energy(alloc, cfg, [u])
        self.assertTrue(rep.feasible, msg=f"violations: {rep.violations}")
        self.assertLess(_rel(rep.E_total, 7.8125e-3), 1e-12)
        self.assertEqual(rep.E_cool, 0.0)
        self.assertLess(_rel(rep.E_h[0], rep.E_loc[0]), 1e-12)

    def test_zero_allocation_for_empty_tasks(self) -> None:
        cfg = SystemConfig(I=3)
        users = [UserParams(R=0.0)] * 3
        rep = total_ap_energy(Allocation.zeros(3), cfg, users)
        self.assertEqual(rep.E_total, 0.0)
        self.assertTrue(rep.feasible)

    def test_zero_time_offload_propagates(self) -> None:
        cfg = SystemConfig(I=1)
        alloc = Allocation(a=(0.5,), f_u=(6.25e6,), f_s=(1e8,), P_b=(1.0,), T_off=(0.0,))
        with self.assertRaises(DegenerateOffload):
            total_ap_energy(alloc, cfg, [UserParams()])

    def test_violations_name_the_constraint(self) -> None:
        cfg = SystemConfig(I=2)
        users = [UserParams()] * 2
        alloc = Allocation(a=(1.0, 1.0), f_u=(1.25e7, 1e7), f_s=(0.0, 0.0), P_b=(15.0, 0.0), T_off=(0.0, 0.0))
        found = {(v.constraint, v.user) for v in check_feasibility(alloc, cfg, users)}
        self.assertIn(("energy_causality", 1), found, msg="user 1 harvests nothing")
        self.assertIn(("local_latency", 1), found, msg="user 1 runs too slowly")
        self.assertNotIn(("energy_causality", 0), found)

        over = Allocation(a=(1.0, 1.0), f_u=(1.25e7, 1.25e7), f_s=(0.0, 0.0), P_b=(15.0, 15.0), T_off=(0.0, 0.0))
        found = {v.constraint for v in check_feasibility(over, cfg, users)}
        self.assertEqual(found, {"wpt_budget"})


class TestCoolingShape(unittest.TestCase):
    def test_slopes_match_at_the_threshold(self) -> None:
        cfg = SystemConfig(P_a_max=100.0)
        p_th = cooling_threshold(cfg)
        self.assertLess(p_th, cfg.P_a_max)
        h = 1e-6 * p_th
        left = (cooling_power(p_th, cfg) - cooling_power(p_th - h, cfg)) / h
        right = (cooling_power(p_th + h, cfg) - cooling_power(p_th, cfg)) / h
        self.assertLess(_rel(left, cfg.eps2), 1e-5)
        self.assertLess(_rel(right, cfg.eps2), 1e-9)
        self.assertLess(_rel(cooling_slope(p_th, cfg), cfg.eps2), 1e-12)

    def test_cooling_energy_is_convex_in_one_edge_frequency(self) -> None:
        for cfg in (SystemConfig(), SystemConfig(P_a_max=100.0), SystemConfig(P_a_max=0.0, eps2=2.0)):
            f = np.linspace(0.0, cfg.f_s_max, 401)
            E = np.array([cooling_energy([x, 5e8], cfg) for x in f])
            d2 = E[2:] - 2.0 * E[1:-1] + E[:-2]
            self.assertGreaterEqual(float(d2.min()), -1e-12 * float(E.max()), msg=f"P_a_max={cfg.P_a_max}")


def _random_instance(rng: np.random.Generator) -> tuple[SystemConfig, list[UserParams], Allocation]:
    """A feasible allocation: latency-tight local and offload times, harvest covering the need."""
    n = int(rng.integers(1, 6))
    cfg = SystemConfig(
        T=float(rng.uniform(0.1, 0.3)),
        phi=float(rng.uniform(0.2, 0.6)),
        I=n,
        P_b_max=1e3,
        eps2=float(rng.uniform(0.1, 2.0)),
        P_a_max=float(rng.uniform(0.0, 30.0)),
    )
    L = cfg.compute_window
    users = [
        UserParams(
            R=float(rng.uniform(0.2e3, 2e3)),
            g=float(rng.uniform(5e-8, 2e-7)),
            H=float(rng.uniform(5e-4, 2e-3)),
            theta=float(rng.uniform(0.2, 0.6)),
        )
        for _ in range(n)
    ]
    a = [float(rng.uniform(0.0, 1.0)) for _ in range(n)]
    f_s = [cfg.f_s_max / n * float(rng.uniform(0.5, 1.0)) for _ in range(n)]
    T_off = [L - edge_cost(a[i], f_s[i], cfg, u)[0] for i, u in enumerate(users)]
    f_u = [local_cpu_frequency(a[i], cfg, u) for i, u in enumerate(users)]
    P_b = [
        (local_energy(a[i], cfg, u) + offload_energy(a[i], T_off[i], cfg, u)) / harvested_energy(1.0, cfg, u)
        for i, u in enumerate(users)
    ]
    alloc = Allocation(a=tuple(a), f_u=tuple(f_u), f_s=tuple(f_s), P_b=tuple(P_b), T_off=tuple(T_off))
    return cfg, users, alloc


class TestEnergyReportProperties(unittest.TestCase):
    def test_randomised_instances(self) -> None:
        rng = np.random.default_rng(7)
        for k in range(1000):
            cfg, users, alloc = _random_instance(rng)
            rep = total_ap_energy(alloc, cfg, users)
            self.assertTrue(rep.feasible, msg=f"instance {k}: {rep.violations}")
            parts = rep.E_wpt + rep.E_comp_total + rep.E_cool
            self.assertLess(_rel(rep.E_total, parts), 1e-12, msg=f"instance {k}")
            self.assertLess(_rel(rep.E_cool, cooling_power(rep.P_comp, cfg) * cfg.compute_window), 1e-12)
            self.assertGreater(rep.E_total, 0.0)
            # a small cut in any user's WPT power breaks that user's energy balance
            i = int(rng.integers(0, len(users)))
            P_b = list(alloc.P_b)
            P_b[i] *= 1.0 - 1e-6
            found = {(v.constraint, v.user) for v in check_feasibility(replace(alloc, P_b=tuple(P_b)), cfg, users)}
            self.assertEqual(found, {("energy_causality", i)}, msg=f"instance {k}")

    def test_user_order_does_not_matter(self) -> None:
        rng = np.random.default_rng(3)
        for _ in range(20):
            cfg, users, alloc = _random_instance(rng)
            order = [int(j) for j in rng.permutation(len(users))]
            shuffled = Allocation(**{
                name: tuple(getattr(alloc, name)[j] for j in order) for name in ("a", "f_u", "f_s", "P_b", "T_off")
            })
            a = total_ap_energy(alloc, cfg, users)
            b = total_ap_energy(shuffled, cfg, [users[j] for j in order])
            self.assertLess(_rel(b.E_total, a.E_total), 1e-14)
            self.assertLess(_rel(b.E_cool, a.E_cool), 1e-14)
            self.assertEqual(b.E_comp, tuple(a.E_comp[j] for j in order))

    def test_two_users_add_up_apart_from_cooling(self) -> None:
        cfg = SystemConfig(I=2, P_a_max=100.0)
        users = [UserParams(R=1e3), UserParams(R=2e3, g=2e-7)]
        alloc = Allocation(a=(0.3, 0.6), f_u=(0.0, 0.0), f_s=(4e8, 6e8), P_b=(1.0, 2.0), T_off=(0.05, 0.06))
        alloc = replace(alloc, f_u=tuple(local_cpu_frequency(alloc.a[i], cfg, u) for i, u in enumerate(users)))
        pair = total_ap_energy(alloc, cfg, users)
        singles = [
            total_ap_energy(Allocation(**{k: (v,) for k, v in alloc.user(i).items()}), cfg, [u])
            for i, u in enumerate(users)
        ]
        self.assertLess(_rel(pair.E_wpt, math.fsum(s.E_wpt for s in singles)), 1e-14)
        self.assertLess(_rel(pair.E_comp_total, math.fsum(s.E_comp_total for s in singles)), 1e-14)
        self.assertLess(_rel(pair.P_comp, math.fsum(s.P_comp for s in singles)), 1e-14)
        # cooling is superadditive: the shared server runs hotter than either alone
        self.assertGreaterEqual(pair.E_cool, math.fsum(s.E_cool for s in singles))

    def test_wpt_budget_is_closed(self) -> None:
        cfg = SystemConfig(I=2)
        users = [UserParams()] * 2
        alloc = Allocation(a=(1.0, 1.0), f_u=(1.25e7, 1.25e7), f_s=(0.0, 0.0), P_b=(7.5, 12.5), T_off=(0.0, 0.0))
        self.assertEqual(check_feasibility(alloc, cfg, users, tol=1e-12), [])
        over = replace(alloc, P_b=(7.5, 12.5 + 1e-6))
        found = {v.constraint for v in check_feasibility(over, cfg, users, tol=1e-12)}
        self.assertEqual(found, {"wpt_budget"})



if __name__ == "__main__":
    unittest.main()
