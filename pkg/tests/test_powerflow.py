"""Voltage profiles, feasibility predicates, and branch-flow identities."""

import numpy as np
import pytest

from gridshare.powerflow import (
    Model,
    NetworkConfig,
    is_feasible,
    ld_budget,
    ld_coefficients,
    ld_constraint_lhs,
    max_feasible_scale,
    reconstruct_branch_flows,
    root_voltage_batch,
    voltage_gradient,
    voltage_profile_distflow,
)


def cfg2(**kw):
    base = dict(n_stations=2, resistance=0.1, delta=0.05, capacity=100)
    base.update(kw)
    return NetworkConfig(**base)


class TestNetworkConfig:
    def test_defaults(self):
        cfg = cfg2()
        assert cfg.model is Model.DISTFLOW
        assert cfg.voltage_bound == pytest.approx(1.0 / 0.95)

    def test_model_coercion_from_string(self):
        assert cfg2(model="linearized").model is Model.LINEARIZED

    @pytest.mark.parametrize(
        "kw",
        [
            {"n_stations": 0},
            {"n_stations": 2, "capacity": 0},
            {"n_stations": 2, "resistance": 0.0},
            {"n_stations": 2, "resistance": -1.0},
            {"n_stations": 2, "delta": 0.0},
            {"n_stations": 2, "delta": 0.51},
        ],
    )
    def test_invalid_parameters_rejected(self, kw):
        with pytest.raises(ValueError):
            NetworkConfig(**kw)


class TestVoltageProfile:
    def test_zero_load_gives_flat_profile(self):
        v = voltage_profile_distflow([0.0, 0.0], cfg2())
        np.testing.assert_allclose(v, [1.0, 1.0, 1.0])

    def test_single_station_hand_value(self):
        cfg = NetworkConfig(n_stations=1, resistance=0.1, delta=0.05)
        np.testing.assert_allclose(voltage_profile_distflow([1.0], cfg), [1.1, 1.0])

    def test_two_station_hand_value(self):
        v = voltage_profile_distflow([0.3, 0.2], cfg2())
        # V1 = 1 + 0.02, V0 = 2*1.02 - 1 + 0.03/1.02
        np.testing.assert_allclose(v, [1.0694118, 1.02, 1.0], atol=5e-8)

    def test_far_node_normalized_exactly(self):
        v = voltage_profile_distflow([0.4, 0.1], cfg2())
        assert v[-1] == 1.0

    def test_rejects_negative_power(self):
        with pytest.raises(ValueError):
            voltage_profile_distflow([-0.1, 0.0], cfg2())

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            voltage_profile_distflow([0.1], cfg2())

    def test_batch_matches_scalar_recursion(self):
        rng = np.random.default_rng(7)
        cfg = NetworkConfig(n_stations=4, resistance=0.07, delta=0.05)
        powers = rng.uniform(0.0, 0.5, size=(40, 4))
        v0 = root_voltage_batch(powers, cfg.resistance)
        expected = [voltage_profile_distflow(p, cfg)[0] for p in powers]
        np.testing.assert_allclose(v0, expected, rtol=1e-14)


class TestLinearizedConstraint:
    def test_budget_value(self):
        assert ld_budget(cfg2()) == pytest.approx(0.1080332, abs=5e-8)

    def test_budget_at_half(self):
        assert ld_budget(cfg2(delta=0.5)) == pytest.approx(3.0)

    def test_budget_vanishes_with_delta(self):
        assert ld_budget(cfg2(delta=1e-9)) == pytest.approx(0.0, abs=1e-8)

    def test_lhs_examples(self):
        assert ld_constraint_lhs([0.0, 0.0], cfg2()) == 0.0
        assert ld_constraint_lhs([0.3, 0.2], cfg2()) == pytest.approx(0.14)
        cfg1 = NetworkConfig(n_stations=1, resistance=0.1, delta=0.05)
        assert ld_constraint_lhs([1.0], cfg1) == pytest.approx(0.2)

    def test_coefficients(self):
        np.testing.assert_allclose(ld_coefficients(cfg2()), [0.2, 0.4])


class TestFeasibility:
    def test_zero_feasible_both_models(self):
        assert is_feasible([0.0, 0.0], cfg2())
        assert is_feasible([0.0, 0.0], cfg2(model="linearized"))

    def test_overload_infeasible_both_models(self):
        assert not is_feasible([0.3, 0.2], cfg2())
        assert not is_feasible([0.3, 0.2], cfg2(model="linearized"))

    def test_boundary_counts_as_feasible(self):
        cfg = cfg2(model="linearized")
        p = np.array([ld_budget(cfg) / 0.2, 0.0])  # exactly on the budget
        assert is_feasible(p, cfg)

    def test_distflow_implies_linearized(self):
        rng = np.random.default_rng(11)
        cfg_d = cfg2()
        cfg_ld = cfg2(model="linearized")
        hits = 0
        for _ in range(500):
            p = rng.uniform(0.0, 0.3, size=2)
            if is_feasible(p, cfg_d):
                hits += 1
                assert is_feasible(p, cfg_ld)
        assert hits > 0

    def test_root_voltage_dominates_linearized_proxy(self):
        rng = np.random.default_rng(13)
        cfg = NetworkConfig(n_stations=3, resistance=0.1, delta=0.05)
        for _ in range(200):
            p = rng.uniform(0.0, 0.5, size=3)
            v0 = voltage_profile_distflow(p, cfg)[0]
            assert v0 >= np.sqrt(1.0 + ld_constraint_lhs(p, cfg)) - 1e-12


class TestBranchFlows:
    def test_zero_load(self):
        cfg = cfg2()
        flows = reconstruct_branch_flows([1.0, 1.0, 1.0], [0.0, 0.0], cfg)
        assert all(f.current == 0 and f.sending_power == 0 for f in flows)

    def test_single_station_hand_values(self):
        cfg = NetworkConfig(n_stations=1, resistance=0.1, delta=0.05)
        (flow,) = reconstruct_branch_flows([1.1, 1.0], [1.0], cfg)
        assert flow.current == pytest.approx(1.0)
        assert flow.sending_power == pytest.approx(1.1)
        # node balance: S - r I^2 = p
        assert flow.sending_power - 0.1 * flow.current**2 == pytest.approx(1.0)

    def test_two_station_balances(self):
        cfg = cfg2()
        p = np.array([0.3, 0.2])
        v = voltage_profile_distflow(p, cfg)
        flows = reconstruct_branch_flows(v, p, cfg)
        assert flows[1].current == pytest.approx(0.2)
        assert flows[0].current == pytest.approx(0.4941176, abs=5e-8)
        sending = [f.sending_power for f in flows] + [0.0]
        for j, f in enumerate(flows):
            balance = f.sending_power - cfg.resistance * f.current**2
            assert balance == pytest.approx(p[j] + sending[j + 1], abs=1e-12)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            reconstruct_branch_flows([1.0, 1.0], [0.1, 0.1], cfg2())

    def test_random_profiles_balance(self):
        rng = np.random.default_rng(3)
        cfg = NetworkConfig(n_stations=5, resistance=0.08, delta=0.05)
        for _ in range(100):
            p = rng.uniform(0.0, 0.2, size=5)
            v = voltage_profile_distflow(p, cfg)
            flows = reconstruct_branch_flows(v, p, cfg)
            sending = [f.sending_power for f in flows] + [0.0]
            for j, f in enumerate(flows):
                lhs = f.sending_power - cfg.resistance * f.current**2
                assert abs(lhs - (p[j] + sending[j + 1])) <= 1e-12


class TestMaxFeasibleScale:
    def test_axis_values(self):
        cfg = cfg2()
        assert max_feasible_scale([1.0, 0.0], cfg) == pytest.approx(0.5263158, abs=5e-8)
        assert max_feasible_scale([0.0, 1.0], cfg) == pytest.approx(0.2631579, abs=5e-8)
        cfg_ld = cfg2(model="linearized")
        assert max_feasible_scale([1.0, 0.0], cfg_ld) == pytest.approx(
            0.5401662, abs=5e-8
        )

    def test_rejects_zero_direction(self):
        with pytest.raises(ValueError):
            max_feasible_scale([0.0, 0.0], cfg2())

    @pytest.mark.parametrize("model", ["distflow", "linearized"])
    def test_returned_scale_is_tight(self, model):
        rng = np.random.default_rng(17)
        cfg = NetworkConfig(n_stations=3, resistance=0.1, delta=0.05, model=model)
        for _ in range(50):
            d = rng.uniform(0.1, 1.0, size=3)
            t = max_feasible_scale(d, cfg)
            assert is_feasible(t * d, cfg)
            assert not is_feasible((t + 1e-8) * d, cfg, tol=0.0)


class TestVoltageGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(19)
        cfg = NetworkConfig(n_stations=4, resistance=0.1, delta=0.05)
        step = 1e-6
        for _ in range(50):
            p = rng.uniform(0.05, 0.4, size=4)
            grad = voltage_gradient(p, cfg)
            for j in range(4):
                dp = np.zeros(4)
                dp[j] = step
                fd = (
                    voltage_profile_distflow(p + dp, cfg)[0]
                    - voltage_profile_distflow(p - dp, cfg)[0]
                ) / (2 * step)
                assert grad[j] == pytest.approx(fd, rel=1e-4)

    def test_monotone_root_voltage(self):
        rng = np.random.default_rng(23)
        cfg = NetworkConfig(n_stations=3, resistance=0.1, delta=0.05)
        for _ in range(1000):
            p = rng.uniform(0.0, 0.5, size=3)
            j = rng.integers(3)
            dp = np.zeros(3)
            dp[j] = 1e-6
            v0 = voltage_profile_distflow(p, cfg)[0]
            v0_up = voltage_profile_distflow(p + dp, cfg)[0]
            assert v0_up >= v0
