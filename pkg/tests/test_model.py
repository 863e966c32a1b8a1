import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from spectrum_subsidy import (
    BudgetViolationError,
    ConfigError,
    GovernmentPolicy,
    MarketConfig,
    StrategyProfile,
    choice_probabilities,
    customer_utility,
    general_provider_objective,
    outside_call_flows,
    outside_calls_served,
    provider_objective,
    social_welfare,
)
from spectrum_subsidy.model import contest_shares, flow_weights, linear_penalty

spend_value = st.floats(min_value=1e-3, max_value=1e3)
fee_value = st.floats(min_value=0.0, max_value=50.0)


@st.composite
def markets(draw, J=2, K=2):
    n = tuple(draw(st.integers(1, 1000)) for _ in range(K))
    beta = draw(st.floats(1.0, 200.0))
    gamma = draw(st.floats(0.01, 0.2))
    alpha = draw(st.floats(0.1, 5.0))
    cfg = MarketConfig(populations=n, beta=beta, gamma=gamma, alpha=alpha,
                       total_subsidy=1e4, provider_count=J)
    spend = np.array([[draw(spend_value) for _ in range(K)] for _ in range(J)])
    fees = np.array([draw(fee_value) for _ in range(J)])
    grants = tuple(float(row.sum()) * 1.01 for row in spend)
    cfg = cfg.replace(total_subsidy=sum(grants))
    return cfg, GovernmentPolicy(grants), StrategyProfile(spend, fees)


class TestConfig:
    def test_derived_quantities(self):
        cfg = MarketConfig(populations=(40, 80), beta=30)
        assert cfg.total_customers == 120
        assert cfg.region_count == 2
        assert cfg.initial_cash == (0.0, 0.0)

    @pytest.mark.parametrize("kwargs, field", [
        ({"populations": (0, 5), "beta": 1}, "n[0]"),
        ({"populations": (5, 5), "beta": 0}, "beta"),
        ({"populations": (5, 5), "beta": 1, "alpha": -1}, "alpha"),
        ({"populations": (5, 5), "beta": 1, "gamma": math.nan}, "gamma"),
        ({"populations": (), "beta": 1}, "n"),
    ])
    def test_rejects_bad_values(self, kwargs, field):
        with pytest.raises(ConfigError) as exc:
            MarketConfig(**kwargs)
        assert exc.value.field == field

    def test_grants_cannot_exceed_total(self):
        cfg = MarketConfig(populations=(5, 5), beta=1)
        with pytest.raises(ConfigError):
            GovernmentPolicy((600, 500)).validate(cfg)

    def test_delta_is_total_over_alpha_customers(self):
        cfg = MarketConfig(populations=(40, 80), beta=30, alpha=2)
        assert GovernmentPolicy((400, 600)).delta(cfg) == 1000 / (2 * 120)


class TestUtility:
    def test_zero(self):
        assert customer_utility(0, 0, MarketConfig(populations=(1, 1), beta=30)) == 0

    def test_values(self):
        cfg = MarketConfig(populations=(1, 1), beta=30, gamma=0.05)
        assert customer_utility(200, 0, cfg) == pytest.approx(21.2132034, rel=1e-8)
        assert customer_utility(100, 21.2132034, cfg) == pytest.approx(-6.2132034, rel=1e-7)


class TestChoice:
    def test_identical_offers_split_evenly(self):
        cfg = MarketConfig(populations=(10, 10), beta=30)
        p = StrategyProfile.from_flat(100, 100, 100, 100, 5, 5)
        np.testing.assert_allclose(choice_probabilities(0, p, cfg), [0.5, 0.5])

    def test_proportional(self):
        np.testing.assert_allclose(contest_shares([30.0, 10.0]), [0.75, 0.25])

    def test_all_negative_falls_back_to_uniform(self):
        np.testing.assert_allclose(contest_shares([-5.0, -5.0]), [0.5, 0.5])
        cfg = MarketConfig(populations=(10, 10), beta=30)
        p = StrategyProfile.from_flat(1, 1, 1, 1, 40, 40)
        np.testing.assert_allclose(choice_probabilities(1, p, cfg), [0.5, 0.5])

    @given(markets(J=3, K=3))
    def test_simplex(self, m):
        cfg, _, profile = m
        for k in range(cfg.region_count):
            p = choice_probabilities(k, profile, cfg)
            assert np.all(p >= 0)
            assert abs(p.sum() - 1) <= 1e-12

    def test_scale_invariance_with_zero_fees(self):
        cfg = MarketConfig(populations=(10, 20), beta=30)
        p = StrategyProfile.from_flat(3, 7, 11, 2, 0, 0)
        q = StrategyProfile(p.spend * 9.0, p.fees)
        for k in (0, 1):
            np.testing.assert_allclose(choice_probabilities(k, p, cfg),
                                       choice_probabilities(k, q, cfg), rtol=1e-14)


class TestFlows:
    def test_two_regions(self):
        cfg = MarketConfig(populations=(40, 80), beta=1, alpha=2)
        np.testing.assert_allclose(outside_call_flows(cfg), [[0, 80], [160, 0]])

    def test_zero_alpha(self):
        cfg = MarketConfig(populations=(40, 80), beta=1, alpha=0)
        assert not outside_call_flows(cfg).any()

    def test_three_regions(self):
        cfg = MarketConfig(populations=(10, 10, 10), beta=1)
        np.testing.assert_allclose(outside_call_flows(cfg), 5 * (1 - np.eye(3)))

    def test_single_region(self):
        cfg = MarketConfig(populations=(10,), beta=1)
        assert outside_call_flows(cfg).shape == (1, 1)

    @given(st.lists(st.integers(1, 1000), min_size=2, max_size=5), st.floats(0.1, 5))
    def test_weights_are_inflow_over_alpha(self, n, alpha):
        cfg = MarketConfig(populations=n, beta=1, alpha=alpha)
        np.testing.assert_allclose(alpha * flow_weights(cfg),
                                   outside_call_flows(cfg).sum(axis=0), rtol=1e-12)

    @given(st.lists(st.integers(1, 1000), min_size=2, max_size=5), st.floats(0.1, 5))
    def test_matches_oracle_and_rows_sum(self, n, alpha):
        cfg = MarketConfig(populations=n, beta=1, alpha=alpha)
        got = outside_call_flows(cfg)
        np.testing.assert_allclose(got, oracles.flows(n, alpha), rtol=1e-12)
        np.testing.assert_allclose(got.sum(axis=1), alpha * np.array(n), rtol=1e-12)


class TestOutsideCalls:
    def test_symmetric(self):
        cfg = MarketConfig(populations=(40, 80), beta=30, alpha=1.5)
        p = StrategyProfile.from_flat(10, 20, 10, 20, 1, 1)
        assert outside_calls_served(0, p, cfg) == pytest.approx(1.5 * 120 / 2)

    def test_one_provider_takes_everything(self):
        cfg = MarketConfig(populations=(40, 80), beta=30, alpha=2)
        p = StrategyProfile.from_flat(100, 100, 0, 0, 0, 0)
        assert outside_calls_served(0, p, cfg) == pytest.approx(240)
        assert outside_calls_served(1, p, cfg) == 0

    @given(markets(J=3, K=3))
    def test_conservation(self, m):
        cfg, _, profile = m
        total = sum(outside_calls_served(j, profile, cfg) for j in range(3))
        assert total == pytest.approx(cfg.alpha * cfg.total_customers, rel=1e-9)

    @given(markets(J=2, K=3))
    def test_matches_oracle(self, m):
        cfg, _, profile = m
        got = outside_calls_served(1, profile, cfg)
        want = oracles.outside_calls(1, profile.spend.tolist(), cfg.populations,
                                     cfg.alpha, cfg.gamma)
        assert got == pytest.approx(want, rel=1e-10)


class TestProviderObjective:
    def test_all_zero_profile(self):
        cfg = MarketConfig(populations=(26, 744), beta=76)
        policy = GovernmentPolicy((262, 738))
        zero = StrategyProfile.zeros()
        for j in (0, 1):
            assert provider_objective(j, zero, policy, cfg) == pytest.approx(500.0, rel=1e-12)

    @given(markets(J=2, K=2), st.floats(0.1, 100.0))
    def test_alpha_independent(self, m, c):
        cfg, policy, profile = m
        scaled = cfg.replace(alpha=cfg.alpha * c)
        for j in (0, 1):
            a = provider_objective(j, profile, policy, cfg)
            b = provider_objective(j, profile, policy, scaled)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    @given(markets(J=3, K=3))
    def test_matches_oracle(self, m):
        cfg, policy, profile = m
        for j in range(3):
            want = oracles.objective(j, profile.spend.tolist(), profile.fees.tolist(),
                                     cfg.populations, cfg.beta, cfg.gamma, cfg.alpha,
                                     cfg.total_subsidy)
            got = provider_objective(j, profile, policy, cfg)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-9)

    def test_budget_violation_names_provider(self):
        cfg = MarketConfig(populations=(10, 10), beta=30)
        policy = GovernmentPolicy((100, 100))
        p = StrategyProfile.from_flat(10, 10, 80, 80, 1, 1)
        with pytest.raises(BudgetViolationError) as exc:
            provider_objective(1, p, policy, cfg)
        assert exc.value.provider == 1

    def test_initial_cash_extends_budget(self):
        cfg = MarketConfig(populations=(10, 10), beta=30, initial_cash=(0, 100))
        policy = GovernmentPolicy((100, 100))
        p = StrategyProfile.from_flat(10, 10, 80, 80, 1, 1)
        assert math.isfinite(provider_objective(1, p, policy, cfg))


class TestGeneralObjective:
    def test_full_penalty_removes_subsidy(self, table5):
        cfg, _ = table5
        p = StrategyProfile.from_flat(100, 100, 100, 100, 5, 5)
        keep_none = GovernmentPolicy((400, 600), penalty=lambda oc: 1.0)
        keep_all = GovernmentPolicy((400, 600), penalty=lambda oc: 0.0)
        a = general_provider_objective(0, p, keep_none, cfg)
        b = general_provider_objective(0, p, keep_all, cfg)
        assert b - a == pytest.approx(400)

    def test_no_spend_no_penalty(self, table5):
        cfg, _ = table5
        p = StrategyProfile.from_flat(0, 0, 100, 100, 5, 5)
        policy = GovernmentPolicy((400, 600), penalty=lambda oc: 0.0)
        assert general_provider_objective(0, p, policy, cfg) == pytest.approx(400)

    @given(markets(J=2, K=2))
    def test_equals_simplified_with_linear_reward(self, m):
        cfg, policy, profile = m
        for j in (0, 1):
            got = general_provider_objective(j, profile, policy, cfg)
            assert got == pytest.approx(provider_objective(j, profile, policy, cfg),
                                        rel=1e-10, abs=1e-9)

    def test_capped_penalty_below_threshold(self, table5):
        cfg, _ = table5
        p = StrategyProfile.from_flat(10, 10, 100, 100, 5, 5)
        base = GovernmentPolicy((400, 600))
        capped = GovernmentPolicy((400, 600), penalty=linear_penalty(base.delta(cfg), 400))
        assert general_provider_objective(0, p, capped, cfg) == pytest.approx(
            provider_objective(0, p, base, cfg))

    def test_rejects_out_of_range_penalty(self, table5):
        cfg, _ = table5
        p = StrategyProfile.from_flat(10, 10, 100, 100, 5, 5)
        with pytest.raises(ConfigError):
            general_provider_objective(0, p, GovernmentPolicy((400, 600), penalty=lambda oc: 2),
                                       cfg)

    def test_bandwidth_checks(self, table5):
        cfg, policy = table5
        p = StrategyProfile.from_flat(10, 10, 100, 100, 5, 5)
        with pytest.raises(ConfigError):
            general_provider_objective(0, p, policy, cfg, bandwidth=[[1, 1], [2, 2]],
                                       bandwidth_grants=(2, 5))
        value = general_provider_objective(
            0, p, policy, cfg, bandwidth=[[1, 1], [2, 2]], bandwidth_grants=(2, 4),
            intensity=lambda s, b: s * b)
        assert math.isfinite(value)

    def test_intensity_identity_matches_default(self, table5):
        cfg, policy = table5
        p = StrategyProfile.from_flat(10, 30, 100, 200, 5, 6)
        assert general_provider_objective(0, p, policy, cfg, intensity=lambda s, b: s) == \
            general_provider_objective(0, p, policy, cfg)


class TestWelfare:
    def test_zero_profile(self, table5):
        cfg, _ = table5
        assert social_welfare(StrategyProfile.zeros(), cfg) == 0

    @given(markets(J=2, K=2))
    def test_matches_summand_oracle(self, m):
        cfg, _, profile = m
        want = oracles.welfare(profile.spend.tolist(), profile.fees.tolist(), cfg.populations,
                               cfg.beta, cfg.gamma, cfg.alpha)
        assert social_welfare(profile, cfg) == pytest.approx(want, rel=1e-10)

    @given(markets(J=2, K=2), st.integers(0, 3), st.floats(1.0, 100.0))
    def test_monotone_when_raising_the_regional_leader(self, m, idx, bump):
        # Per region welfare is sum(u**2) / sum(u); raising u_j helps whenever
        # u_j >= (sqrt(2) - 1) * u_rival, in particular for the regional leader.
        cfg, _, profile = m
        j, k = divmod(idx, 2)
        spend = profile.spend.copy()
        spend[j, k] = max(spend[j, k], spend[1 - j, k])
        free = StrategyProfile(spend, np.zeros(2))
        spend = spend.copy()
        spend[j, k] += bump
        more = StrategyProfile(spend, np.zeros(2))
        assert social_welfare(more, cfg) >= social_welfare(free, cfg) - 1e-9

    def test_raising_a_far_weaker_provider_can_lower_welfare(self):
        cfg = MarketConfig(populations=(1, 1), beta=1, gamma=0.125)
        base = StrategyProfile.from_flat(1, 1, 9, 1, 0, 0)
        bumped = StrategyProfile.from_flat(2, 1, 9, 1, 0, 0)
        want = [oracles.welfare(p.spend.tolist(), [0, 0], (1, 1), 1, 0.125, 1)
                for p in (base, bumped)]
        assert want[1] < want[0]
        assert social_welfare(bumped, cfg) == pytest.approx(want[1], rel=1e-12)


class TestStrategyProfile:
    def test_immutable(self):
        p = StrategyProfile.zeros()
        with pytest.raises(ValueError):
            p.spend[0, 0] = 1

    def test_rejects_negative(self):
        with pytest.raises(ConfigError):
            StrategyProfile.from_flat(-1, 0, 0, 0, 0, 0)
        with pytest.raises(ConfigError):
            StrategyProfile.from_flat(1, 0, 0, 0, -1, 0)

    def test_flat_round_trip(self):
        p = StrategyProfile.from_flat(1, 2, 3, 4, 5, 6)
        assert p.flat() == (1, 2, 3, 4, 5, 6)
        assert StrategyProfile.from_flat(*p.flat()) == p
