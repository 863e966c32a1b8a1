import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

import oracles
from spectrum_subsidy import (
    ComplexRootError,
    GovernmentPolicy,
    MarketConfig,
    closed_form_solution,
    cubic_coefficients,
    fee_branches,
    optimum_fees,
    sorted_roots,
    subsidy_split,
    viete_roots,
)
from spectrum_subsidy import closed_form
from spectrum_subsidy.closed_form import reduced_fee_residuals

grant = st.floats(1.0, 999.0)


class TestSubsidySplit:
    def test_equal_regions_split_evenly(self):
        cfg = MarketConfig(populations=(50, 50), beta=30)
        s = subsidy_split(cfg, GovernmentPolicy((300, 700)))
        np.testing.assert_allclose(s, [[150, 150], [350, 350]])

    def test_table5_point(self, table5):
        s = subsidy_split(*table5)
        assert s[0, 0] == pytest.approx(200 * (1 / 3 + 1 / 2), rel=1e-12)
        assert s[0, 1] == pytest.approx(200 * (2 / 3 + 1 / 2), rel=1e-12)

    def test_zero_grant(self):
        cfg = MarketConfig(populations=(40, 80), beta=30)
        assert not subsidy_split(cfg, GovernmentPolicy((0, 1000)))[0].any()

    @given(st.integers(1, 1000), st.integers(1, 1000), grant)
    def test_rows_sum_to_grants(self, n1, n2, xi1):
        cfg = MarketConfig(populations=(n1, n2), beta=30)
        s = subsidy_split(cfg, GovernmentPolicy((xi1, 1000 - xi1)))
        np.testing.assert_allclose(s.sum(axis=1), [xi1, 1000 - xi1], rtol=1e-14)


class TestCoefficients:
    def test_symmetric_spends(self):
        cfg = MarketConfig(populations=(1, 1), beta=30)
        A, B, C, D = cubic_coefficients(250, 250, cfg)
        assert abs(A - C) <= 1e-12 * A
        assert B == pytest.approx(D, rel=1e-12)

    def test_zero_gamma(self):
        cfg = MarketConfig(populations=(1, 1), beta=30, gamma=0)
        assert cubic_coefficients(200, 300, cfg) == (0, 0, 0, 0)

    def test_exact_rational_A(self):
        cfg = MarketConfig(populations=(1, 1), beta=30, gamma=0.05)
        A, _, C, _ = cubic_coefficients(100, 400, cfg)
        g = Fraction(3, 2)
        assert A == pytest.approx(float(oracles.cubic_A_exact(100, 400, g)), rel=1e-14)
        assert C == pytest.approx(float(oracles.cubic_A_exact(400, 100, g)), rel=1e-14)

    def test_table5_against_high_precision(self):
        cfg = MarketConfig(populations=(40, 80), beta=30, gamma=0.05)
        A, B, C, D = cubic_coefficients(200, 300, cfg)
        with mpmath.workdps(50):
            g = mpmath.mpf(3) / 2
            r1, r2 = mpmath.sqrt(200), mpmath.sqrt(300)
            a = 4 * g**2 * (9 * r1 * r2 + (r1 - 2 * r2) ** 2) / 27
            b = g**3 / 729 * (16 * 200 * r1 - 240 * 300 * r1 - 123 * 200 * r2 - 128 * 300 * r2)
        assert A == pytest.approx(float(a), rel=1e-14)
        assert B == pytest.approx(float(b), rel=1e-13)

    @given(grant, st.integers(30, 200))
    def test_leading_coefficients_positive(self, xi1, beta):
        cfg = MarketConfig(populations=(1, 1), beta=beta)
        cf = closed_form_solution(cfg, GovernmentPolicy((xi1, 1000 - xi1)))
        assert cf.A > 0 and cf.C > 0
        assert cf.s1_star == xi1 / 2 and cf.s2_star == (1000 - xi1) / 2


class TestViete:
    def test_double_root(self):
        roots = viete_roots(3, 2)
        assert sorted(roots) == pytest.approx([-1, -1, 2], abs=1e-12)
        assert roots[2] == pytest.approx(2)

    def test_zero_constant(self):
        assert sorted_roots(1, 0) == pytest.approx((-1, 0, 1), abs=1e-12)

    def test_random_pairs_match_companion_roots(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            A = rng.uniform(0.01, 100.0)
            B = rng.uniform(-1, 1) * math.sqrt(4 * A**3 / 27)
            got = sorted_roots(A, B)
            want = np.sort(np.roots([1, 0, -A, -B]).real)
            np.testing.assert_allclose(got, want, atol=1e-8)
            p = oracles.depressed_cubic(A, B)
            for t in got:
                assert abs(p(t)) <= 1e-8 * max(1.0, A**1.5)

    def test_table5_residuals(self, table5):
        cfg, _ = table5
        A, B, C, D = cubic_coefficients(200, 300, cfg)
        for a, b in ((A, B), (C, D)):
            p = oracles.depressed_cubic(a, b)
            assert all(abs(p(t)) <= 1e-8 * max(1.0, a**1.5) for t in viete_roots(a, b))

    def test_one_real_root_is_rejected(self):
        with pytest.raises(ComplexRootError):
            viete_roots(3, 2.1)
        with pytest.raises(ComplexRootError):
            viete_roots(0, 1)
        with pytest.raises(ComplexRootError):
            viete_roots(-1, 0)

    def test_rounding_spill_is_clamped(self):
        B = 2 * (1 + 1e-13)
        assert sorted_roots(3, B) == pytest.approx((-1, -1, 2), abs=1e-6)

    def test_positive_constant_uses_signed_argument(self):
        # t^3 - 7t - 6 = (t + 1)(t + 2)(t - 3)
        assert sorted_roots(7, 6) == pytest.approx((-2, -1, 3), abs=1e-12)
        assert sorted_roots(7, -6) == pytest.approx((-3, 1, 2), abs=1e-12)


class TestFees:
    def test_symmetric_grants_give_equal_fees(self):
        cfg = MarketConfig(populations=(40, 80), beta=30)
        f1, f2 = optimum_fees(cfg, GovernmentPolicy((500, 500)))
        assert f1 == pytest.approx(f2, rel=1e-14)

    def test_larger_grant_charges_more(self, table5):
        f1, f2 = optimum_fees(*table5)
        assert f2 > f1 > 0

    @given(grant, st.integers(30, 200), st.floats(0.01, 0.2))
    def test_zero_the_reduced_conditions(self, xi1, beta, gamma):
        cfg = MarketConfig(populations=(100, 100), beta=beta, gamma=gamma)
        policy = GovernmentPolicy((xi1, 1000 - xi1))
        f1, f2 = optimum_fees(cfg, policy)
        r1, r2 = reduced_fee_residuals(f1, f2, xi1 / 2, (1000 - xi1) / 2, cfg)
        assert abs(r1) <= 1e-8 and abs(r2) <= 1e-8

    def test_near_double_root_keeps_full_precision(self):
        # Provider 1's arccos argument is 0.999993 here.
        cfg = MarketConfig(populations=(100, 100), beta=188, gamma=0.1875)
        f1, f2 = optimum_fees(cfg, GovernmentPolicy((1.0, 999.0)))
        r = reduced_fee_residuals(f1, f2, 0.5, 499.5, cfg)
        assert max(map(abs, r)) <= 1e-9

    @given(grant, st.integers(30, 200))
    def test_substitution_identity(self, xi1, beta):
        cfg = MarketConfig(populations=(1, 1), beta=beta)
        s1, s2 = xi1 / 2, (1000 - xi1) / 2
        g = cfg.fee_scale
        for k_own, k_rival in ((0, 2), (1, 1), (2, 0)):
            x = g * math.sqrt(s1) - fee_branches(s1, s2, cfg)[k_own]
            y = g * math.sqrt(s2) - fee_branches(s2, s1, cfg)[k_rival]
            denom = 2 * x - g * math.sqrt(s1)
            assume(abs(denom) > 1e-6)
            assert y == pytest.approx(-x * x / denom, rel=1e-8, abs=1e-8)

    def test_negative_fee_is_clamped_and_flagged(self, table5, monkeypatch):
        monkeypatch.setattr(closed_form, "fee_branches", lambda a, b, cfg: (0.0, -1.5, 0.0))
        fees, flags = optimum_fees(*table5, with_flags=True)
        assert fees == (0.0, 0.0) and flags == (True, True)

    def test_solution_bundle(self, table5):
        cf = closed_form_solution(*table5)
        assert cf.f_star == optimum_fees(*table5)
        np.testing.assert_allclose(cf.s_star, subsidy_split(*table5))
        assert cf.fee_clamped == (False, False)
