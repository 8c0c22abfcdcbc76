"""Tests for the closed-form bound and moment evaluators."""

import math

import numpy as np
import pytest

from supprec.bounds import (
    BoundConstants,
    chisq_cube_central_moment_bound,
    chisq_mean_lower_tail,
    chisq_mean_upper_tail,
    conditional_moments,
    max_sq_norm_tail,
    norm4_mean_tail,
    norm6_mean_tail,
    per_sample_moments,
    rosenthal_sum_moment,
    sample_complexity_upper,
    separation_all_pairs,
    separation_condition,
    separation_report_from_norms,
    threshold_window,
)
from supprec.model import ProblemConfig, generate_instance

from helpers import make_instance

C1 = BoundConstants()


class TestConditionalMoments:
    def test_single_coordinate_noiseless_variances_vanish(self):
        # k = 1, sigma2 = 0: no interference, per-sample variance is zero
        # on support, and the conditional mean reduces to x^2 ||col||^4.
        inst = generate_instance(ProblemConfig(d=5, k=1, m=3, n=10, seed=2))
        u = inst.support.indices[0]
        u_prime = (u + 1) % 5
        cm = conditional_moments(inst, u, u_prime)
        assert np.all(cm.nu2_i == 0.0)
        phi = inst.measurements.matrices
        sq = np.einsum("im,im->i", phi[:, :, u], phi[:, :, u])
        x_u = inst.signals.vectors[:, u]
        assert cm.mu == pytest.approx(float(np.mean(x_u**2 * sq**2)), rel=1e-12)

    def test_hand_example_all_ones(self):
        # n = 1, m = 1, all measurement entries 1, x = (1, 1, 0):
        # mu_i = 1, nu_i^2 = 1, mu = 2, mu' = 2.
        inst = make_instance([[[1.0, 1.0, 1.0]]], [[1.0, 1.0, 0.0]], [[0.0]])
        cm = conditional_moments(inst, 0, 2)
        assert cm.mu_i[0] == 1.0
        assert cm.nu2_i[0] == 1.0
        assert cm.mu == 2.0
        assert cm.mu_prime == 2.0

    def test_argument_validation(self):
        inst = generate_instance(ProblemConfig(d=5, k=2, m=3, n=4, seed=1))
        off = [u for u in range(5) if u not in inst.support.indices]
        with pytest.raises(ValueError):
            conditional_moments(inst, off[0], off[1])
        with pytest.raises(ValueError):
            conditional_moments(inst, inst.support.indices[0], inst.support.indices[1])

    def test_per_sample_moments_off_support_mean_zero(self):
        inst = generate_instance(ProblemConfig(d=6, k=2, m=3, n=7, sigma2=0.5, seed=4))
        off = [u for u in range(6) if u not in inst.support.indices][0]
        mean, var = per_sample_moments(inst, off)
        assert np.all(mean == 0.0)
        assert np.all(var > 0.0)


class TestThresholdWindow:
    def test_degenerate_window_is_mean_interval(self):
        # All per-sample variances zero: the window collapses to [mu', mu].
        inst = generate_instance(ProblemConfig(d=5, k=1, m=3, n=10, seed=2))
        u = inst.support.indices[0]
        u_prime = (u + 1) % 5
        cm = conditional_moments(inst, u, u_prime)
        cm_zero = type(cm)(cm.mu_i, np.zeros_like(cm.nu2_i), np.zeros_like(cm.nu2p_i), cm.mu, cm.mu_prime)
        win = threshold_window(cm_zero, 10, 5, 0.1)
        assert win.tau_high == cm.mu
        assert win.tau_low == cm.mu_prime
        assert win.nonempty == (cm.mu > cm.mu_prime)

    def test_window_endpoints_hit_target_tail_level(self):
        # Plugging the endpoints back into the tail bounds gives exactly
        # delta / (3d) on the on-support side and at most that off support.
        inst = generate_instance(ProblemConfig(d=12, k=3, m=6, n=40, sigma2=0.2, seed=9))
        on = inst.support.indices
        off = [u for u in range(12) if u not in on][0]
        cm = conditional_moments(inst, on[0], off)
        delta, d = 0.2, 12
        win = threshold_window(cm, 40, d, delta)
        target = delta / (3 * d)
        lower = chisq_mean_lower_tail(cm.mu_i, cm.nu2_i, cm.mu - win.tau_high)
        assert lower == pytest.approx(target, rel=1e-9)
        upper = chisq_mean_upper_tail(
            np.zeros_like(cm.nu2p_i), cm.nu2p_i, win.tau_low - cm.mu_prime
        )
        assert upper <= target * (1 + 1e-9)

    def test_doubling_n_shrinks_margins_between_half_and_sqrt_half(self):
        inst = generate_instance(ProblemConfig(d=12, k=3, m=6, n=40, sigma2=0.2, seed=9))
        on = inst.support.indices
        off = [u for u in range(12) if u not in on][0]
        cm = conditional_moments(inst, on[0], off)
        cm2 = type(cm)(
            np.tile(cm.mu_i, 2), np.tile(cm.nu2_i, 2), np.tile(cm.nu2p_i, 2), cm.mu, cm.mu_prime
        )
        win1 = threshold_window(cm, 40, 12, 0.2)
        win2 = threshold_window(cm2, 80, 12, 0.2)
        top_ratio = (cm.mu - win2.tau_high) / (cm.mu - win1.tau_high)
        bot_ratio = (win2.tau_low - cm.mu_prime) / (win1.tau_low - cm.mu_prime)
        for ratio in (top_ratio, bot_ratio):
            assert 0.5 - 1e-12 <= ratio <= 1.0 / math.sqrt(2.0) + 1e-12


class TestSeparation:
    def test_hand_example_unit_norms(self):
        # n = m = k = 1, sigma = 0, unit norms, unit log term:
        # lhs = 0 and the four terms are (0, 0, 4, 8).
        rep = separation_report_from_norms(
            sq_u=[1.0], fourth_u=[1.0], sixth_u=[1.0],
            sq_up=[1.0], fourth_up=[1.0],
            k=1, m=1, sigma2=0.0, x_min=1.0, x_max=1.0, log_term=1.0,
        )
        assert rep.lhs == 0.0
        assert rep.rhs_terms == (0.0, 0.0, 4.0, 8.0)
        assert rep.rhs == 12.0
        assert not rep.satisfied

    def test_vanishing_x_min_kills_lhs(self):
        inst = generate_instance(
            ProblemConfig(d=8, k=2, m=4, n=30, x_min=1e-9, x_max=1.0,
                          signal_mode="constant_min", seed=5)
        )
        u = inst.support.indices[0]
        off = [v for v in range(8) if v not in inst.support.indices][0]
        rep = separation_condition(inst, 0.1, u, off)
        assert rep.lhs < 1e-15
        assert not rep.satisfied

    def test_mean_substitution_recovers_constant_lhs(self):
        # Substituting the exact moments of the norm powers makes the lhs
        # equal (x_min/x_max)^2 (1 + 1/m) exactly.
        n, m = 16, 5
        fourth = np.full(n, 1.0 + 2.0 / m)
        sixth = np.full(n, 1.0 + 6.0 / m + 8.0 / m**2)
        ones = np.ones(n)
        rep = separation_report_from_norms(
            ones, fourth, sixth, ones, fourth,
            k=3, m=m, sigma2=0.0, x_min=0.5, x_max=1.0, log_term=2.0,
        )
        assert rep.lhs == pytest.approx(0.25 * (1.0 + 1.0 / m), rel=1e-14)

    def test_all_pairs_matches_pairwise_scan(self):
        inst = generate_instance(ProblemConfig(d=8, k=2, m=3, n=50, seed=12))
        delta = 0.3
        on = inst.support.indices
        off = [v for v in range(8) if v not in on]
        pairwise = all(
            separation_condition(inst, delta, u, up).satisfied for u in on for up in off
        )
        assert separation_all_pairs(inst, delta) == pairwise

    def test_all_pairs_large_n_holds(self):
        inst = generate_instance(ProblemConfig(d=8, k=2, m=6, n=4000, seed=3))
        assert separation_all_pairs(inst, 1.0 / 3.0)


class TestChisqMeanTails:
    def test_lower_single_standard_normal(self):
        assert chisq_mean_lower_tail([0.0], [1.0], 2.0) == pytest.approx(math.exp(-1.0))

    def test_lower_four_samples(self):
        assert chisq_mean_lower_tail([0.0] * 4, [1.0] * 4, 1.0) == pytest.approx(math.exp(-1.0))

    def test_upper_single_standard_normal(self):
        assert chisq_mean_upper_tail([0.0], [1.0], 2.0) == pytest.approx(0.7788007830714049)

    def test_tiny_t_clamps_to_one(self):
        assert chisq_mean_lower_tail([0.0], [1.0], 0.0) == 1.0
        assert chisq_mean_upper_tail([0.0], [1.0], 0.0) == 1.0

    def test_degenerate_variances_rejected(self):
        with pytest.raises(ValueError):
            chisq_mean_lower_tail([1.0], [0.0], 0.5)
        with pytest.raises(ValueError):
            chisq_mean_upper_tail([1.0], [0.0], 0.5)

    def test_monotone_nonincreasing_in_t(self):
        ts = np.linspace(0.0, 5.0, 40)
        vals_lo = [chisq_mean_lower_tail([1.0, 0.5], [1.0, 2.0], t) for t in ts]
        vals_hi = [chisq_mean_upper_tail([1.0, 0.5], [1.0, 2.0], t) for t in ts]
        assert np.all(np.diff(vals_lo) <= 1e-15)
        assert np.all(np.diff(vals_hi) <= 1e-15)

    def test_upper_tail_dominates_simulation(self):
        # Monte Carlo dominance on a small grid.
        rng = np.random.default_rng(0)
        n, reps = 5, 100_000
        mu = np.array([0.0, 1.0, 0.5, 0.0, 2.0])
        sd = np.array([1.0, 0.5, 1.5, 2.0, 1.0])
        x = mu + sd * rng.standard_normal((reps, n))
        mean_sq = (x**2).mean(axis=1)
        center = float(np.mean(sd**2 + mu**2))
        for t in (0.5, 1.0, 2.0, 4.0):
            freq = float(np.mean(mean_sq >= center + t))
            se = math.sqrt(freq * (1 - freq) / reps)
            assert freq <= chisq_mean_upper_tail(mu, sd**2, t) + 3 * se


class TestHeavyTails:
    def test_sixth_power_hand_value(self):
        # n=100, m=9, t=0.5: min{50, 13.8173..., 25} -> exp of the middle.
        expected = math.exp(-((9**3 * 100 * 0.5) ** 0.25))
        assert norm6_mean_tail(100, 9, 0.5, C1) == pytest.approx(expected, rel=1e-12)
        assert norm6_mean_tail(100, 9, 0.5, C1) == pytest.approx(9.981741720291146e-07)

    def test_fourth_power_hand_value(self):
        expected = math.exp(-((10**2 * 100 * 0.5) ** (1.0 / 3.0)))
        assert norm4_mean_tail(100, 10, 0.5, C1) == pytest.approx(expected, rel=1e-12)
        assert norm4_mean_tail(100, 10, 0.5, C1) == pytest.approx(3.7468716950765636e-08)

    def test_zero_t_clamps(self):
        assert norm6_mean_tail(100, 9, 0.0, C1) == 1.0
        assert norm4_mean_tail(100, 9, 0.0, C1) == 1.0

    def test_monotone_in_t(self):
        ts = np.linspace(0.0, 3.0, 50)
        for fn in (norm4_mean_tail, norm6_mean_tail):
            vals = [fn(50, 8, t, C1) for t in ts]
            assert np.all(np.diff(vals) <= 1e-15)

    def test_constant_scales_exponent(self):
        loose = norm6_mean_tail(100, 9, 0.5, BoundConstants(c_heavy=0.5))
        tight = norm6_mean_tail(100, 9, 0.5, BoundConstants(c_heavy=2.0))
        assert tight < norm6_mean_tail(100, 9, 0.5, C1) < loose


class TestMaxNormTail:
    def test_hand_value(self):
        assert max_sq_norm_tail(1, 8, 1.0, 1.0) == pytest.approx(math.exp(-1.0))

    def test_linear_prefactor_before_clamp(self):
        one = max_sq_norm_tail(1, 8, 1.0, 2.0)
        three = max_sq_norm_tail(3, 8, 1.0, 2.0)
        assert three == pytest.approx(3 * one, rel=1e-12)

    def test_mu_max_below_one_rejected(self):
        with pytest.raises(ValueError):
            max_sq_norm_tail(5, 8, 0.9, 1.0)

    def test_clamped_to_one(self):
        assert max_sq_norm_tail(10**9, 2, 1.0, 1e-6) == 1.0


class TestMomentBounds:
    def test_rosenthal_hand_value(self):
        assert rosenthal_sum_moment(2.0, 1, 1.0, 1.0, C1) == pytest.approx(3.414213562373095)

    def test_rosenthal_zero_norms(self):
        assert rosenthal_sum_moment(3.0, 10, 0.0, 0.0, C1) == 0.0

    def test_rosenthal_requires_p_at_least_two(self):
        with pytest.raises(ValueError):
            rosenthal_sum_moment(1.5, 10, 1.0, 1.0, C1)

    def test_cube_moment_hand_value(self):
        assert chisq_cube_central_moment_bound(2.0, 2) == 21952.0

    def test_cube_moment_monotone(self):
        assert chisq_cube_central_moment_bound(3.0, 2) > chisq_cube_central_moment_bound(2.0, 2)
        assert chisq_cube_central_moment_bound(2.0, 4) > chisq_cube_central_moment_bound(2.0, 2)

    def test_cube_moment_dominates_simulation(self):
        rng = np.random.default_rng(1)
        m = 4
        v = rng.chisquare(m, size=100_000)
        centered = v**3 - m * (m + 2) * (m + 4)
        empirical = math.sqrt(float(np.mean(centered**2)))
        assert empirical <= chisq_cube_central_moment_bound(2.0, m)

    def test_rosenthal_dominates_simulated_sum_moment(self):
        # p = 2: ||sum Z_i||_2 = sqrt(n) ||Z_1||_2 <= bound with c = 1.
        rng = np.random.default_rng(2)
        m, n, reps = 4, 6, 50_000
        v = rng.chisquare(m, size=(reps, n))
        centered = v**3 - m * (m + 2) * (m + 4)
        sums = centered.sum(axis=1)
        empirical = math.sqrt(float(np.mean(sums**2)))
        l2 = math.sqrt(float(np.mean(centered[:, 0] ** 2)))
        assert empirical <= rosenthal_sum_moment(2.0, n, l2, l2, C1)


class TestSampleComplexity:
    def test_hand_value(self):
        res = sample_complexity_upper(10, 2, 100, 0.1, 1.0, 1.0, 0.0, C1)
        assert res.n == 173
        assert not res.in_regime  # m = 2 < 2 log(1000)

    def test_linear_regime_when_a_below_one(self):
        res = sample_complexity_upper(2, 8, 100, 0.1, 1.0, 1.0, 0.0, C1)
        expected = math.ceil((2 / 8) * math.log(100 / 0.1))
        assert res.n == expected

    def test_halving_m_quadruples_n_in_deep_regime(self):
        # Use a huge constant so ceiling granularity is negligible.
        big = BoundConstants(c_sample=1e6)
        n_m = sample_complexity_upper(20, 10, 128, 0.1, 1.0, 1.0, 0.0, big).n
        n_half = sample_complexity_upper(20, 5, 128, 0.1, 1.0, 1.0, 0.0, big).n
        assert n_half / n_m == pytest.approx(4.0, abs=1e-4)

    def test_regime_flag(self):
        res = sample_complexity_upper(4, 32, 64, 1.0 / 3.0, 1.0, 1.0, 0.0, C1)
        assert res.in_regime  # 32 >= 2 log(192) ~ 10.5

    def test_delta_validation(self):
        with pytest.raises(ValueError):
            sample_complexity_upper(4, 8, 64, 1.5, 1.0, 1.0, 0.0, C1)
