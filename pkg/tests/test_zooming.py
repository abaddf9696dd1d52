"""Variance-aware zooming: statistics, selection, covering, kernel parity."""

import math

import numpy as np
import pytest

from hetpricing.instances import lb_base
from hetpricing.pricing import PricingError, gap, max_revenue
from hetpricing.zooming import (ArmStats, ZoomState, activate_if_uncovered,
                                confidence_radius, dyadic_seeds, index,
                                run_zoomv_episode, select_price, update)

INF = float("inf")


class TestArmStats:
    def test_first_pull(self):
        arm = ArmStats(0.5)
        arm.add(0.5)
        assert (arm.n, arm.mean, arm.variance) == (1, 0.5, INF)

    def test_two_pull_variance(self):
        arm = ArmStats(0.5)
        arm.add(0.5)   # y = 1
        arm.add(0.0)   # y = 0
        assert arm.mean == pytest.approx(0.25, abs=1e-15)
        assert arm.variance == pytest.approx(0.125, abs=1e-15)

    def test_constant_rewards_zero_variance(self):
        arm = ArmStats(0.5)
        for _ in range(50):
            arm.add(0.5)  # dyadic reward: running sums are exact
        assert arm.variance == 0.0
        arm = ArmStats(0.3)
        for _ in range(50):
            arm.add(0.3)  # non-dyadic: zero up to accumulated rounding
        assert arm.variance == pytest.approx(0.0, abs=1e-24)

    def test_welford_matches_two_pass(self):
        rng = np.random.default_rng(3)
        xs = (0.7 * (rng.random(200) < 0.4)).tolist()
        arm = ArmStats(0.7)
        for x in xs:
            arm.add(x)
        assert arm.mean == pytest.approx(np.mean(xs), abs=1e-12)
        assert arm.variance == pytest.approx(np.var(xs, ddof=1), abs=1e-12)


class TestRadiusIndex:
    def test_unpulled_and_single_pull_infinite(self):
        for n_pulls in (0, 1):
            arm = ArmStats(0.4)
            for _ in range(n_pulls):
                arm.add(0.4)
            assert confidence_radius(arm, 1000) == INF
            assert index(arm, 1000) == INF

    def test_worked_example(self):
        # n=5, V=0.04, T=1000 with natural logs
        arm = ArmStats(0.5, n=5, total=5 * 0.25, m2=0.04 * 4)
        expect = math.sqrt(10 * 0.04 * math.log(1000) / 5) \
            + 12 * math.log(1000) / 4
        r = confidence_radius(arm, 1000)
        assert r == pytest.approx(expect, abs=1e-12)
        assert r == pytest.approx(21.467, abs=1e-3)
        assert index(arm, 1000) == pytest.approx(0.25 + 2 * r, abs=1e-12)

    def test_zero_variance_radius_shrinks_to_zero(self):
        prev = INF
        for n in (10, 100, 10_000, 1_000_000):
            arm = ArmStats(0.2, n=n, total=0.2 * n, m2=0.0)
            r = confidence_radius(arm, 1000)
            assert r == pytest.approx(12 * math.log(1000) / (n - 1), abs=1e-15)
            assert r < prev
            prev = r

    def test_horizon_validated(self):
        with pytest.raises(PricingError):
            confidence_radius(ArmStats(0.5), 1)


class TestSelection:
    def test_round_one_plays_smallest_seed(self):
        state = ZoomState(horizon=1000)
        assert select_price(state) == 1.0 / 1000

    def test_seeds_are_dyadic_plus_one(self):
        seeds = dyadic_seeds(1000)
        assert seeds[0] == 1.0 / 1000
        assert seeds[-1] == 1.0
        assert all(b > a for a, b in zip(seeds, seeds[1:]))
        assert set(seeds) == {2.0 ** i / 1000 for i in range(10)} | {1.0}

    def test_finite_index_wins(self):
        state = ZoomState(horizon=1000)
        # all arms pulled a lot with zero variance -> tiny radii
        for arm in state.arms:
            arm.n, arm.total, arm.m2 = 5000, 0.1 * 5000, 0.0
        best = state.arms[-3]
        best.total = 0.9 * best.n
        assert select_price(state) == best.price

    def test_ties_break_to_smaller_price(self):
        state = ZoomState(horizon=1000)
        for arm in state.arms:
            arm.n, arm.total, arm.m2 = 400, 0.2 * 400, 0.01
        assert select_price(state) == state.arms[0].price


class TestUpdateActivate:
    def test_update_requires_active_price(self):
        state = ZoomState(horizon=1000)
        with pytest.raises(PricingError):
            update(state, 0.123, 1)

    def test_all_infinite_radii_no_insert(self):
        state = ZoomState(horizon=1000)
        p = select_price(state)
        update(state, p, 1)
        assert activate_if_uncovered(state, p) == []

    def test_insert_midpoint_until_covered(self):
        state = ZoomState(horizon=100, arms=[ArmStats(0.5), ArmStats(0.75)])
        arm = state.arms[0]
        # zero-variance stats chosen so the radius is just above 0.05
        arm.n = int(12 * math.log(100) / 0.05) + 2
        arm.total = 0.5 * arm.n
        r = confidence_radius(arm, 100)
        assert 0.04 < r < 0.06
        inserted = activate_if_uncovered(state, 0.5)
        assert inserted[0] == 0.625
        assert state.covering_holds()
        prices = state.prices()
        assert prices == sorted(set(prices))

    def test_covered_gap_no_insert(self):
        state = ZoomState(horizon=100, arms=[ArmStats(0.5), ArmStats(0.75)])
        arm = state.arms[0]
        arm.n = 20  # radius 12 ln(100)/19 ~ 2.9
        arm.total = 0.5 * 20
        assert confidence_radius(arm, 100) > 0.3
        assert activate_if_uncovered(state, 0.5) == []


class TestEpisodes:
    def _valuations(self, q, horizon, seed):
        rng = np.random.default_rng(seed)
        cum = np.cumsum(q.weights)
        idx = np.minimum(np.searchsorted(cum, rng.random(horizon),
                                         side="right"), len(cum) - 1)
        return q.values[idx]

    def test_kernel_matches_step_api(self):
        q = lb_base(4)
        horizon = 3000
        vals = self._valuations(q, horizon, 11)
        res = run_zoomv_episode(vals, horizon, q.values, q.tail,
                                max_revenue(q), check=True)
        state = ZoomState(horizon=horizon)
        prices, gaps = [], []
        for t in range(horizon):
            assert state.covering_holds()
            p = select_price(state)
            update(state, p, int(vals[t] >= p))
            activate_if_uncovered(state, p)
            prices.append(p)
            gaps.append(gap(q, p))
        assert np.array_equal(res.prices, np.array(prices))
        assert res.gaps == pytest.approx(np.array(gaps), abs=1e-12)
        assert np.array_equal(res.final_arms, np.array(state.prices()))
        assert res.cover_violation_round == 0

    def test_covering_and_growth_over_episode(self):
        q = lb_base(8)
        horizon = 20_000
        vals = self._valuations(q, horizon, 5)
        res = run_zoomv_episode(vals, horizon, q.values, q.tail,
                                max_revenue(q), check=True)
        assert res.cover_violation_round == 0
        assert res.clean_violations == 0
        seeds = dyadic_seeds(horizon)
        assert len(res.final_arms) >= len(seeds)
        assert set(seeds) <= set(res.final_arms.tolist())
        arms = res.final_arms
        assert np.all(np.diff(arms) > 0)
        # insertions stay strictly inside the seeded range
        inserted = sorted(set(arms.tolist()) - set(seeds))
        for p in inserted:
            assert seeds[0] < p < 1.0

    def test_variance_blind_radii_dominate(self):
        q = lb_base(8)
        horizon = 20_000
        vals = self._valuations(q, horizon, 9)
        aware = run_zoomv_episode(vals, horizon, q.values, q.tail,
                                  max_revenue(q))
        blind = run_zoomv_episode(vals, horizon, q.values, q.tail,
                                  max_revenue(q), variance_blind=True)
        assert aware.gaps.sum() <= blind.gaps.sum()
