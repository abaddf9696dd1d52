"""Optimistic posterior sampling: losses, updates, selection, coupling."""

import math

import numpy as np
import pytest

from hetpricing.covers import ModelClass
from hetpricing.harness import run_coupled_pops
from hetpricing.posterior import (DemandModel, PosteriorState, gops_select,
                                  gops_update, make_ops, make_pops, ops_loss,
                                  pops_loss)
from hetpricing.pricing import (PricingError, SmoothingParams,
                                TypeDistribution, ValueDistribution,
                                best_response, demand, project, revenue,
                                smoothed_demand)
from hetpricing.instances import lb_base

U1 = np.array([1.0])


def singleton(v):
    return TypeDistribution([((v,), 1.0)])


def two_point(a, b, w=0.5):
    return TypeDistribution([((a,), w), ((b,), 1.0 - w)])


class TestLosses:
    def test_ops_loss_worked_example(self):
        # demand 0.8 at the played price, peak revenue 0.5
        q = ValueDistribution([(0.25, 0.2), (0.625, 0.8)])
        assert demand(q, 0.5) == pytest.approx(0.8, abs=1e-15)
        assert revenue(q, best_response(q)) == pytest.approx(0.5, abs=1e-15)
        assert ops_loss(0.1, q, 0.5, 1) == pytest.approx(-0.01, abs=1e-12)

    def test_ops_loss_vanishes_with_perfect_prediction(self):
        q = ValueDistribution([(1.0, 1.0)])  # demand 1 everywhere
        assert ops_loss(1e-12, q, 0.3, 1) == pytest.approx(0.0, abs=1e-11)

    def test_ops_loss_base_instance(self):
        q = lb_base(4)
        expected = (0.0 - demand(q, 0.7)) ** 2 - 0.05 * revenue(
            q, best_response(q))
        assert ops_loss(0.05, q, 0.7, 0) == pytest.approx(expected, abs=1e-15)
        assert ops_loss(0.05, q, 0.7, 0) == pytest.approx(4.0 / 9.0 - 0.025,
                                                          abs=1e-12)

    def test_pops_loss_worked_example(self):
        q = ValueDistribution([(0.5, 1.0)])
        assert pops_loss(0.1, 0.25, q, 0.5, 1) == pytest.approx(-0.05,
                                                                abs=1e-12)
        assert pops_loss(0.1, 0.25, q, 0.75, 1) == pytest.approx(0.95,
                                                                 abs=1e-12)

    def test_pops_loss_zero_case(self):
        q = ValueDistribution([(1.0, 1.0)])  # smoothed demand 1 on the grid
        assert pops_loss(1e-12, 0.25, q, 0.5, 1) == pytest.approx(0.0,
                                                                  abs=1e-11)

    def test_pops_loss_off_grid(self):
        q = ValueDistribution([(0.5, 1.0)])
        with pytest.raises(PricingError):
            pops_loss(0.1, 0.25, q, 0.3, 1)


class TestDemandModel:
    def test_raw_and_smoothed_evaluation(self):
        dist = two_point(0.4, 0.8)
        raw = DemandModel(dist)
        assert raw.demand(0.5, U1) == pytest.approx(
            demand(project(dist, U1), 0.5))
        assert raw.best_price(U1) == best_response(project(dist, U1))
        sm = DemandModel(dist, eps=0.1)
        assert sm.demand(0.5, U1) == pytest.approx(
            smoothed_demand(project(dist, U1), 0.1, 0.5))


class TestSelect:
    def test_singleton_class(self):
        mc = ModelClass([two_point(0.4, 0.8)])
        state = make_ops(mc, K=2, horizon=100)
        rng = np.random.default_rng(0)
        for _ in range(5):
            d = gops_select(state, U1, rng)
            assert d.model_index == 0
            assert d.perturbation == 0.0
            assert d.posted_price == d.hat_price
            assert d.hat_price == best_response(project(mc.models[0], U1))

    def test_sampling_frequencies(self):
        mc = ModelClass([singleton(0.4), singleton(0.8)])
        state = make_ops(mc, K=1, horizon=100)
        rng = np.random.default_rng(123)
        hits = sum(gops_select(state, U1, rng).model_index
                   for _ in range(100_000))
        assert abs(hits / 100_000 - 0.5) < 0.01

    def test_smoothed_mode_perturbs(self):
        mc = ModelClass([singleton(0.4), singleton(0.8)])
        state = make_pops(mc, eps=0.1, lam=0.05)
        rng = np.random.default_rng(5)
        d = gops_select(state, U1, rng)
        assert 0.0 <= d.perturbation <= 0.1
        assert d.posted_price == max(d.hat_price - d.perturbation, 0.0)
        grid_pos = d.hat_price / 0.1
        assert abs(grid_pos - round(grid_pos)) < 1e-9


class TestUpdate:
    def test_exponential_weights_arithmetic(self):
        # engineered losses 0 and ln 2 from equal priors -> (2/3, 1/3)
        m_a = singleton(1.0)   # demand 1 at every price
        m_b = two_point(0.2, 1.0, w=math.sqrt(math.log(2.0)))
        mc = ModelClass([m_a, m_b])
        lam = 1e-15  # kill the optimism bonus so losses are pure mismatch
        state = PosteriorState(mc, lam, SmoothingParams.from_eps(0.0))
        # at price 0.5 with y=1: model a mismatch 0, model b (1-w(1.0))^2
        q_b = project(m_b, U1)
        assert (1.0 - demand(q_b, 0.5)) ** 2 == pytest.approx(math.log(2.0),
                                                              abs=1e-12)
        gops_update(state, U1, 0.5, 1)
        w = state.weights()
        assert w[0] == pytest.approx(2.0 / 3.0, abs=1e-9)
        assert w[1] == pytest.approx(1.0 / 3.0, abs=1e-9)

    def test_identical_losses_leave_posterior_alone(self):
        # distinct types with identical projections along u share every loss
        m_a = TypeDistribution([((0.4, 0.1), 1.0)])
        m_b = TypeDistribution([((0.4, 0.9), 1.0)])
        mc = ModelClass([m_a, m_b], prior=[0.3, 0.7])
        state = PosteriorState(mc, 0.05, SmoothingParams.from_eps(0.0))
        u = np.array([1.0, 0.0])
        for y in (1, 0, 1):
            gops_update(state, u, 0.35, y)
        assert state.weights() == pytest.approx([0.3, 0.7], abs=1e-12)

    def test_single_model_stays_at_one(self):
        mc = ModelClass([two_point(0.4, 0.8)])
        state = make_ops(mc, K=2, horizon=50)
        for y in (0, 1, 1):
            gops_update(state, U1, 0.5, y)
        assert state.weights()[0] == pytest.approx(1.0, abs=1e-12)

    def test_posterior_recomputable_from_trace(self):
        rng = np.random.default_rng(77)
        models = [two_point(a, b) for a in (0.2, 0.4) for b in (0.6, 0.9)]
        mc = ModelClass(models)
        state = make_ops(mc, K=2, horizon=200)
        lam = state.lam
        trace = []
        truth = project(models[1], U1)
        for t in range(50):
            d = gops_select(state, U1, rng)
            y = int(rng.random() < demand(truth, d.posted_price))
            trace.append((d.hat_price, y))
            gops_update(state, U1, d.hat_price, y)
        log_w = np.full(len(models), -math.log(len(models)))
        for hat, y in trace:
            losses = np.array([ops_loss(lam, project(m, U1), hat, y)
                               for m in models])
            log_w -= losses
        expect = np.exp(log_w - log_w.max())
        expect /= expect.sum()
        assert state.weights() == pytest.approx(expect, abs=1e-9)
        assert np.exp(state.log_weights).sum() == pytest.approx(1.0, abs=1e-9)

    def test_pops_update_uses_grid_price(self):
        models = [two_point(0.2, 0.6), two_point(0.4, 0.8)]
        mc = ModelClass(models)
        eps = 0.1
        state = make_pops(mc, eps=eps, lam=0.07)
        gops_update(state, U1, 0.4, 1)
        log_w = np.log(mc.prior).copy()
        losses = np.array([pops_loss(0.07, eps, project(m, U1), 0.4, 1)
                           for m in models])
        log_w -= losses
        expect = np.exp(log_w - log_w.max())
        expect /= expect.sum()
        assert state.weights() == pytest.approx(expect, abs=1e-12)


class TestFactories:
    def test_ops_strength_formula(self):
        models = [singleton(0.1 + 0.05 * i) for i in range(16)]
        state = make_ops(ModelClass(models), K=2, horizon=1000)
        assert state.lam == pytest.approx(math.sqrt(math.log(16) / 2000.0),
                                          abs=1e-12)
        assert state.lam == pytest.approx(0.037233, abs=1e-6)
        assert state.weights() == pytest.approx(np.full(16, 1 / 16), abs=1e-12)
        assert state.eps == 0.0

    def test_ops_ignores_class_prior(self):
        mc = ModelClass([singleton(0.2), singleton(0.7)], prior=[0.9, 0.1])
        state = make_ops(mc, K=1, horizon=10)
        assert state.weights() == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_pops_default_strength(self):
        mc = ModelClass([singleton(0.2), singleton(0.7)], prior=[0.9, 0.1])
        state = make_pops(mc, eps=0.02, d=1, horizon=10_000)
        assert state.lam == pytest.approx(0.01, abs=1e-15)
        state2 = make_pops(mc, eps=0.02, lam=0.5)
        assert state2.lam == 0.5
        # the class prior passes through
        assert state.weights() == pytest.approx([0.9, 0.1], abs=1e-12)

    def test_pops_requires_positive_eps(self):
        mc = ModelClass([singleton(0.2)])
        with pytest.raises(PricingError):
            make_pops(mc, eps=0.0, lam=0.1)


class TestAlgorithmEquivalence:
    def test_eps_zero_matches_inline_reference(self):
        """gops with eps=0 reproduces the plain posterior-sampling loop."""
        models = [two_point(a, b) for a in (0.2, 0.35) for b in (0.6, 0.85)]
        mc = ModelClass(models)
        horizon = 120
        state = make_ops(mc, K=2, horizon=horizon)
        lam = state.lam
        rng_env = np.random.default_rng(9)
        rng_a = np.random.default_rng(31)
        rng_b = np.random.default_rng(31)
        truth = project(models[2], U1)
        projections = [project(m, U1) for m in models]
        ref_log_w = np.full(len(models), -math.log(len(models)))
        for t in range(horizon):
            decision = gops_select(state, U1, rng_a)
            # reference: sample from the posterior, best-respond, reweight
            w = np.exp(ref_log_w - ref_log_w.max())
            cum = np.cumsum(w)
            draw = rng_b.random() * cum[-1]
            idx = min(int(np.searchsorted(cum, draw, side="right")),
                      len(w) - 1)
            price = best_response(projections[idx])
            assert decision.model_index == idx
            assert decision.posted_price == price
            y = int(rng_env.random() < demand(truth, price))
            gops_update(state, U1, price, y)
            ref_log_w = ref_log_w - np.array(
                [ops_loss(lam, q, price, y) for q in projections])
            shift = ref_log_w.max()
            ref_log_w -= shift + math.log(np.exp(ref_log_w - shift).sum())
            assert state.weights() == pytest.approx(
                np.exp(ref_log_w - ref_log_w.max())
                / np.exp(ref_log_w - ref_log_w.max()).sum(), abs=1e-12)

    def test_degenerate_posterior_raises(self):
        mc = ModelClass([singleton(0.4)])
        state = make_ops(mc, K=1, horizon=10)
        state.log_weights = np.array([-np.inf])
        with pytest.raises(PricingError):
            gops_select(state, U1, np.random.default_rng(0))


class TestCoupling:
    def test_shared_uniform_coupling_smoke(self):
        eps = 0.02
        d_star = TypeDistribution([((0.39,), 0.5), ((0.79,), 0.5)])
        d_cover = TypeDistribution([((0.3905,), 0.5), ((0.7905,), 0.5)])
        probe = TypeDistribution([((0.40,), 0.5), ((0.80,), 0.5)])
        grid = SmoothingParams.from_eps(eps).grid
        qa, qb = project(d_star, U1), project(d_cover, U1)
        worst = max(abs(smoothed_demand(qa, eps, float(g))
                        - smoothed_demand(qb, eps, float(g))) for g in grid)
        assert worst <= eps
        mc = ModelClass([d_star, d_cover, probe])
        hits = sum(run_coupled_pops(mc, math.sqrt(1 / 40), eps, d_star,
                                    d_cover, 40, seed) for seed in range(60))
        assert hits / 60 >= (1 - 0.8) - 3 * math.sqrt(0.8 * 0.2 / 60)
