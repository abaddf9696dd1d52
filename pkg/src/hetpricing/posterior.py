"""Optimistic posterior sampling over a finite bank of demand models.

The learner keeps exponential weights over candidate type distributions.
Each round it samples a model, plays that model's best response to the
current context, and reweights every model by a loss that charges squared
prediction error on the observed purchase and credits achievable revenue
(the optimism bonus). The smoothed variant evaluates models through an
eps-smoothed demand curve, best-responds on the price grid of step eps, and
posts the grid price minus a uniform downward perturbation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .covers import ModelClass
from .pricing import (PricingError, SmoothingParams, TypeDistribution,
                      ValueDistribution, best_response, demand,
                      discretized_best_response, project, revenue,
                      smoothed_demand, smoothed_revenue)


@dataclass(frozen=True)
class DemandModel:
    """One candidate type distribution evaluated raw or eps-smoothed."""

    dist: TypeDistribution
    eps: float = 0.0

    def projected(self, u) -> ValueDistribution:
        return project(self.dist, u)

    def demand(self, p: float, u) -> float:
        q = self.projected(u)
        if self.eps > 0.0:
            return smoothed_demand(q, self.eps, p)
        return demand(q, p)

    def best_price(self, u) -> float:
        q = self.projected(u)
        if self.eps > 0.0:
            return discretized_best_response(q, SmoothingParams.from_eps(self.eps))
        return best_response(q)


@dataclass(frozen=True)
class GopsDecision:
    """One selection: sampled model, grid price, perturbation, posted price."""

    model_index: int
    hat_price: float
    posted_price: float
    perturbation: float


class _ContextCache:
    """Per-context arrays: ragged projections, best responses, peak revenues."""

    __slots__ = ("values", "weights", "offsets", "br", "rev_at_br")

    def __init__(self, models, eps: float, params: SmoothingParams | None, u):
        vals, wts, offs = [], [], [0]
        br = np.empty(len(models))
        rev_at_br = np.empty(len(models))
        for i, dist in enumerate(models):
            q = project(dist, u)
            vals.append(q.values)
            wts.append(q.weights)
            offs.append(offs[-1] + len(q))
            if eps > 0.0:
                br[i] = discretized_best_response(q, params)
                rev_at_br[i] = smoothed_revenue(q, eps, br[i])
            else:
                br[i] = best_response(q)
                rev_at_br[i] = revenue(q, br[i])
        self.values = np.ascontiguousarray(np.concatenate(vals))
        self.weights = np.ascontiguousarray(np.concatenate(wts))
        self.offsets = np.asarray(offs, dtype=np.int64)
        self.br = br
        self.rev_at_br = rev_at_br


class PosteriorState:
    """Mutable exponential-weights posterior; one owner advances it."""

    MAX_CACHED_CONTEXTS = 64

    def __init__(self, model_class: ModelClass, lam: float,
                 smoothing: SmoothingParams, log_weights=None):
        if lam <= 0.0:
            raise PricingError("optimism strength must be positive")
        self.model_class = model_class
        self.lam = float(lam)
        self.smoothing = smoothing
        if log_weights is None:
            log_weights = np.log(model_class.prior)
        self.log_weights = np.asarray(log_weights, dtype=float).copy()
        if len(self.log_weights) != len(model_class):
            raise PricingError("log_weights length must match the class")
        self.round = 1
        self._cache: dict[bytes, _ContextCache] = {}

    @property
    def eps(self) -> float:
        return self.smoothing.eps

    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def _context(self, u) -> _ContextCache:
        vec = np.asarray(u.u if hasattr(u, "u") else u, dtype=float)
        key = vec.tobytes()
        cache = self._cache.get(key)
        if cache is None:
            cache = _ContextCache(self.model_class.models, self.eps,
                                  self.smoothing if self.eps > 0 else None, vec)
            if len(self._cache) < self.MAX_CACHED_CONTEXTS:
                self._cache[key] = cache
        return cache


def ops_loss(lam: float, q: ValueDistribution, p: float, y: int) -> float:
    """Squared demand mismatch minus the revenue optimism bonus."""
    if lam <= 0.0:
        raise PricingError("optimism strength must be positive")
    return (y - demand(q, p)) ** 2 - lam * revenue(q, best_response(q))


def pops_loss(lam: float, eps: float, q: ValueDistribution, hat_p: float,
              y: int) -> float:
    """Smoothed-demand mismatch at a grid price minus the smoothed bonus."""
    if lam <= 0.0:
        raise PricingError("optimism strength must be positive")
    if eps <= 0.0:
        raise PricingError("eps must be positive")
    snapped = round(hat_p / eps) * eps
    if abs(snapped - hat_p) > 1e-12:
        raise PricingError(f"price {hat_p} is not on the grid of step {eps}")
    params = SmoothingParams.from_eps(eps)
    br = discretized_best_response(q, params)
    return ((smoothed_demand(q, eps, hat_p) - y) ** 2
            - lam * smoothed_revenue(q, eps, br))


def gops_select(state: PosteriorState, u, rng) -> GopsDecision:
    """Sample a model from the posterior and best-respond to it.

    Draw order per round: model sample first, then (in smoothed mode only)
    the perturbation.
    """
    logw = state.log_weights
    top = logw.max()
    if not np.isfinite(top):
        raise PricingError("posterior has collapsed to zero everywhere")
    w = np.exp(logw - top)
    cum = np.cumsum(w)
    draw = rng.random() * cum[-1]
    idx = min(int(np.searchsorted(cum, draw, side="right")), len(w) - 1)
    cache = state._context(u)
    hat = float(cache.br[idx])
    if state.eps > 0.0:
        delta = state.eps * rng.random()
    else:
        delta = 0.0
    return GopsDecision(model_index=idx, hat_price=hat,
                        posted_price=max(hat - delta, 0.0),
                        perturbation=delta)


def gops_update(state: PosteriorState, u, hat_p: float, y: int) -> PosteriorState:
    """Exponential-weights update at the pre-perturbation price hat_p.

    Weights stay in log space with a max shift so horizons of 1e5 rounds do
    not underflow. Mutates and returns the state.
    """
    if y not in (0, 1):
        raise PricingError("purchase feedback must be 0 or 1")
    cache = state._context(u)
    dems = _kernels.demand_profile(cache.values, cache.weights, cache.offsets,
                                   float(hat_p), state.eps)
    losses = (dems - y) ** 2 - state.lam * cache.rev_at_br
    logw = state.log_weights - losses
    shift = logw.max()
    logw -= shift + math.log(float(np.exp(logw - shift).sum()))
    state.log_weights = logw
    state.round += 1
    return state


def make_ops(model_class: ModelClass, K: int, horizon: int) -> PosteriorState:
    """Posterior sampler on raw demand with the standard optimism strength.

    Uniform prior; lambda = sqrt(ln|class| / (K * horizon)). K is the
    support-size scale the strength is tuned for; when it is unknown use
    make_pops, whose strength does not depend on it.
    """
    if K < 1 or horizon < 1:
        raise PricingError("K and horizon must be positive")
    if len(model_class) == 1:
        lam = 1.0 / math.sqrt(K * horizon)  # ln 1 = 0 would freeze the bonus
    else:
        lam = math.sqrt(math.log(len(model_class)) / (K * horizon))
    uniform = np.full(len(model_class), -math.log(len(model_class)))
    return PosteriorState(model_class, lam, SmoothingParams.from_eps(0.0),
                          log_weights=uniform)


def make_pops(model_class: ModelClass, eps: float, lam: float | None = None,
              *, d: int | None = None, horizon: int | None = None) -> PosteriorState:
    """Perturbed sampler on eps-smoothed demand with the class prior.

    An explicit lam wins; otherwise lam = sqrt(d / horizon). eps must be
    positive (with eps = 0 there is no perturbation: use make_ops).
    """
    if eps <= 0.0 or eps >= 1.0:
        raise PricingError("pops needs eps in (0,1); for eps=0 use make_ops")
    if lam is None:
        if d is None or horizon is None:
            raise PricingError("give lam explicitly or both d and horizon")
        lam = math.sqrt(d / horizon)
    return PosteriorState(model_class, lam, SmoothingParams.from_eps(eps))
