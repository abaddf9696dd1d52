"""Learners for ex-post type observability.

When the environment reveals which buyer type arrived (an identifier) the
seller runs one contextual-search instance per observed type: an ellipsoid
that localizes the type vector from binary purchase feedback via central
cuts, projected onto each context for a price estimate and a self-reported
width. When the full type vector is revealed, best-responding to the
empirical type distribution is already enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pricing import (PricingError, TypeDistribution, best_response, project)

# Cuts stop once the directional width reaches these floors: far below any
# price scale that matters, but far above machine epsilon, so the quadratic
# form of the frozen set stays meaningful. The d=1 interval path is exact
# max/min arithmetic and tolerates a much smaller floor.
WIDTH_FLOOR = 1e-7
WIDTH_FLOOR_1D = 1e-12


@dataclass
class EllipsoidState:
    """Localization set {theta : (theta-c)^T shape^-1 (theta-c) <= 1}."""

    center: np.ndarray
    shape: np.ndarray
    degenerate_cuts: int = 0

    @classmethod
    def initial(cls, d: int) -> "EllipsoidState":
        # ball around the box center through its corners, so it holds [0,1]^d
        return cls(center=np.full(d, 0.5), shape=np.eye(d) * (d / 4.0))

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, theta, slack: float = 1e-6) -> bool:
        diff = np.asarray(theta, dtype=float) - self.center
        try:
            q = float(diff @ np.linalg.solve(self.shape, diff))
        except np.linalg.LinAlgError:
            return False
        return q <= 1.0 + slack


def cs_price(state: EllipsoidState, u) -> float:
    """Center of the ellipsoid projected on u, clamped to [0,1]."""
    vec = np.asarray(u.u if hasattr(u, "u") else u, dtype=float)
    return float(min(max(state.center @ vec, 0.0), 1.0))


def cs_width(state: EllipsoidState, u) -> float:
    """Length of the ellipsoid's shadow along u: 2 sqrt(u^T shape u)."""
    vec = np.asarray(u.u if hasattr(u, "u") else u, dtype=float)
    s2 = float(vec @ state.shape @ vec)
    return 2.0 * math.sqrt(max(s2, 0.0))


def cs_update(state: EllipsoidState, u, p: float, y: int) -> EllipsoidState:
    """Cut with the halfspace consistent with the purchase outcome.

    y=1 keeps {<u,theta> >= p}, y=0 keeps {<u,theta> <= p}; the result is the
    minimum-volume ellipsoid around the intersection (plain interval
    intersection when d=1). Cuts that miss the ellipsoid, or that numerics
    cannot represent, leave it unchanged with ``degenerate_cuts`` bumped.
    """
    vec = np.asarray(u.u if hasattr(u, "u") else u, dtype=float)
    if state.dim == 1:
        return _interval_update(state, float(vec[0]), float(p), y)
    if y == 1:
        a, b = -vec, -float(p)  # keep u.theta >= p as a.theta <= b
    else:
        a, b = vec, float(p)
    d = state.dim
    s2 = float(a @ state.shape @ a)
    if s2 <= (WIDTH_FLOOR / 2.0) ** 2:
        state.degenerate_cuts += 1
        return state
    if s2 < 1e-8:
        # near collapse an oblique cut can corrupt axes that are already at
        # the floor; freeze as soon as the thinnest axis reaches it
        lam_min = float(np.linalg.eigvalsh(state.shape)[0])
        if lam_min <= (WIDTH_FLOOR / 2.0) ** 2:
            state.degenerate_cuts += 1
            return state
    snorm = math.sqrt(s2)
    alpha = (float(a @ state.center) - b) / snorm
    if alpha >= 1.0:
        state.degenerate_cuts += 1  # halfspace misses the ellipsoid
        return state
    if alpha <= -1.0 / d:
        return state  # shallow cut: the ellipsoid itself is already minimal
    g = (state.shape @ a) / snorm
    tau = (1.0 + d * alpha) / (d + 1.0)
    delta = (d * d / (d * d - 1.0)) * (1.0 - alpha * alpha)
    sigma = 2.0 * (1.0 + d * alpha) / ((d + 1.0) * (1.0 + alpha))
    center = state.center - tau * g
    shape = delta * (state.shape - sigma * np.outer(g, g))
    shape = 0.5 * (shape + shape.T)
    try:
        np.linalg.cholesky(shape)
    except np.linalg.LinAlgError:
        state.degenerate_cuts += 1
        return state
    return EllipsoidState(center, shape, state.degenerate_cuts)


def _interval_update(state: EllipsoidState, u0: float, p: float,
                     y: int) -> EllipsoidState:
    half = math.sqrt(max(float(state.shape[0, 0]), 0.0))
    lo, hi = state.center[0] - half, state.center[0] + half
    # keep {u0*theta >= p} on y=1, {u0*theta <= p} on y=0
    if u0 == 0.0 or 2.0 * half <= WIDTH_FLOOR_1D:
        state.degenerate_cuts += 1
        return state
    bound = p / u0
    wants_upper = (y == 1) == (u0 > 0.0)
    new_lo, new_hi = (max(lo, bound), hi) if wants_upper else (lo, min(hi, bound))
    if new_lo > new_hi:
        state.degenerate_cuts += 1
        return state
    c = (new_lo + new_hi) / 2.0
    h = (new_hi - new_lo) / 2.0
    return EllipsoidState(np.array([c]), np.array([[h * h]]),
                          state.degenerate_cuts)


@dataclass
class TypeTracker:
    """Per-type search state plus arrival and exploration counters."""

    search: EllipsoidState
    n: int = 0   # rounds this type arrived
    m: int = 0   # rounds spent exploring this type


@dataclass
class IdentifierState:
    """State of the type-identifier pricing algorithm."""

    dim: int
    horizon: int
    budget_divisor: float = 1.0
    eps: float = field(init=False)
    observed: dict[int, TypeTracker] = field(default_factory=dict)
    round: int = 1
    _pending: tuple | None = None

    def __post_init__(self):
        if self.horizon < 2:
            raise PricingError("horizon must be at least 2")
        self.eps = math.sqrt(self.dim * math.log(self.horizon) / self.horizon)

    @property
    def budget(self) -> float:
        return self.eps * self.horizon / self.budget_divisor


def ident_select(state: IdentifierState, u) -> tuple[float, tuple]:
    """Price for this round plus the mode ("explore", i) or ("exploit", i*).

    Explore the lowest-id type whose projected width exceeds eps while its
    exploration budget lasts; otherwise score the confidently-localized
    types by estimated demand times price and undercut the winner by eps.
    An empty exploit set posts price 0 (one bounded-regret round).
    """
    for i in sorted(state.observed):
        tracker = state.observed[i]
        if cs_width(tracker.search, u) > state.eps and tracker.m < state.budget:
            mode = ("explore", i)
            state._pending = mode
            return cs_price(tracker.search, u), mode
    live = {i: cs_price(state.observed[i].search, u)
            for i in sorted(state.observed)
            if cs_width(state.observed[i].search, u) <= state.eps}
    if not live:
        mode = ("exploit", None)
        state._pending = mode
        return 0.0, mode
    t = state.round
    best_i, best_score = None, -1.0
    for i, price_i in live.items():
        freq_above = 0.0
        for j, price_j in live.items():
            if price_j >= price_i:
                freq_above += state.observed[j].n / (t - 1)
        score = freq_above * price_i
        if score > best_score:
            best_i, best_score = i, score
    mode = ("exploit", best_i)
    state._pending = mode
    return max(live[best_i] - state.eps, 0.0), mode


def ident_update(state: IdentifierState, u, p: float, y: int,
                 z: int) -> IdentifierState:
    """Consume the outcome of the round issued by the last ident_select.

    Exploration of type i always spends budget; its search state only moves
    when the arriving type actually was i. First arrivals get a fresh
    ellipsoid over the whole type box.
    """
    if state._pending is None:
        raise PricingError("ident_update must follow ident_select")
    mode = state._pending
    state._pending = None
    if mode[0] == "explore":
        i = mode[1]
        tracker = state.observed[i]
        tracker.m += 1
        if z == i:
            tracker.search = cs_update(tracker.search, u, p, y)
    if z not in state.observed:
        state.observed[z] = TypeTracker(EllipsoidState.initial(state.dim))
    state.observed[z].n += 1
    state.round += 1
    return state


@dataclass
class PluginState:
    """Empirical type distribution from fully observed type vectors."""

    dim: int
    counts: dict[tuple, int] = field(default_factory=dict)
    total: int = 0

    def empirical(self) -> TypeDistribution:
        if self.total == 0:
            raise PricingError("no observations yet")
        return TypeDistribution(
            (theta, c / self.total) for theta, c in self.counts.items())


def plugin_select(state: PluginState, u) -> float:
    """1/2 before any observation, then the empirical best response."""
    if state.total == 0:
        return 0.5
    return best_response(project(state.empirical(), u))


def plugin_update(state: PluginState, theta) -> PluginState:
    vec = np.asarray(theta, dtype=float)
    if vec.shape != (state.dim,):
        raise PricingError("type vector has the wrong dimension")
    if np.any(vec < 0.0) or np.any(vec > 1.0):
        raise PricingError("type vector must lie in [0,1]^d")
    key = tuple(vec.tolist())
    state.counts[key] = state.counts.get(key, 0) + 1
    state.total += 1
    return state
