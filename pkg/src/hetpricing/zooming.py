"""Variance-aware zooming for non-contextual pricing.

Keeps a sorted set of active prices, each with a Bernstein-style confidence
radius built from the arm's empirical revenue variance. Revenue only climbs
slowly to the left of a price (one-sided Lipschitzness), so an arm covers
the span up to one radius above itself; whenever a span opens up, the
midpoint toward the next arm is activated. The dyadic seeds make every price
above 1/horizon covered from round one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .pricing import PricingError

INF = float("inf")


@dataclass
class ArmStats:
    """Pull count and running revenue moments for one active price."""

    price: float
    n: int = 0
    total: float = 0.0   # sum of p*y over pulls
    m2: float = 0.0      # sum of squared deviations (Welford)

    @property
    def mean(self) -> float:
        return self.total / self.n if self.n >= 1 else 0.0

    @property
    def variance(self) -> float:
        if self.n == 0:
            return 0.0
        if self.n == 1:
            return INF
        return self.m2 / (self.n - 1)

    def add(self, value: float):
        if self.n == 0:
            self.n = 1
            self.total = value
            self.m2 = 0.0
            return
        old_mean = self.total / self.n
        self.total += value
        self.n += 1
        new_mean = self.total / self.n
        self.m2 += (value - old_mean) * (value - new_mean)


def confidence_radius(stats: ArmStats, horizon: int, c_var: float = 10.0,
                      c_bias: float = 12.0) -> float:
    """sqrt(c_var * V * ln T / n) + c_bias * ln T / (n-1); infinite for n <= 1."""
    if horizon < 2:
        raise PricingError("horizon must be at least 2")
    if stats.n <= 1:
        return INF
    ln_t = math.log(horizon)
    v = stats.m2 / (stats.n - 1)
    return math.sqrt(c_var * v * ln_t / stats.n) + c_bias * ln_t / (stats.n - 1)


def index(stats: ArmStats, horizon: int, c_var: float = 10.0,
          c_bias: float = 12.0) -> float:
    """Optimistic score: mean plus twice the confidence radius."""
    r = confidence_radius(stats, horizon, c_var, c_bias)
    return INF if r == INF else stats.mean + 2.0 * r


def dyadic_seeds(horizon: int) -> list[float]:
    """Initial active prices {2^i / T} up to 1, plus 1 itself."""
    if horizon < 2:
        raise PricingError("horizon must be at least 2")
    seeds = {2.0 ** i / horizon for i in range(int(math.log2(horizon)) + 1)}
    seeds.add(1.0)
    return sorted(seeds)


@dataclass
class ZoomState:
    """Active arms sorted by price; a single owner advances rounds."""

    horizon: int
    c_var: float = 10.0
    c_bias: float = 12.0
    arms: list[ArmStats] = field(default_factory=list)
    round: int = 1

    def __post_init__(self):
        if not self.arms:
            self.arms = [ArmStats(p) for p in dyadic_seeds(self.horizon)]

    def prices(self) -> list[float]:
        return [a.price for a in self.arms]

    def radius(self, i: int) -> float:
        return confidence_radius(self.arms[i], self.horizon, self.c_var,
                                 self.c_bias)

    def covering_holds(self) -> bool:
        """Every price in [smallest arm, 1] sits within one radius of an arm."""
        for i in range(len(self.arms) - 1):
            if self.arms[i + 1].price - self.arms[i].price > self.radius(i):
                return False
        return True


def select_price(state: ZoomState) -> float:
    """Smallest active price attaining the maximal index."""
    if not state.arms:
        raise PricingError("no active arms")
    best = 0
    best_idx = index(state.arms[0], state.horizon, state.c_var, state.c_bias)
    for i in range(1, len(state.arms)):
        cand = index(state.arms[i], state.horizon, state.c_var, state.c_bias)
        if cand > best_idx:
            best = i
            best_idx = cand
    return state.arms[best].price


def update(state: ZoomState, p: float, y: int) -> ZoomState:
    """Record the observed purchase at an active price; reward is p*y."""
    arm = _find_arm(state, p)
    arm.add(p * float(y))
    state.round += 1
    return state


def activate_if_uncovered(state: ZoomState, p: float) -> list[float]:
    """Insert midpoints above the just-played arm until coverage is restored.

    One insertion suffices when the played radius shrank by a bounded factor
    (the usual regime); the loop guards the remaining corner cases. Returns
    the inserted prices, lowest first (empty when coverage already held).
    """
    i = _find_index(state, p)
    inserted: list[float] = []
    while True:
        r = state.radius(i)
        if i + 1 >= len(state.arms):
            break
        nxt = state.arms[i + 1].price
        if nxt - state.arms[i].price <= r:
            break
        newp = (state.arms[i].price + nxt) / 2.0
        if newp <= state.arms[i].price or newp >= nxt:
            break
        state.arms.insert(i + 1, ArmStats(newp))
        inserted.append(newp)
    return inserted


def _find_index(state: ZoomState, p: float) -> int:
    for i, arm in enumerate(state.arms):
        if arm.price == p:
            return i
    raise PricingError(f"price {p} is not an active arm")


def _find_arm(state: ZoomState, p: float) -> ArmStats:
    return state.arms[_find_index(state, p)]


@dataclass
class ZoomVResult:
    """Trace of one kernel episode plus invariant counters."""

    prices: np.ndarray
    gaps: np.ndarray
    final_arms: np.ndarray
    clean_violations: int
    clean_pairs: int
    cover_violation_round: int


def run_zoomv_episode(valuations: np.ndarray, horizon: int,
                      atom_values: np.ndarray, atom_tail: np.ndarray,
                      max_rev: float, c_var: float = 10.0,
                      c_bias: float = 12.0, variance_blind: bool = False,
                      check: bool = False) -> ZoomVResult:
    """Run a whole episode through the episode kernel.

    ``valuations`` are the realized buyer valuations (one per round);
    ``atom_values``/``atom_tail``/``max_rev`` describe the true value
    distribution so the kernel can report exact per-round gaps. With
    ``check`` the kernel also verifies the covering invariant at the start
    of every round and counts clean-event violations over (round, arm) pairs.
    """
    seeds = np.asarray(dyadic_seeds(horizon), dtype=float)
    out = _kernels.zoomv_episode(
        np.ascontiguousarray(valuations, dtype=float), seeds, horizon,
        float(c_var), float(c_bias), bool(variance_blind),
        np.ascontiguousarray(atom_values, dtype=float),
        np.ascontiguousarray(atom_tail, dtype=float), float(max_rev),
        bool(check))
    return ZoomVResult(*out)
