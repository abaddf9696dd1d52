"""Exact finite-support pricing primitives.

Valuations live in [0,1]; a buyer of type ``theta`` facing context ``u``
values the item at ``<theta, u>``. Everything here is a pure function of
immutable finite-support distributions: projection onto a context, the
demand/revenue/best-response/gap family, the Levy distance between value
distributions, and the smoothed/discretized variants used by perturbed
posterior-sampling learners.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

WEIGHT_TOL = 1e-12   # weight vectors must sum to 1 within this
UNIT_TOL = 1e-9      # contexts must have unit norm within this
VALUE_TOL = 1e-9     # projected values may exceed [0,1] by at most this
MERGE_TOL = 1e-12    # projected values closer than this merge into one atom
TIE_TOL = 1e-9       # revenue ties in best responses are broken at this scale


class PricingError(ValueError):
    """Raised when a distribution, context, or price violates a precondition."""


def _as_unit_vector(u) -> np.ndarray:
    vec = u.u if isinstance(u, Context) else np.asarray(u, dtype=float)
    if vec.ndim != 1:
        raise PricingError(f"context must be a 1-d vector, got shape {vec.shape}")
    return vec


@dataclass(frozen=True)
class Context:
    """A unit-norm feature vector chosen by the adversary."""

    u: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.u, dtype=float)
        object.__setattr__(self, "u", vec)
        if vec.ndim != 1:
            raise PricingError("context must be a 1-d vector")
        nrm = float(np.linalg.norm(vec))
        if abs(nrm - 1.0) > UNIT_TOL:
            raise PricingError(f"context norm {nrm} is not 1 within {UNIT_TOL}")

    @property
    def dim(self) -> int:
        return len(self.u)


class ValueDistribution:
    """Finite-support distribution over valuations in [0,1].

    Atoms are stored sorted by value; ``tail[i]`` caches the total weight of
    atoms ``i..K-1`` so demand lookups are a binary search plus one read.
    """

    __slots__ = ("values", "weights", "tail")

    def __init__(self, atoms: Iterable[tuple[float, float]]):
        pairs = sorted((float(v), float(w)) for v, w in atoms)
        if not pairs:
            raise PricingError("value distribution needs at least one atom")
        values = np.array([v for v, _ in pairs], dtype=float)
        weights = np.array([w for _, w in pairs], dtype=float)
        if values[0] < -VALUE_TOL or values[-1] > 1.0 + VALUE_TOL:
            raise PricingError("valuations must lie in [0,1]")
        np.clip(values, 0.0, 1.0, out=values)
        if np.any(np.diff(values) <= 0.0):
            raise PricingError("valuations must be strictly increasing")
        if np.any(weights <= 0.0):
            raise PricingError("atom weights must be strictly positive")
        total = _seq_sum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise PricingError(f"weights sum to {total}, not 1 within {WEIGHT_TOL}")
        values.flags.writeable = False
        weights.flags.writeable = False
        self.values = values
        self.weights = weights
        tail = np.zeros(len(weights) + 1)
        for i in range(len(weights) - 1, -1, -1):
            tail[i] = tail[i + 1] + weights[i]
        tail.flags.writeable = False
        self.tail = tail

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.weights.tolist()))

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        return (isinstance(other, ValueDistribution)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.values.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        inside = ", ".join(f"{v:.4g}: {w:.4g}" for v, w in self.atoms)
        return f"ValueDistribution({{{inside}}})"

    def to_json(self) -> dict:
        return {"atoms": [{"v": v, "w": w} for v, w in self.atoms]}

    @classmethod
    def from_json(cls, obj: dict) -> "ValueDistribution":
        return cls((a["v"], a["w"]) for a in obj["atoms"])


class TypeDistribution:
    """Finite-support distribution over buyer types in [0,1]^d."""

    __slots__ = ("thetas", "weights", "dim")

    def __init__(self, atoms: Iterable[tuple[Sequence[float], float]]):
        items = [(np.asarray(t, dtype=float), float(w)) for t, w in atoms]
        if not items:
            raise PricingError("type distribution needs at least one atom")
        dim = len(items[0][0])
        if dim < 1:
            raise PricingError("type vectors must have positive dimension")
        thetas = np.empty((len(items), dim), dtype=float)
        weights = np.empty(len(items), dtype=float)
        for i, (t, w) in enumerate(items):
            if t.shape != (dim,):
                raise PricingError("all type vectors must share one dimension")
            thetas[i] = t
            weights[i] = w
        if np.any(thetas < -0.0) or np.any(thetas > 1.0):
            raise PricingError("type coordinates must lie in [0,1]")
        if np.any(weights <= 0.0):
            raise PricingError("atom weights must be strictly positive")
        total = _seq_sum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise PricingError(f"weights sum to {total}, not 1 within {WEIGHT_TOL}")
        order = np.lexsort(thetas.T[::-1])
        thetas = thetas[order]
        weights = weights[order]
        for i in range(len(items) - 1):
            if np.max(np.abs(thetas[i + 1] - thetas[i])) <= MERGE_TOL:
                raise PricingError("type atoms must be pairwise distinct")
        thetas.flags.writeable = False
        weights.flags.writeable = False
        self.thetas = thetas
        self.weights = weights
        self.dim = dim

    @property
    def support_size(self) -> int:
        return len(self.weights)

    @property
    def atoms(self) -> list[tuple[tuple[float, ...], float]]:
        return [(tuple(t), w) for t, w in zip(self.thetas.tolist(),
                                              self.weights.tolist())]

    def __eq__(self, other) -> bool:
        return (isinstance(other, TypeDistribution)
                and self.dim == other.dim
                and np.array_equal(self.thetas, other.thetas)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.dim, self.thetas.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        return f"TypeDistribution(K={self.support_size}, d={self.dim})"

    def to_json(self) -> dict:
        return {"dim": self.dim,
                "atoms": [{"theta": list(t), "w": w} for t, w in self.atoms]}

    @classmethod
    def from_json(cls, obj: dict) -> "TypeDistribution":
        dist = cls((a["theta"], a["w"]) for a in obj["atoms"])
        if dist.dim != obj["dim"]:
            raise PricingError("declared dim does not match atom vectors")
        return dist


@dataclass(frozen=True)
class SmoothingParams:
    """Smoothing width eps together with the price grid {0, eps, 2 eps, ...}.

    eps = 0 stands for the continuous price set [0,1] (no grid).
    """

    eps: float
    grid: np.ndarray | None

    @classmethod
    def from_eps(cls, eps: float) -> "SmoothingParams":
        eps = float(eps)
        if eps < 0.0 or eps >= 1.0:
            raise PricingError("eps must lie in [0,1)")
        if eps == 0.0:
            return cls(0.0, None)
        m = int(math.floor(1.0 / eps + 1e-9))
        grid = np.arange(m + 1, dtype=float) * eps
        grid = grid[grid <= 1.0 + 1e-12]
        grid.flags.writeable = False
        params = cls(eps, grid)
        params.validate()
        return params

    def validate(self):
        if self.eps == 0.0:
            if self.grid is not None:
                raise PricingError("eps=0 means a continuous price set")
            return
        g = self.grid
        if g is None or g[0] != 0.0 or g[-1] > 1.0 + 1e-12:
            raise PricingError("grid must start at 0 and stay within [0,1]")
        if np.any(np.abs(np.diff(g) - self.eps) > 1e-12):
            raise PricingError("consecutive grid points must differ by eps")


def _seq_sum(arr: np.ndarray) -> float:
    acc = 0.0
    for x in arr.tolist():
        acc += x
    return acc


def _check_price(p: float) -> float:
    p = float(p)
    if p < -1e-12 or p > 1.0 + VALUE_TOL:
        raise PricingError(f"price {p} outside [0,1]")
    return min(max(p, 0.0), 1.0)


def project(dist: TypeDistribution, u) -> ValueDistribution:
    """Law of <theta, u> for theta drawn from ``dist``.

    Atoms whose projections coincide (within MERGE_TOL) are merged.
    """
    vec = _as_unit_vector(u)
    if len(vec) != dist.dim:
        raise PricingError(f"context dim {len(vec)} != type dim {dist.dim}")
    vals = dist.thetas @ vec
    if np.any(vals < -VALUE_TOL) or np.any(vals > 1.0 + VALUE_TOL):
        raise PricingError("a projected valuation falls outside [0,1]")
    vals = np.clip(vals, 0.0, 1.0)
    order = np.argsort(vals, kind="stable")
    merged_v: list[float] = []
    merged_w: list[float] = []
    for i in order.tolist():
        v = float(vals[i])
        w = float(dist.weights[i])
        if merged_v and v - merged_v[-1] <= MERGE_TOL:
            merged_w[-1] += w
        else:
            merged_v.append(v)
            merged_w.append(w)
    return ValueDistribution(zip(merged_v, merged_w))


def demand(q: ValueDistribution, p: float) -> float:
    """P[v >= p] under q (purchase happens when valuation >= price)."""
    p = _check_price(p)
    idx = int(np.searchsorted(q.values, p, side="left"))
    return float(q.tail[idx])


def revenue(q: ValueDistribution, p: float) -> float:
    p = _check_price(p)
    return p * demand(q, p)


def max_revenue(q: ValueDistribution) -> float:
    """Largest expected revenue over [0,1]; attained at an atom."""
    revs = q.values * q.tail[:-1]
    return float(revs.max())


def best_response(q: ValueDistribution, tie_tol: float = TIE_TOL) -> float:
    """Smallest atom value maximizing revenue.

    Revenues within ``tie_tol`` of the maximum count as tied; the maximum over
    [0,1] sits at an atom because demand is flat between atoms, so revenue
    only climbs there.
    """
    revs = q.values * q.tail[:-1]
    top = float(revs.max())
    idx = int(np.argmax(revs >= top - tie_tol))
    return float(q.values[idx])


def gap(q: ValueDistribution, p: float) -> float:
    """Revenue shortfall of price p versus the best response (never negative)."""
    return max(0.0, max_revenue(q) - revenue(q, p))


def conservative_policy(dist: TypeDistribution, u, eps: float) -> float:
    """Best response along u pulled down by eps, floored at zero."""
    eps = float(eps)
    if eps < 0.0 or eps > 1.0:
        raise PricingError("eps must lie in [0,1]")
    return max(best_response(project(dist, u)) - eps, 0.0)


def _cdf_at(values: np.ndarray, prefix: np.ndarray, xs: np.ndarray) -> np.ndarray:
    return prefix[np.searchsorted(values, xs, side="right")]


def levy_distance(p_dist: ValueDistribution, q_dist: ValueDistribution,
                  tol: float = 1e-9) -> float:
    """Levy distance between two finite value distributions.

    Side length of the largest square that fits between the two CDFs,
    located by bisection; for a given eps, feasibility only needs checking
    at the atoms of either distribution shifted by 0 or +-eps, because both
    CDFs are step functions.
    """
    if tol <= 0.0:
        raise PricingError("tol must be positive")
    pv, qv = p_dist.values, q_dist.values
    p_pre = np.concatenate(([0.0], np.cumsum(p_dist.weights)))
    q_pre = np.concatenate(([0.0], np.cumsum(q_dist.weights)))
    base = np.concatenate((pv, qv))

    def feasible(eps: float) -> bool:
        xs = np.concatenate((base, base - eps, base + eps))
        fq = _cdf_at(qv, q_pre, xs)
        fp_lo = _cdf_at(pv, p_pre, xs - eps)
        if np.any(fp_lo - eps > fq + 1e-15):
            return False
        fp_hi = _cdf_at(pv, p_pre, xs + eps)
        return not np.any(fq - eps > fp_hi + 1e-15)

    if feasible(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def smoothed_demand(q: ValueDistribution, eps: float, p: float) -> float:
    """Demand averaged over a uniform downward price shift in [0, eps].

    Closed form: sum_j w_j * clamp((v_j - p + eps)/eps, 0, 1).
    """
    eps = float(eps)
    if eps <= 0.0 or eps >= 1.0:
        raise PricingError("eps must lie in (0,1)")
    p = _check_price(p)
    z = np.clip((q.values - p + eps) / eps, 0.0, 1.0)
    return float(z @ q.weights)


def smoothed_revenue(q: ValueDistribution, eps: float, p: float) -> float:
    p = _check_price(p)
    return p * smoothed_demand(q, eps, p)


def discretized_best_response(q: ValueDistribution,
                              params: SmoothingParams) -> float:
    """Smallest grid price maximizing the smoothed revenue over the grid.

    Only a candidate set is evaluated: grid points within one step of a knot
    of the smoothed demand (atom values and atom values + eps), plus 0 and
    the top of the grid. Away from every knot the smoothed demand is flat,
    so revenue rises and the best grid point of such a stretch is its right
    end, which sits next to a knot or is the top of the grid.
    """
    if params.eps <= 0.0:
        raise PricingError("discretized best response needs eps > 0")
    eps = params.eps
    grid = params.grid
    m = len(grid) - 1
    cand = {0, m}
    for knot in np.concatenate((q.values, q.values + eps)).tolist():
        k = knot / eps
        lo = int(math.floor(k)) - 1
        hi = int(math.ceil(k)) + 1
        for i in range(max(lo, 0), min(hi, m) + 1):
            cand.add(i)
    best_p = 0.0
    best_rev = -1.0
    for i in sorted(cand):
        p = float(grid[i])
        r = smoothed_revenue(q, eps, p)
        if r > best_rev:
            best_rev = r
            best_p = p
    return best_p


def dumps(obj) -> str:
    """JSON text for a ValueDistribution or TypeDistribution."""
    return json.dumps(obj.to_json())


def loads_value_distribution(text: str) -> ValueDistribution:
    return ValueDistribution.from_json(json.loads(text))


def loads_type_distribution(text: str) -> TypeDistribution:
    return TypeDistribution.from_json(json.loads(text))
