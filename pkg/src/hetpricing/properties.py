"""Randomized property suites for the core invariants.

Each check returns (ok, detail). The ``verify`` CLI subcommand runs them at
default budgets; the test suite calls the same functions at the budgets the
acceptance gate requires.
"""

from __future__ import annotations

import inspect

import numpy as np

from .covers import CoverSpec, build_cube_cover
from .pricing import (SmoothingParams, ValueDistribution, best_response,
                      demand, discretized_best_response, gap, levy_distance,
                      max_revenue, project, revenue, smoothed_demand)
from .type_feedback import EllipsoidState, cs_price, cs_update, cs_width


def random_value_dist(rng, max_atoms: int = 6,
                      min_spacing: float = 1e-3) -> ValueDistribution:
    k = int(rng.integers(1, max_atoms + 1))
    values = np.sort(rng.random(k))
    keep = np.concatenate(([True], np.diff(values) > min_spacing))
    values = values[keep]
    weights = rng.random(len(values)) + 0.05
    weights /= weights.sum()
    return ValueDistribution(zip(values, weights))


def perturbed_copy(q: ValueDistribution, rng, scale: float) -> ValueDistribution:
    """Jitter atom locations by up to ``scale`` (weights untouched)."""
    for _ in range(100):
        values = np.sort(np.clip(q.values + rng.uniform(-scale, scale, len(q)),
                                 0.0, 1.0))
        if np.all(np.diff(values) > 1e-9):
            return ValueDistribution(zip(values, q.weights))
    # clipped atoms kept colliding: shrink toward the interior instead
    values = q.values * (1.0 - 2e-3) + 1e-3
    return ValueDistribution(zip(values, q.weights))


def check_one_sided_lipschitz(n: int = 10_000, seed: int = 0,
                              tol: float = 1e-12):
    """rev(p') - rev(p) <= dem(p) (p' - p) for p < p'."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n):
        q = random_value_dist(rng)
        a, b = np.sort(rng.random(2))
        if a == b:
            continue
        slack = revenue(q, b) - revenue(q, a) - demand(q, a) * (b - a)
        worst = max(worst, slack)
        if slack > tol:
            return False, f"violation {slack:.3g} at ({a}, {b}) on {q}"
    return True, f"worst slack {worst:.3g} over {n} draws"


def check_demand_monotone(n: int = 2_000, seed: int = 1):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        q = random_value_dist(rng)
        a, b = np.sort(rng.random(2))
        if demand(q, a) < demand(q, b) - 1e-15:
            return False, f"demand increased between {a} and {b}"
        eps = float(rng.uniform(0.01, 0.9))
        if smoothed_demand(q, eps, a) < smoothed_demand(q, eps, b) - 1e-12:
            return False, f"smoothed demand increased between {a} and {b}"
    return True, f"{n} draws monotone"


def check_br_atom_optimality(n: int = 300, seed: int = 2,
                             grid_points: int = 10_000):
    """Revenue at the best response beats a dense uniform price grid."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, grid_points)
    for _ in range(n):
        q = random_value_dist(rng)
        br_rev = revenue(q, best_response(q))
        dem = q.tail[np.searchsorted(q.values, grid, side="left")]
        if br_rev < (grid * dem).max() - 1e-9:
            return False, f"grid beats best response on {q}"
    return True, f"{n} distributions checked"


def check_levy_conservative_policy(n: int = 1_000, seed: int = 3,
                                   tol: float = 1e-9):
    """Levy-close pair: undercutting one best response serves both.

    With e > levy distance, pi = max(br_P - e, 0) earns at least
    rev_P(br_P) - e under P and rev_Q(br_Q) - 3e under Q.
    """
    rng = np.random.default_rng(seed)
    for _ in range(n):
        p_dist = random_value_dist(rng)
        q_dist = perturbed_copy(p_dist, rng, float(rng.uniform(0.002, 0.08)))
        measured = levy_distance(p_dist, q_dist, tol=1e-10)
        eps = measured + 1e-6
        pi = max(best_response(p_dist) - eps, 0.0)
        if revenue(p_dist, pi) < revenue(p_dist, best_response(p_dist)) - eps - tol:
            return False, f"own-revenue bound failed at eps={eps}"
        if revenue(q_dist, pi) < revenue(q_dist, best_response(q_dist)) - 3 * eps - tol:
            return False, f"cross-revenue bound failed at eps={eps}"
    return True, f"{n} pairs within both bounds"


def check_smoothed_cover_bound(n: int = 500, seed: int = 4,
                               tol: float = 1e-9):
    """Levy distance below e^2/2 keeps smoothed demands within e on the grid."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        p_dist = random_value_dist(rng)
        q_dist = perturbed_copy(p_dist, rng, float(rng.uniform(0.001, 0.04)))
        measured = levy_distance(p_dist, q_dist, tol=1e-10)
        eps = min(np.sqrt(2.0 * (measured + 1e-9)) + 1e-6, 0.9)
        if eps <= 0.0:
            continue
        grid = SmoothingParams.from_eps(eps).grid
        diff = max(abs(smoothed_demand(p_dist, eps, g)
                       - smoothed_demand(q_dist, eps, g)) for g in grid)
        if diff > eps + tol:
            return False, f"max grid diff {diff} > eps {eps}"
    return True, f"{n} pairs within eps"


def brute_force_disc_br(q: ValueDistribution, params: SmoothingParams) -> float:
    """Smallest full-grid argmax of the smoothed revenue (test oracle)."""
    best_p, best_rev = 0.0, -1.0
    for p in params.grid.tolist():
        r = p * smoothed_demand(q, params.eps, p)
        if r > best_rev:
            best_rev = r
            best_p = p
    return best_p


def check_disc_br_oracle(n: int = 1_000, seed: int = 5):
    """Candidate-set discretized best response equals the full-grid argmax."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        q = random_value_dist(rng)
        params = SmoothingParams.from_eps(float(rng.uniform(0.01, 0.25)))
        fast = discretized_best_response(q, params)
        slow = brute_force_disc_br(q, params)
        if fast != slow:
            return False, f"{fast} != {slow} for eps={params.eps} on {q}"
    return True, f"{n} random (Q, eps) matched"


def check_cover_guarantee(n: int = 100, seed: int = 6, K: int = 2,
                          eps: float = 0.3, tol: float = 1e-6):
    """Random distributions sit within eps of the cube cover (d=1, u=1)."""
    rng = np.random.default_rng(seed)
    cover = build_cube_cover(CoverSpec(dim=1, K=K, eps=eps))
    u = np.array([1.0])
    projected = [project(m, u) for m in cover.models]
    worst = 0.0
    for _ in range(n):
        k = int(rng.integers(1, K + 1))
        values = np.sort(rng.random(k))
        while len(values) > 1 and np.any(np.diff(values) < 1e-6):
            values = np.sort(rng.random(k))
        weights = rng.random(k) + 0.05
        weights /= weights.sum()
        target = ValueDistribution(zip(values, weights))
        dist = min(levy_distance(target, q, tol=1e-9) for q in projected)
        worst = max(worst, dist)
        if dist > eps + tol:
            return False, f"distribution at Levy distance {dist} > {eps}"
    return True, f"worst cover distance {worst:.4f} <= {eps}"


def check_gap_sanity(n: int = 500, seed: int = 7):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        q = random_value_dist(rng)
        p = float(rng.random())
        if gap(q, p) < 0.0:
            return False, "negative gap"
        if gap(q, best_response(q)) > 1e-12:
            return False, "gap at the best response exceeds 1e-12"
        if abs(max_revenue(q) - revenue(q, best_response(q))) > 1e-9:
            return False, "max revenue and best-response revenue disagree"
    return True, f"{n} draws consistent"


def check_ellipsoid_membership(n_updates: int = 2_000, seed: int = 8,
                               dims=(1, 2, 3)):
    """Noiseless cuts never expel the true type vector."""
    rng = np.random.default_rng(seed)
    for d in dims:
        theta = rng.random(d)
        theta *= rng.uniform(0.2, 1.0) / max(np.linalg.norm(theta), 1.0)
        state = EllipsoidState.initial(d)
        for _ in range(n_updates):
            u = np.abs(rng.standard_normal(d))
            u /= np.linalg.norm(u)
            p = cs_price(state, u)
            y = int(float(theta @ u) >= p)
            state = cs_update(state, u, p, y)
            if not state.contains(theta):
                return False, f"true type expelled in d={d}"
            if float(theta @ u) > 1e-12 + cs_price(state, u) + cs_width(state, u):
                return False, f"price/width contract broken in d={d}"
    return True, f"{n_updates} updates per dimension, membership intact"


ALL_CHECKS = [
    ("one_sided_lipschitz", check_one_sided_lipschitz),
    ("demand_monotone", check_demand_monotone),
    ("br_atom_optimality", check_br_atom_optimality),
    ("levy_conservative_policy", check_levy_conservative_policy),
    ("smoothed_cover_bound", check_smoothed_cover_bound),
    ("disc_br_oracle", check_disc_br_oracle),
    ("cover_guarantee", check_cover_guarantee),
    ("gap_sanity", check_gap_sanity),
    ("ellipsoid_membership", check_ellipsoid_membership),
]


def run_all(budget: float = 1.0):
    """Run every suite (budget scales the draw counts); yields results."""
    for name, fn in ALL_CHECKS:
        kwargs = {}
        sig = inspect.signature(fn)
        if "n" in sig.parameters:
            kwargs["n"] = max(20, int(sig.parameters["n"].default * budget))
        ok, detail = fn(**kwargs)
        yield name, ok, detail
