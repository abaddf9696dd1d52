"""Episode runner, regret accounting, baselines, and output files.

Each (config, seed) pair is an independent, deterministic episode. The seed
spawns three named substreams (context, learner, type) so swapping the
learner leaves the context and buyer draws untouched; paired-seed
comparisons across learners are variance-reduced by construction. The gap
against the exact per-context benchmark is computed from the true instance,
which learners never see: they observe contexts, their own prices, the
purchase bit, and (only when configured) the buyer's identifier or vector.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .covers import CoverSpec, ModelClass, build_cube_cover, build_layered_class
from .instances import (AdversarySpec, InstanceSpec, next_context,
                        type_index_from_uniform, validate_instance_context)
from .posterior import (PosteriorState, gops_select, gops_update, make_ops,
                        make_pops)
from .pricing import (PricingError, SmoothingParams, TypeDistribution,
                      ValueDistribution, max_revenue, project,
                      smoothed_demand)
from .type_feedback import (IdentifierState, PluginState, ident_select,
                            ident_update, plugin_update)
from .zooming import run_zoomv_episode

SUMMARY_SCHEMA = "v1"
CSV_COLUMNS = ["seed", "t", "context_id", "price", "purchase", "gap",
               "cum_regret"]


class InvariantViolation(RuntimeError):
    """An enabled runtime invariant check failed (message carries the round)."""


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs; JSON-serializable."""

    instance: InstanceSpec
    adversary: AdversarySpec
    learner: dict
    T: int
    seeds: tuple[int, ...]
    out_dir: str | None = None
    invariant_checks: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise PricingError("T must be at least 1")
        if not self.seeds:
            raise PricingError("need at least one seed")

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        return cls(
            instance=InstanceSpec.from_json(obj["instance"]),
            adversary=AdversarySpec.from_json(
                obj.get("adversary", {"kind": "fixed", "u": [1.0]})),
            learner=dict(obj["learner"]),
            T=int(obj["T"]),
            seeds=tuple(int(s) for s in obj.get("seeds", [0])),
            out_dir=(obj.get("output") or {}).get("dir"),
            invariant_checks=bool(obj.get("invariant_checks", False)),
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        out = {
            "instance": self.instance.to_json(),
            "adversary": self.adversary.to_json(),
            "learner": self.learner,
            "T": self.T,
            "seeds": list(self.seeds),
            "invariant_checks": self.invariant_checks,
        }
        if self.out_dir:
            out["output"] = {"dir": self.out_dir}
        return out


@dataclass(frozen=True)
class RoundRecord:
    """One round of an episode trace."""

    t: int
    context_id: int
    price: float
    purchase: int
    gap: float
    cum_regret: float
    hat_price: float | None = None


@dataclass
class EpisodeResult:
    """Arrays of one episode trace, with per-round records on demand."""

    seed: int
    context_ids: np.ndarray
    prices: np.ndarray
    purchases: np.ndarray
    gaps: np.ndarray
    hat_prices: np.ndarray | None = None

    @property
    def cum_regret(self) -> np.ndarray:
        return np.cumsum(self.gaps)

    @property
    def final_regret(self) -> float:
        return float(self.gaps.sum())

    def records(self) -> list[RoundRecord]:
        cum = self.cum_regret
        hats = self.hat_prices
        return [RoundRecord(t=t + 1,
                            context_id=int(self.context_ids[t]),
                            price=float(self.prices[t]),
                            purchase=int(self.purchases[t]),
                            gap=float(self.gaps[t]),
                            cum_regret=float(cum[t]),
                            hat_price=None if hats is None else float(hats[t]))
                for t in range(len(self.prices))]


# ---------------------------------------------------------------------------
# learner adapters

class _GopsAdapter:
    feedback = "binary"

    def __init__(self, state: PosteriorState):
        self.state = state
        self.last_hat = np.nan

    def select(self, u, rng) -> float:
        decision = gops_select(self.state, u, rng)
        self.last_hat = decision.hat_price
        return decision.posted_price

    def update(self, u, price, y, theta, z):
        gops_update(self.state, u, self.last_hat, y)


class _IdentifierAdapter:
    feedback = "type_id"

    def __init__(self, state: IdentifierState):
        self.state = state

    def select(self, u, rng) -> float:
        price, _ = ident_select(self.state, u)
        return price

    def update(self, u, price, y, theta, z):
        ident_update(self.state, u, price, y, z)

    def max_exploration_count(self) -> int:
        if not self.state.observed:
            return 0
        return max(tr.m for tr in self.state.observed.values())


class _PluginAdapter:
    feedback = "type_vector"

    def __init__(self, dim: int):
        self.state = PluginState(dim=dim)
        self._dirty = True
        self._flat: list[tuple[np.ndarray, float]] = []

    def select(self, u, rng) -> float:
        if self.state.total == 0:
            return 0.5
        if self._dirty:
            total = self.state.total
            self._flat = [(np.asarray(k), c / total)
                          for k, c in self.state.counts.items()]
            self._dirty = False
        vec = np.asarray(u, dtype=float)
        pairs = sorted((float(theta @ vec), w) for theta, w in self._flat)
        revs = []
        tail = 0.0
        for v, w in reversed(pairs):
            tail += w
            revs.append(v * tail)
        revs.reverse()
        top = max(revs)
        for (v, _), rev in zip(pairs, revs):
            if rev >= top - 1e-9:  # smallest price within the tie tolerance
                return v
        return pairs[0][0]

    def update(self, u, price, y, theta, z):
        plugin_update(self.state, theta)
        self._dirty = True


class _FixedPriceKernelLearner:
    """Non-contextual learners that run whole episodes inside a kernel."""

    feedback = "binary"

    def run(self, valuations, oracle, check):
        raise NotImplementedError


class _ZoomVAdapter(_FixedPriceKernelLearner):
    def __init__(self, horizon, c_var, c_bias, variance_blind):
        self.horizon = horizon
        self.c_var = c_var
        self.c_bias = c_bias
        self.variance_blind = variance_blind
        self.last_result = None

    def run(self, valuations, oracle, check):
        res = run_zoomv_episode(valuations, self.horizon, oracle.values,
                                oracle.tail, oracle.max_rev,
                                c_var=self.c_var, c_bias=self.c_bias,
                                variance_blind=self.variance_blind,
                                check=check)
        if check and res.cover_violation_round:
            raise InvariantViolation(
                f"covering invariant failed at round {res.cover_violation_round}")
        self.last_result = res
        return res.prices, res.gaps


class _GridUcbAdapter(_FixedPriceKernelLearner):
    def __init__(self, horizon, grid_step):
        if not 0.0 < grid_step < 1.0:
            raise PricingError("grid_step must lie in (0,1)")
        self.horizon = horizon
        self.arms = SmoothingParams.from_eps(grid_step).grid

    def run(self, valuations, oracle, check):
        prices, gaps = _kernels.ucb_episode(
            np.ascontiguousarray(valuations), np.ascontiguousarray(self.arms),
            self.horizon, oracle.values, oracle.tail, oracle.max_rev)
        return prices, gaps


def grid_ucb_baseline(grid_step: float, horizon: int) -> _GridUcbAdapter:
    """Fixed-grid UCB1 comparison learner (index = mean + sqrt(2 ln T / n))."""
    return _GridUcbAdapter(horizon, grid_step)


def _build_model_class(cfg: dict, horizon: int) -> ModelClass:
    if "models" in cfg:
        models = [TypeDistribution.from_json(m) for m in cfg["models"]]
        prior = cfg.get("prior")
        return ModelClass(models, None if prior is None else np.asarray(prior))
    if "cover_file" in cfg:
        return ModelClass.load(cfg["cover_file"])
    if "cover" in cfg:
        c = cfg["cover"]
        box = c.get("theta_box")
        if box is not None:
            box = tuple(tuple(b) for b in box)
        return build_cube_cover(CoverSpec(
            dim=int(c["dim"]), K=int(c["K"]), eps=float(c["eps"]),
            theta_box=box, size_cap=int(c.get("size_cap", 200_000))))
    if "layered" in cfg:
        c = cfg["layered"]
        return build_layered_class(
            d=int(c["d"]), horizon=int(c.get("T", horizon)),
            eps=c.get("eps"), layers=c.get("M"),
            size_cap=int(c.get("size_cap", 200_000)))
    raise PricingError("learner config needs models, cover, cover_file, "
                       "or layered")


def build_learner(cfg: dict, horizon: int, dim: int):
    kind = cfg.get("learner")
    if kind == "ops":
        model_class = _build_model_class(cfg, horizon)
        return _GopsAdapter(make_ops(model_class, int(cfg["K"]), horizon))
    if kind == "pops":
        model_class = _build_model_class(cfg, horizon)
        eps = float(cfg.get("eps", 0.02))
        return _GopsAdapter(make_pops(model_class, eps,
                                      cfg.get("lambda"), d=dim,
                                      horizon=horizon))
    if kind == "zoomv":
        return _ZoomVAdapter(horizon, float(cfg.get("const_var", 10.0)),
                             float(cfg.get("const_bias", 12.0)),
                             bool(cfg.get("variance_blind", False)))
    if kind == "grid_ucb":
        return _GridUcbAdapter(horizon, float(cfg.get("grid_step", 0.01)))
    if kind == "identifier":
        return _IdentifierAdapter(IdentifierState(
            dim=dim, horizon=horizon,
            budget_divisor=float(cfg.get("budget_divisor", 1.0))))
    if kind == "plugin":
        return _PluginAdapter(dim)
    raise PricingError(f"unknown learner kind {cfg.get('learner')!r}")


# ---------------------------------------------------------------------------
# episodes

class _Oracle:
    """Exact benchmark data for one projected value distribution."""

    __slots__ = ("q", "values", "tail", "max_rev")

    def __init__(self, q: ValueDistribution):
        self.q = q
        self.values = q.values
        self.tail = q.tail
        self.max_rev = max_revenue(q)

    def gap(self, p: float) -> float:
        idx = int(np.searchsorted(self.values, p, side="left"))
        g = self.max_rev - p * self.tail[idx]
        return g if g > 0.0 else 0.0


def _streams(seed: int):
    ctx_ss, learner_ss, type_ss = np.random.SeedSequence(seed).spawn(3)
    make = lambda ss: np.random.Generator(np.random.Philox(ss))
    return make(ctx_ss), make(learner_ss), make(type_ss)


def run_episode(config: RunConfig, seed: int, learner=None) -> EpisodeResult:
    """Play T rounds; deterministic in (config, seed).

    Per-round order: adversary context, learner price, buyer type, purchase
    y = 1{<u, theta> >= p}, learner update, exact-benchmark gap. The type
    substream is materialized as one uniform per round up front, so every
    learner (fast-path or not) consumes identical buyer draws. Passing a
    pre-built ``learner`` overrides the config block (callers that need to
    inspect the final learner state).
    """
    instance = config.instance.build()
    horizon = config.T
    dim = config.adversary.context_dim(instance.dim)
    if dim != instance.dim:
        raise PricingError("adversary and instance dimensions differ")
    if learner is None:
        learner = build_learner(config.learner, horizon, dim)

    rng_ctx, rng_learner, rng_type = _streams(seed)
    type_uniforms = rng_type.random(horizon)

    if isinstance(learner, _FixedPriceKernelLearner):
        if config.adversary.kind != "fixed" or dim != 1 \
                or abs(config.adversary.u[0] - 1.0) > 1e-12:
            raise PricingError(
                "non-contextual learners need the fixed context u=(1,) in d=1")
        u = np.array([1.0])
        validate_instance_context(instance, u)
        oracle = _Oracle(project(instance, u))
        idx = np.minimum(
            np.searchsorted(np.cumsum(instance.weights), type_uniforms,
                            side="right"), instance.support_size - 1)
        valuations = instance.thetas[idx, 0]
        prices, gaps = learner.run(valuations, oracle, config.invariant_checks)
        purchases = (valuations >= prices).astype(np.int64)
        return EpisodeResult(seed=seed,
                             context_ids=np.zeros(horizon, dtype=np.int64),
                             prices=prices, purchases=purchases, gaps=gaps)

    oracles: dict[bytes, _Oracle] = {}
    checked: set[bytes] = set()
    context_ids = np.empty(horizon, dtype=np.int64)
    prices = np.empty(horizon)
    purchases = np.empty(horizon, dtype=np.int64)
    gaps = np.empty(horizon)
    hats = np.empty(horizon) if isinstance(learner, _GopsAdapter) else None
    wants_id = learner.feedback == "type_id"
    wants_vector = learner.feedback == "type_vector"

    for t in range(1, horizon + 1):
        u, ctx_id = next_context(config.adversary, t, dim, rng_ctx)
        key = u.tobytes()
        if key not in checked:
            validate_instance_context(instance, u)
            checked.add(key)
        price = learner.select(u, rng_learner)
        z = type_index_from_uniform(instance, type_uniforms[t - 1])
        theta = instance.thetas[z]
        y = int(float(theta @ u) >= price)
        learner.update(u, price, y,
                       theta if wants_vector else None,
                       z if wants_id else None)
        oracle = oracles.get(key)
        if oracle is None:
            oracle = _Oracle(project(instance, u))
            if len(oracles) < 4096:
                oracles[key] = oracle
        context_ids[t - 1] = ctx_id
        prices[t - 1] = price
        purchases[t - 1] = y
        gaps[t - 1] = oracle.gap(price)
        if hats is not None:
            hats[t - 1] = learner.last_hat
        if config.invariant_checks and isinstance(learner, _GopsAdapter):
            total = float(np.exp(learner.state.log_weights).sum())
            if abs(total - 1.0) > 1e-9:
                raise InvariantViolation(
                    f"posterior mass {total} at round {t}")
    return EpisodeResult(seed=seed, context_ids=context_ids, prices=prices,
                         purchases=purchases, gaps=gaps, hat_prices=hats)


def run_coupled_pops(model_class: ModelClass, lam: float, eps: float,
                     dist_a: TypeDistribution, dist_b: TypeDistribution,
                     horizon: int, seed: int, u=None) -> bool:
    """Run one POPS learner in two worlds under a shared-uniform coupling.

    Both worlds see the same learner draws; one uniform per round decides the
    purchase in each world against that world's smoothed demand at the
    learner's grid price. Returns whether the (u, hat_p, y) trajectories
    agree on all rounds.
    """
    u = np.array([1.0]) if u is None else np.asarray(u, dtype=float)
    _, rng_learner, rng_env = _streams(seed)
    env_uniforms = rng_env.random(horizon)
    state_a = make_pops(model_class, eps, lam)
    state_b = make_pops(model_class, eps, lam)
    q_a = project(dist_a, u)
    q_b = project(dist_b, u)
    draws = [(rng_learner.random(), rng_learner.random())
             for _ in range(horizon)]
    identical = True
    for t in range(horizon):
        hat_a = _coupled_round(state_a, u, draws[t])
        hat_b = _coupled_round(state_b, u, draws[t])
        y_a = int(env_uniforms[t] < smoothed_demand(q_a, eps, hat_a))
        y_b = int(env_uniforms[t] < smoothed_demand(q_b, eps, hat_b))
        if hat_a != hat_b or y_a != y_b:
            identical = False
        gops_update(state_a, u, hat_a, y_a)
        gops_update(state_b, u, hat_b, y_b)
    return identical


def _coupled_round(state: PosteriorState, u, draws) -> float:
    u_model, _u_pert = draws
    logw = state.log_weights
    w = np.exp(logw - logw.max())
    cum = np.cumsum(w)
    idx = min(int(np.searchsorted(cum, u_model * cum[-1], side="right")),
              len(w) - 1)
    return float(state._context(u).br[idx])


# ---------------------------------------------------------------------------
# aggregation and output

def cumulative_regret(records) -> np.ndarray:
    """Prefix sums of per-round gaps (accepts records or an EpisodeResult)."""
    if isinstance(records, EpisodeResult):
        return records.cum_regret
    return np.cumsum([r.gap for r in records])


def checkpoints(horizon: int) -> list[int]:
    """Powers of two up to the horizon, always including the horizon."""
    pts = []
    c = 1
    while c < horizon:
        pts.append(c)
        c *= 2
    pts.append(horizon)
    return pts


@dataclass
class Summary:
    """Aggregated regret curves at logarithmic checkpoints."""

    checkpoints: list[int]
    mean_curve: list[float]
    std_curve: list[float]
    final_regret_per_seed: dict[int, float]
    metadata: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    def to_json(self) -> dict:
        return {
            "schema": SUMMARY_SCHEMA,
            "checkpoints": self.checkpoints,
            "mean_curve": self.mean_curve,
            "std_curve": self.std_curve,
            "final_regret_per_seed": {str(k): v for k, v
                                      in self.final_regret_per_seed.items()},
            "metadata": self.metadata,
            "wall_time_s": self.wall_time_s,
        }


def aggregate(curves: dict[int, np.ndarray], metadata: dict | None = None,
              wall_time_s: float = 0.0) -> Summary:
    """Pointwise mean/sample-std of per-seed cumulative-regret curves."""
    if not curves:
        raise PricingError("nothing to aggregate")
    lengths = {len(c) for c in curves.values()}
    if len(lengths) != 1:
        raise PricingError("curves have mismatched horizons")
    horizon = lengths.pop()
    pts = checkpoints(horizon)
    stack = np.stack([np.asarray(curves[s]) for s in sorted(curves)])
    at = stack[:, [p - 1 for p in pts]]
    means = at.mean(axis=0)
    stds = (at.std(axis=0, ddof=1) if len(curves) > 1
            else np.zeros(len(pts)))
    return Summary(
        checkpoints=pts,
        mean_curve=[float(x) for x in means],
        std_curve=[float(x) for x in stds],
        final_regret_per_seed={s: float(curves[s][-1]) for s in sorted(curves)},
        metadata=metadata or {},
        wall_time_s=wall_time_s,
    )


def _run_one(args) -> tuple[int, EpisodeResult]:
    config, seed = args
    return seed, run_episode(config, seed)


def run_many(config: RunConfig, jobs: int | None = None
             ) -> dict[int, EpisodeResult]:
    """All seeds of a config, optionally across processes."""
    if jobs is None:
        jobs = int(os.environ.get("HETPRICING_JOBS", "1"))
    tasks = [(config, s) for s in config.seeds]
    if jobs <= 1 or len(tasks) == 1:
        return {s: run_episode(config, s) for s in config.seeds}
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return dict(pool.map(_run_one, tasks))


def run_and_summarize(config: RunConfig, jobs: int | None = None
                      ) -> tuple[Summary, dict[int, EpisodeResult]]:
    start = time.perf_counter()
    results = run_many(config, jobs)
    curves = {s: r.cum_regret for s, r in results.items()}
    meta = {"learner": config.learner,
            "instance": config.instance.to_json(),
            "adversary": config.adversary.to_json(),
            "T": config.T, "seeds": list(config.seeds)}
    summary = aggregate(curves, meta, time.perf_counter() - start)
    return summary, results


def emit_csv(results, path) -> None:
    """Write episode traces as CSV (12 significant digits for floats)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for res in results:
            cum = res.cum_regret
            for t in range(len(res.prices)):
                writer.writerow([
                    res.seed, t + 1, int(res.context_ids[t]),
                    f"{res.prices[t]:.12g}", int(res.purchases[t]),
                    f"{res.gaps[t]:.12g}", f"{cum[t]:.12g}",
                ])


def emit_json(summary: Summary, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary.to_json(), fh, indent=2)
