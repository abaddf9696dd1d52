"""Finite model classes over type distributions.

A cube cover snaps every distribution with at most K support points to a
grid of cube vertices with rationally-gridded weights; by construction each
such distribution has a cover element within a target Levy distance. The
layered class unions covers of growing support size under a prior that
shrinks with the layer, which is what the perturbed posterior-sampling
learner consumes when the true support size is unknown.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .pricing import (PricingError, TypeDistribution, levy_distance, project)

DEFAULT_SIZE_CAP = 200_000


class CoverSizeError(PricingError):
    """The requested cover enumeration exceeds the configured cap."""

    def __init__(self, required: int, cap: int):
        super().__init__(
            f"cover would need {required} models, above the cap of {cap}; "
            "increase size_cap or coarsen eps/K")
        self.required = required
        self.cap = cap


@dataclass(frozen=True)
class CoverSpec:
    """Parameters of a cube-partition Levy cover of Delta_K(Theta)."""

    dim: int
    K: int
    eps: float
    theta_box: tuple[tuple[float, float], ...] | None = None
    size_cap: int = DEFAULT_SIZE_CAP

    def __post_init__(self):
        if self.K < 1:
            raise PricingError("K must be at least 1")
        if not (0.0 < self.eps <= 1.0):
            raise PricingError("eps must lie in (0,1]")
        if self.size_cap < 1:
            raise PricingError("size_cap must be at least 1")
        box = self.theta_box
        if box is None:
            box = tuple((0.0, 1.0) for _ in range(self.dim))
            object.__setattr__(self, "theta_box", box)
        if len(box) != self.dim:
            raise PricingError("theta_box must give one interval per axis")
        for lo, hi in box:
            if not (0.0 <= lo < hi <= 1.0):
                raise PricingError("theta_box axes must be sub-intervals of [0,1]")


class ModelClass:
    """A finite list of candidate type distributions with a prior."""

    __slots__ = ("models", "prior", "layer_of")

    def __init__(self, models: list[TypeDistribution], prior=None,
                 layer_of: list[int] | None = None):
        if not models:
            raise PricingError("model class cannot be empty")
        if prior is None:
            prior = np.full(len(models), 1.0 / len(models))
        prior = np.asarray(prior, dtype=float)
        if len(prior) != len(models):
            raise PricingError("prior length must match the model list")
        if np.any(prior <= 0.0):
            raise PricingError("prior entries must be strictly positive")
        total = float(prior.sum())
        if abs(total - 1.0) > 1e-12:
            raise PricingError(f"prior sums to {total}, not 1")
        seen = set()
        for m in models:
            key = _model_key(m)
            if key in seen:
                raise PricingError("models must be pairwise distinct")
            seen.add(key)
        if layer_of is not None and len(layer_of) != len(models):
            raise PricingError("layer_of length must match the model list")
        prior.flags.writeable = False
        self.models = list(models)
        self.prior = prior
        self.layer_of = list(layer_of) if layer_of is not None else None

    def __len__(self) -> int:
        return len(self.models)

    def to_json(self) -> dict:
        return {
            "schema": "v1",
            "models": [m.to_json() for m in self.models],
            "prior": self.prior.tolist(),
            "layer_of": self.layer_of,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelClass":
        models = [TypeDistribution.from_json(m) for m in obj["models"]]
        return cls(models, np.asarray(obj["prior"], dtype=float),
                   obj.get("layer_of"))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "ModelClass":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _model_key(dist: TypeDistribution) -> tuple:
    # 1e-12 comparison granularity, matching the distinct-atoms invariant
    flat = np.round(np.column_stack(
        [dist.thetas, dist.weights]).ravel() / 1e-12).astype(np.int64)
    return (dist.dim,) + tuple(flat.tolist())


def _cube_vertices(spec: CoverSpec) -> list[tuple[float, ...]]:
    side = spec.eps / math.sqrt(spec.dim)
    axes = []
    for lo, hi in spec.theta_box:
        count = max(1, math.ceil((hi - lo) / side - 1e-12))
        axes.append([lo + i * side for i in range(count)])
    return [tuple(pt) for pt in itertools.product(*axes)]


def cover_size(spec: CoverSpec) -> int:
    """Number of models the cube cover enumerates, without building it."""
    n_cubes = len(_cube_vertices(spec))
    units = math.ceil(spec.K / spec.eps - 1e-12)
    total = 0
    for k in range(1, min(spec.K, n_cubes) + 1):
        total += math.comb(n_cubes, k) * math.comb(units - 1, k - 1)
    return total


def build_cube_cover(spec: CoverSpec) -> ModelClass:
    """Enumerate the cube-partition cover of Delta_K(theta_box).

    The box splits into cubes of side eps/sqrt(d); support points are the
    cubes' smallest vertices, and weights run over the positive multiples of
    1/ceil(K/eps) summing to 1 on at most K cubes. Every distribution with
    at most K support points then has a cover element within Levy distance
    eps: snapping atoms to their cube vertex moves values by at most eps and
    rounding the weights moves total mass by at most eps.
    """
    required = cover_size(spec)
    if required > spec.size_cap:
        raise CoverSizeError(required, spec.size_cap)
    vertices = _cube_vertices(spec)
    units = math.ceil(spec.K / spec.eps - 1e-12)
    models = []
    for k in range(1, min(spec.K, len(vertices)) + 1):
        for support in itertools.combinations(range(len(vertices)), k):
            for cuts in itertools.combinations(range(1, units), k - 1):
                bounds = (0,) + cuts + (units,)
                counts = [bounds[i + 1] - bounds[i] for i in range(k)]
                atoms = [(vertices[c], counts[i] / units)
                         for i, c in enumerate(support)]
                models.append(TypeDistribution(atoms))
    return ModelClass(models)


def build_layered_class(d: int, horizon: int, eps: float | None = None,
                        layers: int | None = None,
                        theta_box=None,
                        size_cap: int = DEFAULT_SIZE_CAP) -> ModelClass:
    """Union of cube covers with doubling support sizes and a layered prior.

    Layer i covers support sizes up to 2^i at Levy accuracy eps^2/2; the raw
    prior weight of a layer-i model is (2^i * |layer i|)^-1. Duplicates
    across layers keep their largest raw weight (and that layer's index),
    then everything renormalizes. Defaults follow the horizon (eps = T^-2,
    layers = ceil(log2 T)) but are far too fine for desk-scale runs; pass
    explicit values for anything you actually want to enumerate.
    """
    if layers is None:
        layers = max(1, math.ceil(math.log2(max(horizon, 2))))
    if eps is None:
        eps = float(horizon) ** -2
    if layers < 1:
        raise PricingError("need at least one layer")
    accuracy = min(1.0, eps * eps / 2.0)
    kept: dict[tuple, tuple[TypeDistribution, float, int]] = {}
    for i in range(1, layers + 1):
        spec = CoverSpec(dim=d, K=2 ** i, eps=accuracy, theta_box=theta_box,
                         size_cap=size_cap)
        layer = build_cube_cover(spec)
        raw = 1.0 / (2 ** i * len(layer))
        for model in layer.models:
            key = _model_key(model)
            if key not in kept or raw > kept[key][1]:
                kept[key] = (model, raw, i)
    models = [m for m, _, _ in kept.values()]
    raw_weights = np.array([w for _, w, _ in kept.values()])
    layer_of = [i for _, _, i in kept.values()]
    return ModelClass(models, raw_weights / raw_weights.sum(), layer_of)


def levy_contextual_estimate(dist_a: TypeDistribution,
                             dist_b: TypeDistribution,
                             contexts, tol: float = 1e-9) -> float:
    """Max projected Levy distance over the given contexts.

    A lower bound on the sup over the whole sphere, useful as a diagnostic;
    cover correctness never relies on it.
    """
    contexts = list(contexts)
    if not contexts:
        raise PricingError("need at least one context")
    best = 0.0
    for u in contexts:
        d = levy_distance(project(dist_a, u), project(dist_b, u), tol)
        best = max(best, d)
    return best
