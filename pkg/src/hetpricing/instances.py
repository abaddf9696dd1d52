"""Hard-instance families and context/type generators.

The equal-revenue family puts every atom of the base distribution at the
same expected revenue of 1/2, so no price reveals anything until a small
perturbation quietly favors one atom; tensoring perturbed copies across
coordinates yields d-dimensional instances whose marginals are the
one-dimensional ones. These are the families any learner provably struggles
against, which makes them the canonical stress instances for the harness.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .pricing import Context, PricingError, TypeDistribution, ValueDistribution

NEGLIGIBLE_MASS = 1e-9  # third-atom mass in the small-support variant


def lb_values(K: int) -> list[float]:
    """Atom locations v_i = 1/2 + (i-1)/(4K - 2i - 2); v_1 = 1/2, v_K = 1."""
    if K < 4:
        raise PricingError("the equal-revenue family needs K >= 4")
    return [0.5 + (i - 1) / (4 * K - 2 * i - 2) for i in range(1, K + 1)]


def lb_values_exact(K: int) -> list[Fraction]:
    """Rational twin of lb_values, for exactness checks."""
    if K < 4:
        raise PricingError("the equal-revenue family needs K >= 4")
    return [Fraction(1, 2) + Fraction(i - 1, 4 * K - 2 * i - 2)
            for i in range(1, K + 1)]


def _base_weights(K: int) -> list[float]:
    return [1.0 / (2 * K - 2)] * (K - 1) + [0.5]


def lb_base(K: int) -> ValueDistribution:
    """Base instance: every atom earns expected revenue exactly 1/2."""
    return ValueDistribution(zip(lb_values(K), _base_weights(K)))


def lb_perturbed(K: int, j: int, eps: float) -> ValueDistribution:
    """Move eps of mass from atom j-1 to atom j; atom j then leads by eps*v_j.

    eps = 0 degenerates to the base instance.
    """
    if not 2 <= j <= K - 1:
        raise PricingError("j must lie in [2, K-1]")
    if not 0.0 <= eps <= 1.0 / (2 * K - 2):
        raise PricingError("eps must lie in [0, 1/(2K-2)]")
    weights = _base_weights(K)
    weights[j - 2] -= eps
    weights[j - 1] += eps
    # at eps = 1/(2K-2) exactly, atom j-1 vanishes
    return ValueDistribution((v, w) for v, w in zip(lb_values(K), weights)
                             if w > 0.0)


def lb_small(K: int, sign: int, eps: float) -> ValueDistribution:
    """Two-atom variant for K in {2,3}: v = (1/4, 1/2), masses 1/2 -+ eps.

    The revenue at 1/2 becomes 1/4 + sign*eps/2 while 1/4 stays at 1/4.
    K = 3 adds negligible mass at value 0 and rescales the rest.
    """
    if K not in (2, 3):
        raise PricingError("the small-support variant covers K in {2,3}")
    if sign not in (1, -1):
        raise PricingError("sign must be +1 or -1")
    if not 0.0 <= eps < 0.5:
        raise PricingError("eps must lie in [0, 1/2)")
    atoms = [(0.25, 0.5 - sign * eps), (0.5, 0.5 + sign * eps)]
    if K == 3:
        scale = 1.0 - NEGLIGIBLE_MASS
        atoms = [(0.0, NEGLIGIBLE_MASS)] + [(v, w * scale) for v, w in atoms]
    return ValueDistribution(atoms)


def _tensor_permutation(K: int, j: int) -> list[int]:
    """Value index given to each atom along one coordinate (1-based maps).

    Atom 1 takes value j-1, atom 2 takes value j, atom K keeps value K; for
    j >= 4 the two swaps are disjoint, and j = 3 needs the 3-cycle
    1 -> 2 -> 3 -> 1 instead.
    """
    perm = list(range(1, K + 1))
    if j == 2:
        return perm
    if j == 3:
        perm[0], perm[1], perm[2] = 2, 3, 1
        return perm
    perm[0], perm[j - 2] = perm[j - 2], perm[0]
    perm[1], perm[j - 1] = perm[j - 1], perm[1]
    return perm


def lb_tensor(K: int, d: int, j, eps: float) -> TypeDistribution:
    """Tensored instance whose marginal along axis l equals lb_perturbed(K, j_l).

    Atom i has weight w~_i (the perturbed weights indexed by position, not
    value) and coordinate l equal to v_{sigma_l(i)}, where sigma_l routes the
    lightened weight to value j_l - 1 and the boosted one to value j_l.
    """
    j = list(j)
    if len(j) != d:
        raise PricingError("need one j per coordinate")
    if K < 4:
        raise PricingError("tensoring needs K >= 4")
    if not 0.0 <= eps <= 1.0 / (2 * K - 2):
        raise PricingError("eps must lie in [0, 1/(2K-2)]")
    for jl in j:
        if not 2 <= jl <= K - 1:
            raise PricingError("each j_l must lie in [2, K-1]")
    values = lb_values(K)
    weights = _base_weights(K)
    weights[0] -= eps
    weights[1] += eps
    perms = [_tensor_permutation(K, jl) for jl in j]
    atoms = []
    for i in range(1, K + 1):
        if weights[i - 1] <= 0.0:
            continue  # atom 1 vanishes at the largest eps
        theta = [values[perms[axis][i - 1] - 1] for axis in range(d)]
        atoms.append((theta, weights[i - 1]))
    return TypeDistribution(atoms)


def value_dist_as_types(q: ValueDistribution) -> TypeDistribution:
    """Embed a valuation distribution as 1-d types (valuation = type)."""
    return TypeDistribution(((v,), w) for v, w in q.atoms)


@dataclass(frozen=True)
class InstanceSpec:
    """Deterministic recipe for a true type distribution."""

    kind: str
    K: int | None = None
    j: tuple | None = None
    eps: float | None = None
    d: int | None = None
    sign: int | None = None
    dist: TypeDistribution | None = None

    def build(self) -> TypeDistribution:
        if self.kind == "custom":
            if self.dist is None:
                raise PricingError("custom instance needs a distribution")
            return self.dist
        if self.kind == "lb_base":
            return value_dist_as_types(lb_base(self.K))
        if self.kind == "lb_perturbed":
            return value_dist_as_types(lb_perturbed(self.K, int(self.j[0]),
                                                    self.eps))
        if self.kind == "lb_small":
            return value_dist_as_types(lb_small(self.K, self.sign, self.eps))
        if self.kind == "lb_tensor":
            return lb_tensor(self.K, self.d, self.j, self.eps)
        raise PricingError(f"unknown instance kind {self.kind!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "InstanceSpec":
        kind = obj["kind"]
        if kind == "custom":
            return cls(kind="custom",
                       dist=TypeDistribution.from_json(obj["dist"]))
        sign = obj.get("sign")
        if isinstance(sign, str):
            sign = 1 if sign in ("+", "+1") else -1
        j = obj.get("j")
        if isinstance(j, (int, float)):
            j = (int(j),)
        elif j is not None:
            j = tuple(int(x) for x in j)
        return cls(kind=kind, K=obj.get("K"), j=j, eps=obj.get("eps"),
                   d=obj.get("d"), sign=sign)

    def to_json(self) -> dict:
        if self.kind == "custom":
            return {"kind": "custom", "dist": self.dist.to_json()}
        out = {"kind": self.kind}
        for name in ("K", "eps", "d", "sign"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.j is not None:
            out["j"] = list(self.j)
        return out


@dataclass(frozen=True)
class AdversarySpec:
    """Context process: fixed, i.i.d. basis/sphere, round robin, or scripted."""

    kind: str
    u: tuple | None = None
    contexts: tuple | None = None
    wrap: bool = True

    @classmethod
    def fixed(cls, u) -> "AdversarySpec":
        return cls(kind="fixed", u=tuple(float(x) for x in u))

    @classmethod
    def from_json(cls, obj: dict) -> "AdversarySpec":
        kind = obj["kind"]
        u = tuple(obj["u"]) if "u" in obj else None
        ctxs = obj.get("contexts")
        if ctxs is not None:
            ctxs = tuple(tuple(float(x) for x in c) for c in ctxs)
        return cls(kind=kind, u=u, contexts=ctxs, wrap=obj.get("wrap", True))

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.u is not None:
            out["u"] = list(self.u)
        if self.contexts is not None:
            out["contexts"] = [list(c) for c in self.contexts]
        if self.kind == "scripted":
            out["wrap"] = self.wrap
        return out

    def context_dim(self, instance_dim: int) -> int:
        if self.kind == "fixed":
            return len(self.u)
        if self.kind in ("round_robin", "scripted"):
            return len(self.contexts[0])
        return instance_dim


def next_context(adv: AdversarySpec, t: int, d: int, rng) -> tuple[np.ndarray, int]:
    """Context for 1-based round t, plus a small id for traces.

    Ids: basis contexts report the coordinate, list-driven kinds the list
    position, a fixed context 0, and sphere draws -1 (the vector itself is
    reproducible from the seed).
    """
    if adv.kind == "fixed":
        return np.asarray(adv.u, dtype=float), 0
    if adv.kind == "iid_basis":
        ell = int(rng.integers(d))
        e = np.zeros(d)
        e[ell] = 1.0
        return e, ell
    if adv.kind == "iid_sphere":
        return positive_sphere_vector(d, rng), -1
    if adv.kind == "round_robin":
        i = (t - 1) % len(adv.contexts)
        return np.asarray(adv.contexts[i], dtype=float), i
    if adv.kind == "scripted":
        i = t - 1
        if i >= len(adv.contexts):
            if not adv.wrap:
                raise PricingError("scripted context list exhausted")
            i %= len(adv.contexts)
        return np.asarray(adv.contexts[i], dtype=float), i
    raise PricingError(f"unknown adversary kind {adv.kind!r}")


def positive_sphere_vector(d: int, rng) -> np.ndarray:
    """Unit vector in the positive orthant (|gaussian| renormalized)."""
    while True:
        g = np.abs(rng.standard_normal(d))
        nrm = float(np.linalg.norm(g))
        if nrm > 1e-12:
            return g / nrm


def type_index_from_uniform(dist: TypeDistribution, u01: float) -> int:
    """Inverse-CDF atom index for a uniform draw in [0,1)."""
    cum = np.cumsum(dist.weights)
    idx = int(np.searchsorted(cum, u01, side="right"))
    return min(idx, len(cum) - 1)


def sample_type(dist: TypeDistribution, rng) -> np.ndarray:
    """Draw one type vector; one uniform consumed per call."""
    return dist.thetas[type_index_from_uniform(dist, rng.random())]


def validate_instance_context(dist: TypeDistribution, u) -> None:
    """All atom valuations along u must land in [0,1] (checked up front)."""
    vec = u.u if isinstance(u, Context) else np.asarray(u, dtype=float)
    vals = dist.thetas @ vec
    if np.any(vals < -1e-9) or np.any(vals > 1.0 + 1e-9):
        raise PricingError("instance and context are incompatible: "
                           "a valuation leaves [0,1]")
