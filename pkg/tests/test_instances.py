"""Hard-instance generators, adversaries, and type sampling."""

from fractions import Fraction

import numpy as np
import pytest

from hetpricing.instances import (AdversarySpec, InstanceSpec, lb_base,
                                  lb_perturbed, lb_small, lb_tensor,
                                  lb_values, lb_values_exact, next_context,
                                  positive_sphere_vector, sample_type,
                                  validate_instance_context)
from hetpricing.pricing import (PricingError, TypeDistribution,
                                best_response, demand, gap, revenue)


def exact_revenues(K):
    """Rational recomputation of atom revenues of the base instance."""
    values = lb_values_exact(K)
    weights = [Fraction(1, 2 * K - 2)] * (K - 1) + [Fraction(1, 2)]
    revs = []
    for i in range(K):
        dem = sum(weights[i:], Fraction(0))
        revs.append(values[i] * dem)
    return revs


def marginal(dist, axis):
    """Collect (value, weight) of one coordinate, merged and sorted."""
    acc = {}
    for theta, w in dist.atoms:
        acc[theta[axis]] = acc.get(theta[axis], 0.0) + w
    return sorted(acc.items())


class TestValues:
    def test_k4_values(self):
        expected = [0.5 + (i - 1) / (4 * 4 - 2 * i - 2) for i in range(1, 5)]
        assert lb_values(4) == pytest.approx(expected, abs=0.0)
        assert lb_values(4) == pytest.approx([0.5, 0.6, 0.75, 1.0], abs=1e-15)

    def test_endpoints_all_k(self):
        for K in range(4, 11):
            vals = lb_values(K)
            assert vals[0] == 0.5
            assert vals[-1] == 1.0
            assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_small_k_rejected(self):
        with pytest.raises(PricingError):
            lb_values(3)


class TestBaseInstance:
    def test_weights(self):
        q = lb_base(4)
        assert q.weights.tolist() == pytest.approx([1 / 6, 1 / 6, 1 / 6, 0.5],
                                                   abs=1e-15)

    def test_equal_revenue_rational(self):
        for K in range(4, 11):
            assert all(r == Fraction(1, 2) for r in exact_revenues(K))

    def test_equal_revenue_float(self):
        for K in range(4, 11):
            q = lb_base(K)
            for v in q.values.tolist():
                assert revenue(q, v) == pytest.approx(0.5, abs=1e-12)

    def test_demand_closed_form(self):
        for K in (4, 7, 10):
            q = lb_base(K)
            for i, v in enumerate(q.values.tolist(), start=1):
                assert demand(q, v) == pytest.approx(
                    (2 * K - i - 1) / (2 * K - 2), abs=1e-12)


class TestPerturbedInstance:
    def test_k4_weights_and_revenue(self):
        q = lb_perturbed(4, j=2, eps=0.1)
        assert q.weights.tolist() == pytest.approx(
            [1 / 6 - 0.1, 1 / 6 + 0.1, 1 / 6, 0.5], abs=1e-15)
        assert revenue(q, 0.6) == pytest.approx(0.5 + 0.1 * 0.6, abs=1e-12)
        assert revenue(q, 0.6) == pytest.approx(0.56, abs=1e-12)

    def test_eps_zero_is_base(self):
        q = lb_perturbed(5, j=3, eps=0.0)
        base = lb_base(5)
        assert np.array_equal(q.values, base.values)
        assert np.array_equal(q.weights, base.weights)

    def test_gaps_at_atoms(self):
        for K in (4, 6):
            for j in range(2, K):
                eps = 0.5 / (2 * K - 2)
                q = lb_perturbed(K, j, eps)
                vals = q.values.tolist()
                assert gap(q, vals[j - 1]) == pytest.approx(0.0, abs=1e-12)
                for i, v in enumerate(vals, start=1):
                    if i != j:
                        assert gap(q, v) == pytest.approx(eps * vals[j - 1],
                                                          abs=1e-12)
                        assert gap(q, v) >= eps / 2 - 1e-12

    def test_parameter_validation(self):
        with pytest.raises(PricingError):
            lb_perturbed(4, j=1, eps=0.1)
        with pytest.raises(PricingError):
            lb_perturbed(4, j=4, eps=0.1)
        with pytest.raises(PricingError):
            lb_perturbed(4, j=2, eps=0.2)  # above 1/(2K-2)


class TestSmallInstance:
    def test_plus_revenues(self):
        q = lb_small(2, sign=1, eps=0.1)
        assert revenue(q, 0.5) == pytest.approx(0.3, abs=1e-15)
        assert revenue(q, 0.25) == pytest.approx(0.25, abs=1e-15)

    def test_minus_revenues(self):
        q = lb_small(2, sign=-1, eps=0.1)
        assert revenue(q, 0.5) == pytest.approx(0.2, abs=1e-15)

    def test_three_types_negligible_mass(self):
        q = lb_small(3, sign=1, eps=0.1)
        assert len(q) == 3
        assert q.values[0] == 0.0
        assert q.weights[0] == pytest.approx(1e-9, abs=1e-18)
        assert best_response(q) == best_response(lb_small(2, sign=1, eps=0.1))

    def test_validation(self):
        with pytest.raises(PricingError):
            lb_small(4, sign=1, eps=0.1)
        with pytest.raises(PricingError):
            lb_small(2, sign=0, eps=0.1)


class TestTensorInstance:
    def test_one_dimensional_marginal_is_perturbed(self):
        d = lb_tensor(4, 1, j=(3,), eps=0.05)
        q = lb_perturbed(4, 3, 0.05)
        assert marginal(d, 0) == pytest.approx(
            [(v, w) for v, w in q.atoms], abs=1e-15)

    def test_two_dimensional_marginals(self):
        d = lb_tensor(4, 2, j=(2, 3), eps=0.05)
        for axis, jl in enumerate((2, 3)):
            expect = lb_perturbed(4, jl, 0.05).atoms
            got = marginal(d, axis)
            for (gv, gw), (ev, ew) in zip(got, expect):
                assert gv == pytest.approx(ev, abs=1e-12)
                assert gw == pytest.approx(ew, abs=1e-12)

    def test_eps_zero_marginals_are_base(self):
        d = lb_tensor(5, 3, j=(2, 3, 4), eps=0.0)
        base = lb_base(5).atoms
        for axis in range(3):
            got = marginal(d, axis)
            for (gv, gw), (ev, ew) in zip(got, base):
                assert gv == pytest.approx(ev, abs=1e-12)
                assert gw == pytest.approx(ew, abs=1e-12)

    def test_atom_count_and_support(self):
        d = lb_tensor(6, 3, j=(2, 4, 5), eps=0.02)
        assert d.support_size == 6
        vals = set(lb_values(6))
        assert all(set(t) <= vals for t, _ in d.atoms)

    def test_basis_contexts_compatible(self):
        d = lb_tensor(4, 2, j=(2, 3), eps=0.05)
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = 1.0
            validate_instance_context(d, e)


class TestAdversaries:
    def test_fixed(self):
        adv = AdversarySpec.fixed([1.0])
        rng = np.random.default_rng(0)
        for t in (1, 5, 9):
            u, cid = next_context(adv, t, 1, rng)
            assert u.tolist() == [1.0]
            assert cid == 0

    def test_iid_basis_frequencies(self):
        adv = AdversarySpec(kind="iid_basis")
        rng = np.random.default_rng(7)
        ids = [next_context(adv, t, 2, rng)[1] for t in range(100_000)]
        freq = np.bincount(ids, minlength=2) / len(ids)
        assert abs(freq[0] - 0.5) < 0.01
        assert abs(freq[1] - 0.5) < 0.01

    def test_round_robin_alternates(self):
        adv = AdversarySpec(kind="round_robin",
                            contexts=((1.0, 0.0), (0.0, 1.0)))
        rng = np.random.default_rng(0)
        us = [next_context(adv, t, 2, rng)[0].tolist() for t in (1, 2, 3, 4)]
        assert us == [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]

    def test_scripted_exhaustion(self):
        adv = AdversarySpec(kind="scripted", contexts=((1.0,),), wrap=False)
        rng = np.random.default_rng(0)
        next_context(adv, 1, 1, rng)
        with pytest.raises(PricingError):
            next_context(adv, 2, 1, rng)
        wrapping = AdversarySpec(kind="scripted", contexts=((1.0,),),
                                 wrap=True)
        assert next_context(wrapping, 5, 1, rng)[0].tolist() == [1.0]

    def test_positive_sphere(self):
        rng = np.random.default_rng(3)
        for d in (1, 2, 5):
            v = positive_sphere_vector(d, rng)
            assert np.all(v >= 0.0)
            assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)


class TestSampling:
    def test_single_atom(self):
        d = TypeDistribution([((0.4,), 1.0)])
        rng = np.random.default_rng(0)
        for _ in range(5):
            assert sample_type(d, rng).tolist() == [0.4]

    def test_frequencies(self):
        d = TypeDistribution([((0.2,), 0.25), ((0.8,), 0.75)])
        rng = np.random.default_rng(11)
        draws = np.array([sample_type(d, rng)[0] for _ in range(100_000)])
        assert abs(np.mean(draws == 0.2) - 0.25) < 0.01
        assert abs(np.mean(draws == 0.8) - 0.75) < 0.01

    def test_seeded_replay(self):
        d = TypeDistribution([((0.2,), 0.5), ((0.8,), 0.5)])
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(42)
            runs.append([float(sample_type(d, rng)[0]) for _ in range(200)])
        assert runs[0] == runs[1]


class TestInstanceSpec:
    def test_json_round_trip(self):
        for spec in (InstanceSpec(kind="lb_base", K=5),
                     InstanceSpec(kind="lb_perturbed", K=4, j=(2,), eps=0.05),
                     InstanceSpec(kind="lb_tensor", K=4, d=2, j=(2, 3),
                                  eps=0.05),
                     InstanceSpec(kind="lb_small", K=2, sign=1, eps=0.1)):
            again = InstanceSpec.from_json(spec.to_json())
            assert again.build().atoms == spec.build().atoms

    def test_custom_round_trip(self):
        dist = TypeDistribution([((0.3, 0.4), 1.0)])
        spec = InstanceSpec(kind="custom", dist=dist)
        again = InstanceSpec.from_json(spec.to_json())
        assert again.build().atoms == dist.atoms

    def test_sign_string_parsing(self):
        spec = InstanceSpec.from_json(
            {"kind": "lb_small", "K": 2, "sign": "+", "eps": 0.1})
        assert spec.sign == 1
