import numpy as np
import pytest

from spillover_lab import oracle
from spillover_lab.design import Bernoulli, Tabulated
from spillover_lab.network import build_network
from spillover_lab.outcomes import make_linear_from_scenario


def _setup(groups=((4, 3), (3, 2))):
    spec = {"clusters": [{"n": n, "edges": [[1, i] for i in range(2, n + 1)] + [[2, 1]], "repeat": r} for n, r in groups]}
    net = build_network(spec)
    m = make_linear_from_scenario(net, {"beta0": 0.3, "beta1": 1.0, "edge_coeff": {"default": 1.5}})
    return net, m


def test_expect_is_a_probability_weighted_sum():
    net, m = _setup()
    c = net[0]
    # E[sum of z] under Bernoulli(0.3) over 4 units
    got = oracle.expect(lambda Z, Y: Z.sum(axis=1), Bernoulli(0.3), c, m)
    assert got == pytest.approx(1.2, abs=1e-14)
    assert oracle.expect(lambda Z, Y: np.ones(len(Z)), Bernoulli(0.3), c, m) == pytest.approx(1.0, abs=1e-14)


def test_dedup_matches_fresh_enumeration():
    net, m = _setup()
    a, b = Bernoulli(0.6), Bernoulli(0.4)
    shared = oracle.network_moments(net, m, a, b)
    fresh = oracle.network_moments(net, m, a, b, dedup=False)
    assert shared[0] is shared[1]
    assert fresh[0] is not fresh[1]
    for x, y in zip(shared, fresh):
        assert np.array_equal(x.cross_v, y.cross_v)
        assert np.array_equal(x.mean_s, y.mean_s)


def test_dedup_respects_per_cluster_designs():
    net, m = _setup(((3, 2),))
    t = Tabulated(overrides={0: {(1, 0, 0): 0.5, (0, 1, 1): 0.5}, 1: {(1, 1, 1): 1.0}})
    ms = oracle.network_moments(net, m, t, Bernoulli(0.5))
    assert ms[0] is not ms[1]


def test_cap_is_enforced():
    net, m = _setup(((5, 1),))
    with pytest.raises(oracle.CapExceeded):
        oracle.network_moments(net, m, Bernoulli(0.5), Bernoulli(0.5), cap=4)
    with pytest.raises(oracle.CapExceeded):
        oracle.alpha_mean_outcomes(net[0], m, Bernoulli(0.5), cap=4)


def test_enumeration_rejects_broken_mass():
    net, m = _setup(((3, 1),))

    class Leaky(Bernoulli):
        def batch_full(self, k, Z):
            return super().batch_full(k, Z) * 0.9

    with pytest.raises(ValueError, match="sum"):
        oracle.ClusterEnumeration.build(net, 0, m, Leaky(0.5), Bernoulli(0.5))


def test_estimator_moments_rejects_unknown_name():
    net, m = _setup()
    with pytest.raises(ValueError):
        oracle.estimator_moments("hajek", net, m, Bernoulli(0.5), Bernoulli(0.5))


def test_mean_outcome_matrices_by_hand():
    # Y_2 = 1.5 z_1 + z_2 + 0.3; with Bernoulli(p) for the others, E[Y_2 | z_1 = 1] = 1.8 + p
    net, m = _setup(((2, 1),))
    m1, m0 = oracle.alpha_mean_outcomes(net[0], m, Bernoulli(0.2))
    assert m1[0, 1] == pytest.approx(1.8 + 0.2)
    assert m0[0, 1] == pytest.approx(0.3 + 0.2)
