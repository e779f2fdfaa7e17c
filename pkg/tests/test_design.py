import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spillover_lab.design import (
    Bernoulli,
    DesignError,
    Tabulated,
    TwoStage,
    all_vectors,
    codes_of,
    design_from_config,
    verify_overlap,
)
from spillover_lab.network import build_network
from spillover_lab.rng import CounterStream


def _net(*sizes):
    return build_network({"clusters": [{"n": n, "edges": [[1, 2]]} for n in sizes]})


def test_vector_codes_round_trip():
    Z = all_vectors(3)
    assert Z.shape == (8, 3)
    assert Z[5].tolist() == [1, 0, 1]
    assert codes_of(Z).tolist() == list(range(8))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(1, 6))
def test_bernoulli_probabilities_by_hand(p, n):
    d = Bernoulli(p)
    Z = all_vectors(n)
    full = d.batch_full(0, Z)
    for z, got in zip(Z, full):
        want = math.prod(p if v else 1 - p for v in z)
        assert got == pytest.approx(want, rel=1e-12)
    assert math.fsum(full) == pytest.approx(1.0, abs=1e-12)
    loo = d.batch_excluding(0, Z)
    for z, row in zip(Z, loo):
        for j in range(n):
            want = math.prod(p if v else 1 - p for t, v in enumerate(z) if t != j)
            assert row[j] == pytest.approx(want, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.integers(1, 5))
def test_two_stage_mixture(nu, phi, psi, n):
    d = TwoStage(nu, phi, psi)
    Z = all_vectors(n)

    def law(z, skip=None):
        a = math.prod(phi if v else 1 - phi for t, v in enumerate(z) if t != skip)
        b = math.prod(psi if v else 1 - psi for t, v in enumerate(z) if t != skip)
        return nu * a + (1 - nu) * b

    for z, got, row in zip(Z, d.batch_full(0, Z), d.batch_excluding(0, Z)):
        assert got == pytest.approx(law(z), rel=1e-12, abs=1e-15)
        for j in range(n):
            assert row[j] == pytest.approx(law(z, j), rel=1e-12, abs=1e-15)
    assert d.marginals(0, n) == pytest.approx([nu * phi + (1 - nu) * psi] * n)


def test_tabulated_point_and_leave_one_out():
    d = Tabulated.from_pairs([((1, 0), 0.25), ((0, 1), 0.75)])
    Z = all_vectors(2)
    assert d.batch_full(0, Z).tolist() == [0.0, 0.25, 0.75, 0.0]
    # z = (1, 0): summing out unit 0 gives P(*, 0) = 0.25; summing out unit 1 gives P(1, *) = 0.25
    assert d.batch_excluding(0, Z)[1].tolist() == [0.25, 0.25]
    assert d.marginals(0, 2).tolist() == [0.25, 0.75]
    assert not d.full_support(0, 2)


def test_tabulated_validation():
    with pytest.raises(DesignError, match="sum"):
        Tabulated.from_pairs([((1,), 0.5)])
    with pytest.raises(DesignError, match="binary"):
        Tabulated.from_pairs([((2,), 1.0)])
    with pytest.raises(DesignError):
        Tabulated()
    d = Tabulated.from_pairs([((1, 1), 1.0)])
    with pytest.raises(DesignError, match="size"):
        d.batch_full(0, all_vectors(3))


@pytest.mark.parametrize("bad", [-0.1, 1.5, float("nan")])
def test_probability_range_checked(bad):
    with pytest.raises(DesignError):
        Bernoulli(bad)


def test_design_from_config():
    assert design_from_config({"type": "bernoulli", "p": 0.3}) == Bernoulli(0.3)
    assert design_from_config({"type": "two_stage", "nu": 0.5, "phi": 0.2, "psi": 0.7}) == TwoStage(0.5, 0.2, 0.7)
    t = design_from_config({"type": "tabulated", "per_cluster": {"2": [[[1, 0], 1.0]]}, "mass": [[[0], 1.0]]})
    assert t.overrides[1] == {(1, 0): 1.0}
    with pytest.raises(DesignError):
        design_from_config({"type": "cluster"})


def test_draw_frequencies_match_marginals():
    net = build_network({"clusters": [{"n": 4, "edges": [[1, 2]], "repeat": 500}]})
    for d in (Bernoulli(0.3), TwoStage(0.5, 0.1, 0.9)):
        draws = np.stack([d.draw(net, CounterStream(7, r)) for r in range(40)])
        assert abs(draws.mean() - d.marginals(0, 4)[0]) < 0.01
    t = Tabulated.from_pairs([((1, 0, 0, 0), 0.5), ((0, 1, 1, 0), 0.5)])
    z = t.draw(net, CounterStream(1, 0)).reshape(-1, 4)
    assert {tuple(r) for r in z.tolist()} == {(1, 0, 0, 0), (0, 1, 1, 0)}
    assert abs(z[:, 0].mean() - 0.5) < 0.07


def test_two_stage_draw_shares_saturation_within_cluster():
    net = build_network({"clusters": [{"n": 6, "edges": [[1, 2]], "repeat": 300}]})
    z = TwoStage(0.5, 0.0, 1.0).draw(net, CounterStream(3, 0)).reshape(-1, 6)
    assert set(z.sum(axis=1).tolist()) <= {0, 6}


def test_overlap_checks():
    net = _net(3, 3)
    ok = verify_overlap(Bernoulli(0.5), Bernoulli(0.2), net)
    assert ok.ok and ok.leave_one_out_ok
    point = Tabulated.from_pairs([((1, 0, 0), 1.0)])
    bad = verify_overlap(Bernoulli(0.5), point, net)
    assert not bad.ok and bad.violations
    # alpha concentrated on (1,0,0) is covered, but not both completions of unit 1
    loo = verify_overlap(point, point, net)
    assert loo.ok and not loo.leave_one_out_ok


# counter stream


def test_counter_stream_is_a_pure_function_of_coordinates():
    a = CounterStream(5, 2).uniforms(np.array([0, 1, 2]), np.array([3, 3, 3]))
    b = CounterStream(5, 2).uniforms(np.array([2, 1, 0]), np.array([3, 3, 3]))
    assert a.tolist() == b[::-1].tolist()
    assert not np.array_equal(a, CounterStream(5, 3).uniforms(np.array([0, 1, 2]), np.array([3, 3, 3])))
    assert not np.array_equal(a, CounterStream(6, 2).uniforms(np.array([0, 1, 2]), np.array([3, 3, 3])))


def test_counter_stream_uniformity():
    u = CounterStream(1, 0).uniforms(np.zeros(200_000, dtype=np.int64), np.arange(200_000))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.003
    hist = np.histogram(u, bins=10, range=(0, 1))[0]
    assert (np.abs(hist - 20_000) < 600).all()
    # neighbors are not correlated
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 0.01


def test_unit_and_cluster_lanes_differ():
    net = _net(2)
    s = CounterStream(9, 0)
    assert s.unit_uniforms(net)[0] != s.cluster_uniforms(net)[0]


def test_leave_one_out_consistent_with_full_law():
    # summing the full law over unit j recovers the leave-one-out law
    for d in (Bernoulli(0.3), TwoStage(0.4, 0.2, 0.7), Tabulated.from_pairs([((1, 0, 1), 0.6), ((0, 0, 0), 0.4)])):
        Z = all_vectors(3)
        full = dict(zip(map(tuple, Z.tolist()), d.batch_full(0, Z)))
        loo = d.batch_excluding(0, Z)
        for z, row in zip(Z.tolist(), loo):
            for j in range(3):
                pair = [tuple(z[:j] + [v] + z[j + 1 :]) for v in (0, 1)]
                assert row[j] == pytest.approx(full[pair[0]] + full[pair[1]], abs=1e-15)


def test_marginals_by_enumeration():
    d = TwoStage(0.3, 0.8, 0.1)
    Z = all_vectors(4)
    p = d.batch_full(0, Z)
    assert (Z.T @ p) == pytest.approx(d.marginals(0, 4))
    assert list(itertools.islice(d.signature(0), 1)) == ["two_stage"]
