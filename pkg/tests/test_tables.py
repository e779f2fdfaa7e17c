"""Exact star tables, frozen from the package oracle and re-derived with tests/reference.py."""

import csv
import io

import pytest

import reference as ref
from instances import Instance
from spillover_lab.tables import Table, fmt, reproduce_table


def _star(n, outward):
    e = [(0, i) for i in range(1, n)]
    if not outward:
        e = [(i, 0) for _, i in e]
    coef = {(0, j, i): 1.0 for j, i in e}
    return Instance([n], [e], ("linear", 0.8, 2.0, coef, [[0.0] * n]), ("bernoulli", 0.6), ("bernoulli", 0.6)).reference()[0]


def reference_star_variances(outward):
    """(V_out, V_in, Vc_out, Vc_in) for 1000 stars of 10 and 1000 of 5, one cluster at a time."""
    n_out = n_in = 0
    acc = [0.0] * 4
    for n in (10, 5):
        c = _star(n, outward)
        no, ni = ref.counts([c])
        n_out += 1000 * no
        n_in += 1000 * ni
        (_, v_o), (_, v_i) = ref.joint_moments([c])
        vc_o, vc_i = ref.conservative_variances([c])
        for pos, x in enumerate((v_o * no**2, v_i * ni**2, vc_o * no**2, vc_i * ni**2)):
            acc[pos] += 1000 * x
    return acc[0] / n_out**2, acc[1] / n_in**2, acc[2] / n_out**2, acc[3] / n_in**2


@pytest.fixture(scope="module")
def t1():
    return reproduce_table("T1")


@pytest.fixture(scope="module")
def t2():
    return reproduce_table("T2")


# values printed by the oracle at full precision, rounded to 6 significant digits
T1_FROZEN = {
    "n=10 (clusters 1-1000) H": (-2.83074e-9, 2.83074e-9),
    "n=10 (clusters 1-1000) E[W^2 Z B D]": (-3.48011e-6, 3.00625e-7),
    "n=10 (clusters 1-1000) E[W^2 (1-Z) B D]": (-2.35404e-6, 3.47615e-7),
    "n=10 (clusters 1-1000) (I)": (-0.00583416, 0.0525074),
    "n=5 (clusters 1001-2000) H": (9.70784e-9, -9.70784e-9),
    "n=5 (clusters 1001-2000) E[W^2 Z B D]": (2.39201e-6, -3.99963e-7),
    "n=5 (clusters 1001-2000) E[W^2 (1-Z) B D]": (1.64645e-6, -3.91226e-7),
    "n=5 (clusters 1001-2000) (II)": (0.00403846, -0.012659),
    "V^c_out - V^c_in": (-0.00179569, 0.0398484),
}

T2_FROZEN = {
    "(a)": (-0.00179569, 0.0026694),
    "(b)": (-7.39645e-5, -1.33547e-5),
    "(c)": (0.0, 8.73192e-5),
    "V_out - V_in": (-0.00172173, 0.00277007),
}


@pytest.mark.parametrize("row", list(T1_FROZEN))
def test_table1_frozen(t1, row):
    for col, want in zip(("outward_star", "inward_star"), T1_FROZEN[row]):
        assert t1.value(row, col) == pytest.approx(want, rel=1e-5)


@pytest.mark.parametrize("row", list(T2_FROZEN))
def test_table2_frozen(t2, row):
    for col, want in zip(("outward_star", "inward_star"), T2_FROZEN[row]):
        assert t2.value(row, col) == pytest.approx(want, rel=1e-5, abs=1e-15)


def test_table2_identity(t2):
    for col in ("outward_star", "inward_star"):
        assert abs(t2.value("(a)-(b)+(c)", col) - t2.value("V_out - V_in", col)) <= 1e-10


@pytest.mark.parametrize("outward, col", [(True, "outward_star"), (False, "inward_star")])
def test_star_tables_against_reference(t1, t2, outward, col):
    v_out, v_in, vc_out, vc_in = reference_star_variances(outward)
    assert t1.value("V^c_out - V^c_in", col) == pytest.approx(vc_out - vc_in, rel=1e-10)
    assert t2.value("V_out - V_in", col) == pytest.approx(v_out - v_in, rel=1e-10)


def test_csv_layout(t1):
    rows = list(csv.reader(io.StringIO(t1.to_csv())))
    assert rows[0] == ["row", "outward_star", "outward_star_reference", "inward_star", "inward_star_reference"]
    last = rows[-1]
    assert last[0] == "V^c_out - V^c_in"
    assert last[1] == "-0.00179569" and last[2] == "-0.0018"
    assert last[3] == "0.0398484" and last[4] == "0.0399"
    assert len(rows) == 1 + 9


def test_table_helpers():
    t = Table("TX", "demo", ["a"])
    t.add("r", [1.23456789], ["1.2"])
    t.add("s", [None])
    assert t.value("r", "a") == 1.23456789
    assert t.reference("r", "a") == "1.2"
    assert t.to_csv().splitlines()[1:] == ["r,1.23457,1.2", "s,,"]
    assert t.to_json()["rows"][0]["values"] == [1.23456789]
    with pytest.raises(KeyError):
        t.value("q", "a")
    assert fmt(0.1 + 0.2) == "0.3"
    assert fmt("x") == "x"


def test_unknown_table():
    with pytest.raises(ValueError):
        reproduce_table("T9")
