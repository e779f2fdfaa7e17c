"""Small hand-solvable networks with exact answers.

All use linear outcomes with zero intercept and no direct effect, so a
pairwise effect equals its edge coefficient and every target below can be
checked by hand. Designs are Bernoulli(1/2) throughout.
"""

from fractions import Fraction as F

from instances import Instance

HALF = ("bernoulli", 0.5)


def _linear(sizes, edges, coef, labels=None, undirected=False):
    noise = [[0.0] * n for n in sizes]
    return Instance(sizes, edges, ("linear", 0.0, 0.0, coef, noise), HALF, HALF, labels, undirected)


def two_way_star():
    """Center points at four leaves with effect +1; leaves point back with -1."""
    edges = [(0, j) for j in range(1, 5)] + [(j, 0) for j in range(1, 5)]
    coef = {(0, 0, j): 1.0 for j in range(1, 5)} | {(0, j, 0): -1.0 for j in range(1, 5)}
    return _linear([5], [edges], coef)


def four_cycle_both_ways():
    pairs = [(0, 1, 1), (1, 0, 2), (2, 1, 3), (1, 2, 4), (3, 2, 5), (2, 3, 6), (0, 3, 7), (3, 0, 8)]
    return _linear([4], [[(j, i) for j, i, _ in pairs]], {(0, j, i): float(c) for j, i, c in pairs})


def labelled_four():
    edges = [(0, 1), (1, 0), (1, 2), (3, 1)]
    coef = {(0, 1, 0): 3.0, (0, 1, 2): 3.0, (0, 0, 1): 10.0, (0, 3, 1): 10.0}
    return _linear([4], [edges], coef, [["x", "x", "y", "y"]])


def two_undirected_stars():
    edges = [(0, j) for j in range(1, 5)]
    coef = {}
    for k, c in enumerate((1.0, 2.0)):
        for j, i in edges:
            coef[(k, j, i)] = coef[(k, i, j)] = c
    return _linear([5, 5], [edges, edges], coef, undirected=True)


def shared_effect_two_clusters():
    e0 = [(0, 1), (0, 4), (0, 3), (2, 0), (4, 0), (3, 0)]
    e1 = [(0, j) for j in range(1, 5)]
    coef = {(k, j, i): 1.0 for k, e in enumerate((e0, e1)) for j, i in e}
    return _linear([5, 5], [e0, e1], coef)


def six_unit_bipartite():
    pairs = [(0, 1, 1.0), (0, 2, 7.0), (3, 1, -3.0), (3, 5, 2.5), (4, 2, 11.0), (4, 5, 4.0)]
    return _linear([6], [[(j, i) for j, i, _ in pairs]], {(0, j, i): c for j, i, c in pairs})


def labelled_pairs():
    """Two copies; F senders carry effect 1 in the first, 2 in the second."""
    edges = [(0, 3), (1, 3), (2, 4), (2, 5)]
    coef = {(k, j, i): float(k + 1) for k in range(2) for j, i in edges}
    labels = [["F", "F", "F", "M", "M", "M"]] * 2
    return _linear([6, 6], [edges, edges], coef, labels)


def opposite_label_stars():
    """Undirected 10-stars; label F pushes +1, label M pushes -1, centers differ."""
    edges = [(0, j) for j in range(1, 10)]
    lab1 = ["F"] + ["M"] * 9
    lab2 = ["M"] + ["F"] * 9
    coef = {}
    for k, lab in enumerate((lab1, lab2)):
        for j, i in edges:
            coef[(k, j, i)] = 1.0 if lab[j] == "F" else -1.0
            coef[(k, i, j)] = 1.0 if lab[i] == "F" else -1.0
    return _linear([10, 10], [edges, edges], coef, [lab1, lab2], undirected=True)


def two_senders_two_receivers():
    pairs = [(0, 1, 3.0), (3, 1, 4.0), (0, 2, 10.0), (3, 2, 8.0)]
    return _linear([4], [[(j, i) for j, i, _ in pairs]], {(0, j, i): c for j, i, c in pairs}, [["F", "M", "M", "F"]])


# (name, builder, label or None, expected tau_out, expected tau_in)
EXACT = [
    ("two_way_star", two_way_star, None, F(-3, 5), F(3, 5)),
    ("four_cycle_both_ways", four_cycle_both_ways, None, F(9, 2), F(9, 2)),
    ("labelled_four", labelled_four, None, F(23, 3), F(16, 3)),
    ("labelled_four | x", labelled_four, "x", F(13, 2), F(16, 3)),
    ("two_undirected_stars", two_undirected_stars, None, F(3, 2), F(3, 2)),
    ("shared_effect_two_clusters", shared_effect_two_clusters, None, F(1), F(1)),
    ("six_unit_bipartite", six_unit_bipartite, None, F(15, 4), F(15, 4)),
    ("labelled_pairs | F", labelled_pairs, "F", F(3, 2), F(3, 2)),
    ("opposite_label_stars", opposite_label_stars, None, F(0), F(0)),
    ("opposite_label_stars | F", opposite_label_stars, "F", F(1), F(1)),
    ("opposite_label_stars | M", opposite_label_stars, "M", F(-1), F(-1)),
    ("two_senders_two_receivers | F", two_senders_two_receivers, "F", F(25, 4), F(25, 4)),
]
