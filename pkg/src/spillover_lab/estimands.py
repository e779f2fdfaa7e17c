"""Exact spillover estimands and the diagnostics that compare them.

Everything here is computed from the per-cluster matrix of pairwise effects
``T[j, i] = Ybar_i(Z_j = 1) - Ybar_i(Z_j = 0)``, where the mean marginalises
the rest of the cluster under the hypothetical design. Linear models have a
closed form; other models go through the enumeration oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .design import AssignmentDesign
from .network import ClusteredNetwork, EligibleSets, eligible_sets
from .oracle import DEFAULT_CAP, alpha_mean_outcomes
from .outcomes import LinearOutcomeModel, OutcomeModel

EFFECT_TOL = 1e-10
GAP_TOL = 1e-12


class EstimandError(ValueError):
    """An estimand is undefined for this network."""


def mean_outcome_matrices(
    net: ClusteredNetwork, model: OutcomeModel, alpha: AssignmentDesign, k: int, cap: int = DEFAULT_CAP
) -> tuple[np.ndarray, np.ndarray]:
    """(M1, M0) with Mz[j, i] = Ybar_i(Z_j = z) for cluster k."""
    c = net[k]
    if isinstance(model, LinearOutcomeModel) and not alpha.needs_enumeration(k):
        pi = alpha.marginals(k, c.size)
        C = model.coefficient_matrix(k)
        base = model.beta0 + model.beta1 * pi + pi @ C + model.cluster_noise(k)
        m = np.tile(base, (c.size, 1))
        # unit j fixed at z: swap its marginal contribution for z
        rows = np.arange(c.size)
        m1 = m + C * (1.0 - pi)[:, None]
        m0 = m - C * pi[:, None]
        m1[rows, rows] += model.beta1 * (1.0 - pi)
        m0[rows, rows] -= model.beta1 * pi
        return m1, m0
    return alpha_mean_outcomes(c, model, alpha, cap)


def mean_potential_outcome(net, model, alpha, i: tuple[int, int], j: tuple[int, int], z: int, cap: int = DEFAULT_CAP) -> float:
    """Ybar_i(Z_j = z) for units i = (k, a) and j = (k, b) of the same cluster."""
    (ki, a), (kj, b) = i, j
    if ki != kj:
        raise EstimandError("units lie in different clusters")
    m1, m0 = mean_outcome_matrices(net, model, alpha, ki, cap)
    return float((m1 if z else m0)[b, a])


def pairwise_matrix(net, model, alpha, k: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """T[j, i] = effect of j's treatment on i's mean outcome."""
    c = net[k]
    if isinstance(model, LinearOutcomeModel):
        # the effect of one treatment on a linear outcome does not depend on the rest
        T = model.coefficient_matrix(k)
        T[np.arange(c.size), np.arange(c.size)] = model.beta1
        return T
    m1, m0 = mean_outcome_matrices(net, model, alpha, k, cap)
    return m1 - m0


def pairwise_spillover(net, model, alpha, i: tuple[int, int], j: tuple[int, int], cap: int = DEFAULT_CAP) -> float:
    (ki, a), (kj, b) = i, j
    if ki != kj:
        raise EstimandError("units lie in different clusters")
    if a == b:
        raise EstimandError("a unit's effect on itself is not a spillover")
    return float(pairwise_matrix(net, model, alpha, ki, cap)[b, a])


def _pairwise_all(net, model, alpha, cap) -> list[np.ndarray]:
    return [pairwise_matrix(net, model, alpha, c.index, cap) for c in net]


def _outward_terms(net, T, sets: EligibleSets) -> dict[tuple[int, int], float]:
    out = {}
    for c, Tk, snd in zip(net, T, sets.senders):
        for j in snd:
            nbrs = c.out_adj[j]
            out[(c.index, int(j))] = math.fsum(Tk[j, i] for i in nbrs) / len(nbrs)
    return out


def _inward_terms(net, T, sets: EligibleSets) -> dict[tuple[int, int], float]:
    out = {}
    for pos, (c, Tk, rcv) in enumerate(zip(net, T, sets.receivers)):
        is_x = None if sets.label is None else [lab == sets.label for lab in c.covariates]
        for i in rcv:
            srcs = [j for j in c.in_adj[i] if is_x is None or is_x[j]]
            out[(c.index, int(i))] = math.fsum(Tk[j, i] for j in srcs) / len(srcs)
    return out


def outward_spillover(net, model, alpha, cap: int = DEFAULT_CAP, *, pairwise=None):
    """(tau_out, {(k, j): per-sender average effect on its out-neighbors})."""
    sets = eligible_sets(net)
    if sets.n_out == 0:
        raise EstimandError("no unit has an out-neighbor")
    T = pairwise if pairwise is not None else _pairwise_all(net, model, alpha, cap)
    per = _outward_terms(net, T, sets)
    return math.fsum(per.values()) / sets.n_out, per


def inward_spillover(net, model, alpha, cap: int = DEFAULT_CAP, *, pairwise=None):
    """(tau_in, {(k, i): per-receiver average effect from its in-neighbors})."""
    sets = eligible_sets(net)
    if sets.n_in == 0:
        raise EstimandError("no unit has an in-neighbor")
    T = pairwise if pairwise is not None else _pairwise_all(net, model, alpha, cap)
    per = _inward_terms(net, T, sets)
    return math.fsum(per.values()) / sets.n_in, per


def inward_by_senders(net, model, alpha, cap: int = DEFAULT_CAP, *, pairwise=None) -> float:
    """The inward effect summed sender by sender with weights 1/(N_in |in-degree of i|)."""
    sets = eligible_sets(net)
    T = pairwise if pairwise is not None else _pairwise_all(net, model, alpha, cap)
    terms = [
        Tk[j, i] / (sets.n_in * len(c.in_adj[i]))
        for c, Tk, snd in zip(net, T, sets.senders)
        for j in snd
        for i in c.out_adj[j]
    ]
    return math.fsum(terms)


def conditional_spillovers(net, model, alpha, label: str, cap: int = DEFAULT_CAP, *, pairwise=None) -> tuple[float, float]:
    """(tau_out(x), tau_in(x)) restricted to senders carrying label x."""
    sets = eligible_sets(net, label)
    if sets.n_out == 0 or sets.n_in == 0:
        raise EstimandError(f"no sender or receiver for covariate value {label!r}")
    T = pairwise if pairwise is not None else _pairwise_all(net, model, alpha, cap)
    out = _outward_terms(net, T, sets)
    inn = _inward_terms(net, T, sets)
    return math.fsum(out.values()) / sets.n_out, math.fsum(inn.values()) / sets.n_in


@dataclass
class GapTerm:
    cluster: int
    sender: int
    receiver: int
    coefficient: float
    effect: float

    @property
    def contribution(self) -> float:
        return self.coefficient * self.effect


@dataclass
class GapReport:
    gap: float
    direct: float
    terms: list[GapTerm]

    @property
    def identity_error(self) -> float:
        return abs(self.gap - self.direct)


def equivalence_gap(net, model, alpha, label: str | None = None, cap: int = DEFAULT_CAP, *, pairwise=None) -> GapReport:
    """tau_out - tau_in written as a weighted sum over sender -> out-neighbor pairs.

    Each pair carries 1/(N_out |out(j)|) - 1/(N_in |in(i)|); with a label,
    counts are the conditional ones and in-degree counts only labelled
    in-neighbors. ``direct`` is the plain difference of the two estimands.
    """
    T = pairwise if pairwise is not None else _pairwise_all(net, model, alpha, cap)
    sets = eligible_sets(net, label)
    if sets.n_out == 0 or sets.n_in == 0:
        raise EstimandError("empty sender or receiver set")
    terms = []
    for pos, (c, Tk, snd) in enumerate(zip(net, T, sets.senders)):
        for j in snd:
            for i in c.out_adj[j]:
                d_in = len(c.in_adj[i]) if label is None else int(sets.in_counts[pos][i])
                coef = 1.0 / (sets.n_out * len(c.out_adj[j])) - 1.0 / (sets.n_in * d_in)
                terms.append(GapTerm(c.index, int(j), int(i), coef, float(Tk[j, i])))
    gap = math.fsum(t.contribution for t in terms)
    if label is None:
        direct = outward_spillover(net, model, alpha, cap, pairwise=T)[0] - inward_spillover(net, model, alpha, cap, pairwise=T)[0]
    else:
        o, i_ = conditional_spillovers(net, model, alpha, label, cap, pairwise=T)
        direct = o - i_
    return GapReport(gap=gap, direct=direct, terms=terms)


def _spread(values) -> float:
    values = list(values)
    return max(values) - min(values) if values else 0.0


def check_conditions(net, model, alpha, label: str | None = None, cap: int = DEFAULT_CAP, *, pairwise=None) -> dict[str, bool]:
    """Sufficient conditions for tau_out = tau_in (or their conditional versions).

    Graph-count conditions are checked exactly in integers; effect equalities
    to 1e-10.
    """
    T = pairwise if pairwise is not None else _pairwise_all(net, model, alpha, cap)
    sets = eligible_sets(net, label)
    per_cluster_effects = []
    for c, Tk, snd in zip(net, T, sets.senders):
        per_cluster_effects.append([Tk[j, i] for j in snd for i in c.out_adj[j]])
    everything = [v for vals in per_cluster_effects for v in vals]
    homogeneous_within = all(_spread(v) <= EFFECT_TOL for v in per_cluster_effects)
    homogeneous_global = bool(_spread(everything) <= EFFECT_TOL)

    if label is None:
        ratio = all(
            sets.n_out * len(c.out_adj[j]) == sets.n_in * len(c.in_adj[i])
            for c, snd in zip(net, sets.senders)
            for j in snd
            for i in c.out_adj[j]
        )
        undirected = all(c.is_symmetric for c in net)
        return {"cond1": undirected and homogeneous_within, "cond2": homogeneous_global, "cond3": ratio}

    # conditional versions
    cluster_ratio = all(
        snd.size * sets.n_in == rcv.size * sets.n_out for snd, rcv in zip(sets.senders, sets.receivers)
    )
    pair_ratio = all(
        sets.n_out * len(c.out_adj[j]) == sets.n_in * int(sets.in_counts[pos][i])
        for pos, (c, snd) in enumerate(zip(net, sets.senders))
        for j in snd
        for i in c.out_adj[j]
    )
    return {
        "cond4": homogeneous_within and cluster_ratio,
        "cond5": homogeneous_global,
        "cond6": pair_ratio,
    }


@dataclass
class EstimandReport:
    tau_out: float
    tau_in: float
    per_sender: dict[tuple[int, int], float]
    per_receiver: dict[tuple[int, int], float]
    pairwise: dict[tuple[int, int, int], float]
    mu_out: dict[tuple[int, int], tuple[float, float]]
    mu_in: dict[tuple[int, int], tuple[float, float]]
    gap: float
    gap_identity_error: float
    conditions: dict[str, bool]
    conditional: dict[str, dict[str, Any]] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        key2 = lambda kj: f"{kj[0] + 1}:{kj[1] + 1}"  # noqa: E731
        return {
            "tau_out": self.tau_out,
            "tau_in": self.tau_in,
            "gap": self.gap,
            "gap_identity_error": self.gap_identity_error,
            "conditions": self.conditions,
            "per_sender": {key2(k): v for k, v in self.per_sender.items()},
            "per_receiver": {key2(k): v for k, v in self.per_receiver.items()},
            "pairwise": {f"{k + 1}:{j + 1}->{i + 1}": v for (k, j, i), v in self.pairwise.items()},
            "mu_out": {key2(k): list(v) for k, v in self.mu_out.items()},
            "mu_in": {key2(k): list(v) for k, v in self.mu_in.items()},
            "conditional": self.conditional,
        }


def estimand_report(net, model, alpha, labels: list[str] | None = None, cap: int = DEFAULT_CAP) -> EstimandReport:
    T = _pairwise_all(net, model, alpha, cap)
    tau_out, per_s = outward_spillover(net, model, alpha, cap, pairwise=T)
    tau_in, per_r = inward_spillover(net, model, alpha, cap, pairwise=T)
    gap = equivalence_gap(net, model, alpha, cap=cap, pairwise=T)
    pw = {(c.index, j, i): float(T[c.index][j, i]) for c in net for j, i in c.edges}
    mu_out, mu_in = {}, {}
    for c in net:
        m1, m0 = mean_outcome_matrices(net, model, alpha, c.index, cap)
        for j in c.senders:
            nb = list(c.out_adj[j])
            mu_out[(c.index, int(j))] = (float(np.mean(m1[j, nb])), float(np.mean(m0[j, nb])))
        for i in c.receivers:
            src = list(c.in_adj[i])
            mu_in[(c.index, int(i))] = (float(np.mean(m1[src, i])), float(np.mean(m0[src, i])))
    cond = {}
    for lab in labels or []:
        o, i_ = conditional_spillovers(net, model, alpha, lab, cap, pairwise=T)
        g = equivalence_gap(net, model, alpha, lab, cap, pairwise=T)
        cond[lab] = {
            "tau_out": o,
            "tau_in": i_,
            "gap": g.gap,
            "conditions": check_conditions(net, model, alpha, lab, cap, pairwise=T),
        }
    return EstimandReport(
        tau_out=tau_out,
        tau_in=tau_in,
        per_sender=per_s,
        per_receiver=per_r,
        pairwise=pw,
        mu_out=mu_out,
        mu_in=mu_in,
        gap=gap.gap,
        gap_identity_error=gap.identity_error,
        conditions=check_conditions(net, model, alpha, cap=cap, pairwise=T),
        conditional=cond,
    )
