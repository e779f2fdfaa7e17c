"""Exact design expectations by enumerating every treatment vector of a cluster.

Clusters are independent, so network-level moments are sums of per-cluster
moments. Clusters that share a structural signature (graph, outcome model,
both designs) are enumerated once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .design import AssignmentDesign, all_vectors
from .network import Cluster, ClusteredNetwork
from .outcomes import OutcomeModel

DEFAULT_CAP = 20
CHUNK = 1 << 15
MASS_TOL = 1e-12


class CapExceeded(ValueError):
    """A cluster is too large to enumerate."""


def _check_cap(c: Cluster, cap: int) -> None:
    if c.size > cap:
        raise CapExceeded(f"cluster {c.index} has {c.size} units; enumeration cap is {cap}")


def _vectors(n: int, lo: int, hi: int) -> np.ndarray:
    codes = np.arange(lo, hi, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int8)


@dataclass
class ClusterEnumeration:
    """Every treatment vector of one cluster with its probabilities and outcomes."""

    k: int
    Z: np.ndarray
    p_beta: np.ndarray
    p_alpha: np.ndarray
    outcomes: np.ndarray

    @classmethod
    def build(cls, net: ClusteredNetwork, k: int, model: OutcomeModel, alpha: AssignmentDesign, beta: AssignmentDesign, cap: int = DEFAULT_CAP):
        c = net[k]
        _check_cap(c, cap)
        Z = all_vectors(c.size)
        out = cls(k, Z, beta.batch_full(k, Z), alpha.batch_full(k, Z), model.evaluate_batch(k, Z))
        for name, p in (("beta", out.p_beta), ("alpha", out.p_alpha)):
            if abs(math.fsum(p) - 1.0) > MASS_TOL:
                raise ValueError(f"{name} masses in cluster {k} sum to {math.fsum(p)!r}")
        return out


def expect(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    design: AssignmentDesign,
    cluster: Cluster,
    model: OutcomeModel,
    cap: int = DEFAULT_CAP,
) -> np.ndarray | float:
    """Sum over z_k of P(z_k) f(z_k), with ``f(Z, Y)`` vectorised over rows."""
    _check_cap(cluster, cap)
    n, k = cluster.size, cluster.index
    acc = None
    for lo in range(0, 1 << n, CHUNK):
        Z = _vectors(n, lo, min(1 << n, lo + CHUNK))
        vals = np.asarray(f(Z, model.evaluate_batch(k, Z)), dtype=float)
        part = np.tensordot(design.batch_full(k, Z), vals, axes=(0, 0))
        acc = part if acc is None else acc + part
    return float(acc) if np.ndim(acc) == 0 else acc


def alpha_mean_outcomes(cluster: Cluster, model: OutcomeModel, alpha: AssignmentDesign, cap: int = DEFAULT_CAP):
    """Matrices M1, M0 with Mz[j, i] = E over z_{-j} ~ alpha of Y_i(z_j = z, z_{-j})."""
    _check_cap(cluster, cap)
    n, k = cluster.size, cluster.index
    m1 = np.zeros((n, n))
    m0 = np.zeros((n, n))
    for lo in range(0, 1 << n, CHUNK):
        Z = _vectors(n, lo, min(1 << n, lo + CHUNK))
        Y = model.evaluate_batch(k, Z)
        loo = alpha.batch_excluding(k, Z)
        m1 += (loo * Z).T @ Y
        m0 += (loo * (1 - Z)).T @ Y
    return m1, m0


@dataclass
class ClusterMoments:
    """Exact per-sender moments of the weighted summands in one cluster.

    For sender j with weight W_j = P_alpha(Z_{-j}) / P_beta(Z):
    V_j = W_j (2 Z_j - 1) Ybar_j and S_j = W_j (2 Z_j - 1) Ytilde_j, where
    Ybar_j averages the out-neighbors' outcomes and Ytilde_j sums them with
    weights 1/in-degree. Arrays are indexed by position in ``senders``.
    """

    senders: np.ndarray
    mean_v: np.ndarray
    mean_s: np.ndarray
    cross_v: np.ndarray
    cross_s: np.ndarray
    v1_sq: np.ndarray
    v0_sq: np.ndarray
    s1_sq: np.ndarray
    s0_sq: np.ndarray
    # pieces for the ratio-estimator variance
    w2_t: np.ndarray
    w2_c: np.ndarray
    w2_t_ybar: np.ndarray
    w2_c_ybar: np.ndarray
    w2_t_ytil: np.ndarray
    w2_c_ytil: np.ndarray
    # alpha-marginalised outcomes: mean_y1[j, i] = Ybar_i(Z_j = 1)
    mean_y1: np.ndarray
    mean_y0: np.ndarray

    @property
    def cov_v(self) -> np.ndarray:
        return self.cross_v - np.outer(self.mean_v, self.mean_v)

    @property
    def cov_s(self) -> np.ndarray:
        return self.cross_s - np.outer(self.mean_s, self.mean_s)

    @property
    def block_var_v(self) -> float:
        return float(self.cov_v.sum())

    @property
    def block_var_s(self) -> float:
        return float(self.cov_s.sum())


def sender_matrices(c: Cluster) -> tuple[np.ndarray, np.ndarray]:
    """Maps outcome vectors to (Ybar_j) and (Ytilde_j) over the cluster's senders."""
    s = c.senders
    a_bar = np.zeros((c.size, s.size))
    a_til = np.zeros((c.size, s.size))
    for t, j in enumerate(s):
        for i in c.out_adj[j]:
            a_bar[i, t] = 1.0 / len(c.out_adj[j])
            a_til[i, t] = 1.0 / len(c.in_adj[i])
    return a_bar, a_til


def cluster_moments(
    net: ClusteredNetwork,
    k: int,
    model: OutcomeModel,
    alpha: AssignmentDesign,
    beta: AssignmentDesign,
    cap: int = DEFAULT_CAP,
) -> ClusterMoments:
    c = net[k]
    _check_cap(c, cap)
    n, s = c.size, c.senders
    ns = s.size
    a_bar, a_til = sender_matrices(c)
    z2 = lambda: np.zeros(ns)  # noqa: E731
    acc = {
        name: z2()
        for name in (
            "mean_v", "mean_s", "v1_sq", "v0_sq", "s1_sq", "s0_sq",
            "w2_t", "w2_c", "w2_t_ybar", "w2_c_ybar", "w2_t_ytil", "w2_c_ytil",
        )
    }
    cross_v = np.zeros((ns, ns))
    cross_s = np.zeros((ns, ns))
    mean_y1 = np.zeros((n, n))
    mean_y0 = np.zeros((n, n))
    mass_b = []
    mass_a = []
    for lo in range(0, 1 << n, CHUNK):
        Z = _vectors(n, lo, min(1 << n, lo + CHUNK))
        Y = model.evaluate_batch(k, Z)
        pb = beta.batch_full(k, Z)
        loo = alpha.batch_excluding(k, Z)
        mass_b.append(math.fsum(pb))
        mass_a.append(math.fsum(alpha.batch_full(k, Z)))
        mean_y1 += (loo * Z).T @ Y
        mean_y0 += (loo * (1 - Z)).T @ Y
        if ns == 0:
            continue
        zs = Z[:, s].astype(float)
        W = np.divide(loo[:, s], pb[:, None], out=np.zeros((Z.shape[0], ns)), where=pb[:, None] > 0)
        ybar = Y @ a_bar
        ytil = Y @ a_til
        sign = 2.0 * zs - 1.0
        V = W * sign * ybar
        S = W * sign * ytil
        w2 = W * W
        acc["mean_v"] += pb @ V
        acc["mean_s"] += pb @ S
        cross_v += V.T @ (V * pb[:, None])
        cross_s += S.T @ (S * pb[:, None])
        treated = w2 * zs
        control = w2 * (1.0 - zs)
        acc["v1_sq"] += pb @ (treated * ybar**2)
        acc["v0_sq"] += pb @ (control * ybar**2)
        acc["s1_sq"] += pb @ (treated * ytil**2)
        acc["s0_sq"] += pb @ (control * ytil**2)
        acc["w2_t"] += pb @ treated
        acc["w2_c"] += pb @ control
        acc["w2_t_ybar"] += pb @ (treated * ybar)
        acc["w2_c_ybar"] += pb @ (control * ybar)
        acc["w2_t_ytil"] += pb @ (treated * ytil)
        acc["w2_c_ytil"] += pb @ (control * ytil)
    for name, total in (("beta", math.fsum(mass_b)), ("alpha", math.fsum(mass_a))):
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"{name} masses in cluster {k} sum to {total!r}")
    return ClusterMoments(senders=s, cross_v=cross_v, cross_s=cross_s, mean_y1=mean_y1, mean_y0=mean_y0, **acc)


def _signature(net, k, model, alpha, beta):
    return (net[k].signature(), model.signature(k), alpha.signature(k), beta.signature(k))


def network_moments(
    net: ClusteredNetwork,
    model: OutcomeModel,
    alpha: AssignmentDesign,
    beta: AssignmentDesign,
    cap: int = DEFAULT_CAP,
    dedup: bool = True,
) -> list[ClusterMoments]:
    """Per-cluster moments for every cluster, sharing work across identical clusters."""
    for c in net:
        _check_cap(c, cap)
    cache: dict = {}
    out = []
    for c in net:
        key = _signature(net, c.index, model, alpha, beta) if dedup else c.index
        if key not in cache:
            cache[key] = cluster_moments(net, c.index, model, alpha, beta, cap)
        out.append(cache[key])
    return out


def iter_enumerations(net: ClusteredNetwork, model, alpha, beta, cap: int = DEFAULT_CAP) -> Iterator[ClusterEnumeration]:
    for c in net:
        yield ClusterEnumeration.build(net, c.index, model, alpha, beta, cap)


def estimator_moments(
    estimator: str,
    net: ClusteredNetwork,
    model: OutcomeModel,
    alpha: AssignmentDesign,
    beta: AssignmentDesign,
    cap: int = DEFAULT_CAP,
    moments: list[ClusterMoments] | None = None,
) -> dict[str, float]:
    """Exact mean and variance of ``"ht_out"`` or ``"ht_in"`` over the realized design."""
    if estimator not in ("ht_out", "ht_in"):
        raise ValueError(f"unknown estimator {estimator!r}")
    moments = moments if moments is not None else network_moments(net, model, alpha, beta, cap)
    sets = net.eligible_sets()
    if estimator == "ht_out":
        n = sets.n_out
        means = [m.mean_v.sum() for m in moments]
        blocks = [m.block_var_v for m in moments]
    else:
        n = sets.n_in
        means = [m.mean_s.sum() for m in moments]
        blocks = [m.block_var_s for m in moments]
    if n == 0:
        raise ValueError("no eligible units")
    return {"mean": math.fsum(means) / n, "variance": math.fsum(blocks) / n**2}
