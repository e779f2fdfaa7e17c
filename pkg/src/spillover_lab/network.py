"""Clustered directed interference graphs.

Units are addressed by (cluster, unit) with 0-based indices. Edges never
cross clusters. An edge (j, i) means unit j's treatment can affect unit i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np


class NetworkError(ValueError):
    """Raised for malformed graph specifications."""


@dataclass(frozen=True)
class Cluster:
    """One cluster: size, adjacency in both directions, optional labels."""

    index: int
    size: int
    out_adj: tuple[tuple[int, ...], ...]
    in_adj: tuple[tuple[int, ...], ...]
    covariates: tuple[str, ...] | None = None
    undirected: bool = False

    @classmethod
    def from_edges(
        cls,
        index: int,
        size: int,
        edges: Iterable[tuple[int, int]],
        *,
        undirected: bool = False,
        covariates: Sequence[str] | None = None,
    ) -> "Cluster":
        if size < 1:
            raise NetworkError(f"cluster {index}: size must be positive, got {size}")
        seen: set[tuple[int, int]] = set()
        directed: list[tuple[int, int]] = []
        for raw in edges:
            j, i = int(raw[0]), int(raw[1])
            if not (0 <= j < size and 0 <= i < size):
                raise NetworkError(f"cluster {index}: edge ({j}, {i}) out of range")
            if i == j:
                raise NetworkError(f"cluster {index}: self-loop on unit {j}")
            pairs = [(j, i), (i, j)] if undirected else [(j, i)]
            if pairs[0] in seen:
                raise NetworkError(f"cluster {index}: duplicate edge {(j, i)}")
            seen.update(pairs)
            directed.extend(pairs)
        out_adj: list[list[int]] = [[] for _ in range(size)]
        in_adj: list[list[int]] = [[] for _ in range(size)]
        for j, i in sorted(directed):
            out_adj[j].append(i)
            in_adj[i].append(j)
        labels = None
        if covariates is not None:
            if len(covariates) != size:
                raise NetworkError(f"cluster {index}: covariate list has wrong length")
            for lab in covariates:
                if lab is not None and not isinstance(lab, str):
                    raise NetworkError(
                        f"cluster {index}: covariates must be categorical strings, got {lab!r}"
                    )
            labels = tuple(covariates)
        return cls(
            index=index,
            size=size,
            out_adj=tuple(tuple(a) for a in out_adj),
            in_adj=tuple(tuple(sorted(a)) for a in in_adj),
            covariates=labels,
            undirected=undirected,
        )

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Directed edges (sender, receiver), sorted by sender then receiver."""
        return tuple((j, i) for j, outs in enumerate(self.out_adj) for i in outs)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.array([len(a) for a in self.out_adj], dtype=np.int64)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.array([len(a) for a in self.in_adj], dtype=np.int64)

    @cached_property
    def senders(self) -> np.ndarray:
        return np.flatnonzero(self.out_degree > 0)

    @cached_property
    def receivers(self) -> np.ndarray:
        return np.flatnonzero(self.in_degree > 0)

    @cached_property
    def is_symmetric(self) -> bool:
        es = set(self.edges)
        return all((i, j) in es for j, i in es)

    def signature(self) -> tuple:
        """Hashable structural identity, used to deduplicate oracle work."""
        return (self.size, self.edges, self.covariates)


@dataclass(frozen=True)
class EligibleSets:
    """Senders, receivers and their totals, optionally restricted to label x.

    Without a filter, ``senders[k]`` holds units with out-degree > 0 and
    ``receivers[k]`` units with in-degree > 0. With a filter x, senders are
    the units labelled x with out-degree > 0, receivers are units with at
    least one in-neighbor labelled x, and ``in_counts[k][i]`` is the number
    of such in-neighbors.
    """

    senders: tuple[np.ndarray, ...]
    receivers: tuple[np.ndarray, ...]
    n_out: int
    n_in: int
    label: str | None = None
    in_counts: tuple[np.ndarray, ...] | None = None
    empty_clusters: tuple[int, ...] = field(default=())

    @property
    def assumption2_ok(self) -> bool:
        """Every cluster has at least one receiver."""
        return not self.empty_clusters


class ClusteredNetwork:
    """An ordered list of clusters plus flat arrays for vectorised work."""

    def __init__(self, clusters: Sequence[Cluster]):
        self.clusters: tuple[Cluster, ...] = tuple(clusters)
        for pos, c in enumerate(self.clusters):
            if c.index != pos:
                raise NetworkError(f"cluster at position {pos} carries index {c.index}")
        self.sizes = np.array([c.size for c in self.clusters], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)
        self.total_units = int(self.offsets[-1])

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    def __getitem__(self, k: int) -> Cluster:
        return self.clusters[k]

    @property
    def has_covariates(self) -> bool:
        return all(c.covariates is not None for c in self.clusters)

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        """Per-cluster views of a flat per-unit array."""
        return [flat[self.offsets[k] : self.offsets[k + 1]] for k in range(len(self))]

    @cached_property
    def cluster_of_unit(self) -> np.ndarray:
        return np.repeat(np.arange(len(self), dtype=np.int64), self.sizes)

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Global (sender, receiver) indices of every edge, in cluster order."""
        src, dst = [], []
        for c in self.clusters:
            off = int(self.offsets[c.index])
            for j, i in c.edges:
                src.append(off + j)
                dst.append(off + i)
        return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.concatenate([c.out_degree for c in self.clusters])

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.concatenate([c.in_degree for c in self.clusters])

    @cached_property
    def sender_mask(self) -> np.ndarray:
        return self.out_degree > 0

    @cached_property
    def receiver_mask(self) -> np.ndarray:
        return self.in_degree > 0

    @cached_property
    def senders_in_cluster(self) -> np.ndarray:
        """Per unit, the number of senders in its cluster."""
        per = np.array([c.senders.size for c in self.clusters], dtype=np.int64)
        return per[self.cluster_of_unit]

    @cached_property
    def inverse_in_degree(self) -> np.ndarray:
        """1/in-degree, 0 for units without in-neighbors."""
        d = self.in_degree
        return np.divide(1.0, d, out=np.zeros(d.size), where=d > 0)

    @cached_property
    def receiver_weight_sum(self) -> np.ndarray:
        """Per unit j, the sum of 1/in-degree over its out-neighbors."""
        src, dst = self.edge_arrays
        return np.bincount(src, weights=self.inverse_in_degree[dst], minlength=self.total_units)

    @cached_property
    def covariate_array(self) -> np.ndarray | None:
        if not self.has_covariates:
            return None
        return np.array([lab for c in self.clusters for lab in c.covariates], dtype=object)

    def eligible_sets(self, label: str | None = None) -> EligibleSets:
        return eligible_sets(self, label)

    def to_spec(self) -> dict[str, Any]:
        """Inverse of :func:`build_network`, 1-based."""
        out = []
        for c in self.clusters:
            entry: dict[str, Any] = {"n": c.size, "edges": [[j + 1, i + 1] for j, i in c.edges]}
            if c.covariates is not None:
                entry["covariates"] = {str(u + 1): lab for u, lab in enumerate(c.covariates)}
            out.append(entry)
        return {"clusters": out}


def eligible_sets(net: ClusteredNetwork, label: str | None = None) -> EligibleSets:
    """Sender/receiver sets, unconditional or restricted to covariate value ``label``."""
    senders, receivers, counts, empty = [], [], [], []
    if label is None:
        for c in net:
            senders.append(c.senders)
            receivers.append(c.receivers)
            if c.receivers.size == 0:
                empty.append(c.index)
        return EligibleSets(
            senders=tuple(senders),
            receivers=tuple(receivers),
            n_out=int(sum(s.size for s in senders)),
            n_in=int(sum(r.size for r in receivers)),
            empty_clusters=tuple(empty),
        )
    if not net.has_covariates:
        raise NetworkError("a covariate filter needs covariates on every unit")
    for c in net:
        is_x = np.array([lab == label for lab in c.covariates], dtype=bool)
        senders.append(np.flatnonzero(is_x & (c.out_degree > 0)))
        cnt = np.array([sum(1 for j in c.in_adj[i] if is_x[j]) for i in range(c.size)], dtype=np.int64)
        counts.append(cnt)
        receivers.append(np.flatnonzero(cnt > 0))
        if c.receivers.size == 0:
            empty.append(c.index)
    return EligibleSets(
        senders=tuple(senders),
        receivers=tuple(receivers),
        n_out=int(sum(s.size for s in senders)),
        n_in=int(sum(r.size for r in receivers)),
        label=label,
        in_counts=tuple(counts),
        empty_clusters=tuple(empty),
    )


def _parse_covariates(raw: Any, n: int, k: int) -> list[str] | None:
    if raw is None:
        return None
    labels: list[Any] = [None] * n
    if isinstance(raw, Mapping):
        for key, lab in raw.items():
            u = int(key) - 1
            if not 0 <= u < n:
                raise NetworkError(f"cluster {k}: covariate for unit {key} out of range")
            labels[u] = lab
    else:
        if len(raw) != n:
            raise NetworkError(f"cluster {k}: covariate list has wrong length")
        labels = list(raw)
    if any(lab is None for lab in labels):
        raise NetworkError(f"cluster {k}: covariates missing for some units")
    return labels


def build_network(spec: Mapping[str, Any]) -> ClusteredNetwork:
    """Build a network from the 1-based JSON form.

    ``{"clusters": [{"n": 5, "edges": [[1, 2], ...], "undirected": false,
    "covariates": {"1": "F", ...}}, ...]}``. An optional ``"repeat"`` key on a
    cluster entry replicates it that many times.
    """
    if "clusters" not in spec:
        raise NetworkError("graph spec needs a 'clusters' list")
    clusters: list[Cluster] = []
    for entry in spec["clusters"]:
        n = int(entry["n"])
        for _ in range(int(entry.get("repeat", 1))):
            k = len(clusters)
            edges = []
            for e in entry.get("edges", []):
                if len(e) != 2:
                    raise NetworkError(f"cluster {k}: edge {e} must be a [j, i] pair")
                edges.append((int(e[0]) - 1, int(e[1]) - 1))
            clusters.append(
                Cluster.from_edges(
                    k,
                    n,
                    edges,
                    undirected=bool(entry.get("undirected", False)),
                    covariates=_parse_covariates(entry.get("covariates"), n, k),
                )
            )
    if not clusters:
        raise NetworkError("graph spec has no clusters")
    return ClusteredNetwork(clusters)
