"""Potential outcome models under partial interference.

A model maps a cluster's treatment vector to that cluster's outcomes. No
method takes another cluster's treatments, so partial interference holds by
construction.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

from .design import all_vectors, codes_of
from .network import ClusteredNetwork


class OutcomeError(ValueError):
    """Bad outcome model specification."""


class OutcomeModel(ABC):
    net: ClusteredNetwork

    @abstractmethod
    def evaluate_batch(self, k: int, Z: np.ndarray) -> np.ndarray:
        """Outcomes for each row of Z (m x n_k), returned as m x n_k."""

    @abstractmethod
    def signature(self, k: int) -> tuple: ...

    def evaluate(self, k: int, z_k: Sequence[int]) -> np.ndarray:
        return self.evaluate_batch(k, np.asarray(z_k, dtype=np.int8)[None, :])[0]

    def evaluate_flat(self, z: np.ndarray) -> np.ndarray:
        parts = [self.evaluate_batch(c.index, zk[None, :])[0] for c, zk in zip(self.net, self.net.split(z))]
        return np.concatenate(parts)

    def bound(self, k: int) -> float:
        """Largest absolute outcome over every treatment vector of cluster k."""
        return float(np.abs(self.evaluate_batch(k, all_vectors(self.net[k].size))).max())


class LinearOutcomeModel(OutcomeModel):
    """Y_i = beta0 + beta1 z_i + sum over in-neighbors j of c(j->i) z_j + eps_i.

    ``coeff`` is aligned with ``net.edge_arrays``; ``noise`` has one entry per
    unit and is a fixed realization.
    """

    def __init__(self, net: ClusteredNetwork, beta0: float, beta1: float, coeff: np.ndarray, noise: np.ndarray | None = None):
        self.net = net
        self.beta0 = float(beta0)
        self.beta1 = float(beta1)
        src, _ = net.edge_arrays
        self.coeff = np.asarray(coeff, dtype=float)
        if self.coeff.shape != src.shape:
            raise OutcomeError("one coefficient per directed edge is required")
        self.noise = np.zeros(net.total_units) if noise is None else np.asarray(noise, dtype=float)
        if self.noise.shape != (net.total_units,):
            raise OutcomeError("noise needs one entry per unit")
        self.coeff.setflags(write=False)
        self.noise.setflags(write=False)

    @cached_property
    def _edge_offsets(self) -> np.ndarray:
        counts = [len(c.edges) for c in self.net]
        return np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    def cluster_coeffs(self, k: int) -> np.ndarray:
        lo, hi = self._edge_offsets[k], self._edge_offsets[k + 1]
        return self.coeff[lo:hi]

    def coefficient_matrix(self, k: int) -> np.ndarray:
        """C[j, i] = c(j->i), zero off the edge set."""
        c = self.net[k]
        C = np.zeros((c.size, c.size))
        for (j, i), v in zip(c.edges, self.cluster_coeffs(k)):
            C[j, i] = v
        return C

    def cluster_noise(self, k: int) -> np.ndarray:
        return self.noise[self.net.offsets[k] : self.net.offsets[k + 1]]

    def evaluate_batch(self, k, Z):
        Z = np.asarray(Z, dtype=float)
        return self.beta0 + self.beta1 * Z + Z @ self.coefficient_matrix(k) + self.cluster_noise(k)

    def evaluate_flat(self, z):
        src, dst = self.net.edge_arrays
        z = np.asarray(z, dtype=float)
        spill = np.bincount(dst, weights=self.coeff * z[src], minlength=self.net.total_units)
        return self.beta0 + self.beta1 * z + spill + self.noise

    def bound(self, k):
        c = self.net[k]
        inflow = np.zeros(c.size)
        for (_, i), v in zip(c.edges, self.cluster_coeffs(k)):
            inflow[i] += abs(v)
        return float(np.max(abs(self.beta0) + abs(self.beta1) + inflow + np.abs(self.cluster_noise(k))))

    def signature(self, k):
        return ("linear", self.beta0, self.beta1, tuple(self.cluster_coeffs(k)), tuple(self.cluster_noise(k)))


class TabulatedOutcomeModel(OutcomeModel):
    """Outcomes listed for every treatment vector of every cluster."""

    def __init__(self, net: ClusteredNetwork, tables: Sequence[np.ndarray]):
        self.net = net
        if len(tables) != len(net):
            raise OutcomeError("one outcome table per cluster is required")
        self.tables = []
        for c, t in zip(net, tables):
            t = np.array(t, dtype=float)
            if t.shape != (1 << c.size, c.size):
                raise OutcomeError(f"cluster {c.index}: table must have shape {(1 << c.size, c.size)}")
            if not np.all(np.isfinite(t)):
                raise OutcomeError(f"cluster {c.index}: outcomes must be finite")
            t.setflags(write=False)
            self.tables.append(t)

    @classmethod
    def from_mappings(cls, net: ClusteredNetwork, maps: Sequence[Mapping[tuple[int, ...], Sequence[float]]]):
        tables = []
        for c, m in zip(net, maps):
            t = np.full((1 << c.size, c.size), np.nan)
            for vec, ys in m.items():
                t[codes_of(np.array([vec]))[0]] = ys
            missing = np.flatnonzero(np.isnan(t).any(axis=1))
            if missing.size:
                vec = tuple(int(b) for b in all_vectors(c.size)[missing[0]])
                raise OutcomeError(f"cluster {c.index}: no outcomes listed for {vec}")
            tables.append(t)
        return cls(net, tables)

    def evaluate_batch(self, k, Z):
        return self.tables[k][codes_of(np.asarray(Z))]

    def signature(self, k):
        return ("tabulated", self.tables[k].tobytes())


def _edge_coefficients(net: ClusteredNetwork, spec: Mapping[str, Any]) -> np.ndarray:
    default = float(spec.get("default", 0.0))
    per_cluster = {int(k) - 1: float(v) for k, v in spec.get("per_cluster", {}).items()}
    per_edge: dict[tuple[int | None, int, int], float] = {}
    for row in spec.get("per_edge", []):
        if len(row) == 3:
            j, i, v = row
            key = (None, int(j) - 1, int(i) - 1)
        elif len(row) == 4:
            k, j, i, v = row
            key = (int(k) - 1, int(j) - 1, int(i) - 1)
        else:
            raise OutcomeError(f"per_edge entry {row} must be [j, i, c] or [k, j, i, c]")
        per_edge[key] = float(v)
    sign = {str(x): float(v) for x, v in spec.get("covariate_sign", {}).items()}
    if sign and not net.has_covariates:
        raise OutcomeError("covariate_sign needs covariates on every unit")

    used: set = set()
    out = []
    for c in net:
        edge_set = set(c.edges)
        for j, i in c.edges:
            v = per_cluster.get(c.index, default)
            for key in ((None, j, i), (c.index, j, i)):
                if key in per_edge:
                    v = per_edge[key]
                    used.add(key)
            if sign:
                lab = c.covariates[j]
                if lab not in sign:
                    raise OutcomeError(f"no covariate_sign for label {lab!r}")
                v *= sign[lab]
            out.append(v)
        for key in per_edge:
            if key[0] in (None, c.index) and (key[1], key[2]) in edge_set:
                used.add(key)
    unused = [k for k in per_edge if k not in used]
    if unused:
        k, j, i = unused[0]
        where = "any cluster" if k is None else f"cluster {k + 1}"
        raise OutcomeError(f"coefficient given for edge {j + 1}->{i + 1}, which is not in {where}")
    if any(k not in range(len(net)) for k in per_cluster):
        raise OutcomeError("per_cluster names a cluster that does not exist")
    return np.array(out, dtype=float)


def make_linear_from_scenario(
    net: ClusteredNetwork,
    coefficients: Mapping[str, Any],
    noise_spec: Mapping[str, Any] | None = None,
    noise_seed: int | None = None,
) -> LinearOutcomeModel:
    """Linear model from a config block; noise is drawn once and frozen."""
    coeff = _edge_coefficients(net, coefficients.get("edge_coeff", {}))
    noise = None
    if noise_spec is not None and float(noise_spec.get("sd", 0.0)) > 0:
        seed = noise_spec.get("seed", noise_seed)
        if seed is None:
            raise OutcomeError("noise needs a seed so it can be frozen")
        noise = np.random.default_rng(int(seed)).normal(0.0, float(noise_spec["sd"]), net.total_units)
    return LinearOutcomeModel(net, coefficients.get("beta0", 0.0), coefficients.get("beta1", 0.0), coeff, noise)


def outcome_from_config(cfg: Mapping[str, Any], net: ClusteredNetwork, noise_seed: int | None = None) -> OutcomeModel:
    kind = cfg.get("type")
    if kind == "linear":
        return make_linear_from_scenario(net, cfg, cfg.get("noise"), noise_seed)
    if kind == "tabulated":
        # {"clusters": [[[vector, outcomes], ...], ...]} or one shared "table"
        if "clusters" in cfg:
            rows = cfg["clusters"]
        elif "table" in cfg:
            rows = [cfg["table"]] * len(net)
        else:
            raise OutcomeError("tabulated outcomes need 'clusters' or 'table'")
        maps = [{tuple(int(v) for v in vec): [float(y) for y in ys] for vec, ys in r} for r in rows]
        return TabulatedOutcomeModel.from_mappings(net, maps)
    raise OutcomeError(f"unknown outcome model type {kind!r}")


def evaluate(model: OutcomeModel, k: int, z_k: Sequence[int]) -> np.ndarray:
    return model.evaluate(k, z_k)
