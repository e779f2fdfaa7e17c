"""Treatment assignment designs.

A design gives exact probabilities for a cluster's treatment vector, the
marginal probability of the vector with one unit left out, and draws.
Treatment vectors within a cluster are coded as integers with unit i on
bit i, so unit 0 is the least significant bit.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .network import ClusteredNetwork
from .rng import CounterStream

MASS_TOL = 1e-12


class DesignError(ValueError):
    """Invalid design parameters or a design that cannot serve a cluster."""


def codes_of(Z: np.ndarray) -> np.ndarray:
    """Integer codes of the rows of a 0/1 matrix."""
    Z = np.asarray(Z, dtype=np.int64)
    return Z @ (np.int64(1) << np.arange(Z.shape[1], dtype=np.int64))


def all_vectors(n: int) -> np.ndarray:
    """Every 0/1 vector of length n, row r being the bits of code r."""
    codes = np.arange(1 << n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int8)


def _segment_products(f: np.ndarray, starts: np.ndarray, seg_id: np.ndarray):
    """Per-segment products of ``f`` and, per element, the product without it."""
    zero = f == 0.0
    safe = np.where(zero, 1.0, f)
    nz = np.multiply.reduceat(safe, starts)
    nzeros = np.add.reduceat(zero.astype(np.int64), starts)
    full = np.where(nzeros == 0, nz, 0.0)
    per, zc = nz[seg_id], nzeros[seg_id]
    loo = np.where(zero, np.where(zc == 1, per, 0.0), np.where(zc == 0, per / safe, 0.0))
    return full, loo


def _rows_products(p: np.ndarray | float, Z: np.ndarray):
    """Product law over the rows of Z: full probability and leave-one-out matrix."""
    m, n = Z.shape
    f = np.where(Z.astype(bool), p, 1.0 - np.asarray(p, dtype=float)).astype(float).ravel()
    starts = np.arange(0, m * n, n, dtype=np.int64)
    seg = np.repeat(np.arange(m, dtype=np.int64), n)
    full, loo = _segment_products(f, starts, seg)
    return full, loo.reshape(m, n)


def _flat_products(p: np.ndarray | float, net: ClusteredNetwork, z: np.ndarray):
    f = np.where(z.astype(bool), p, 1.0 - np.asarray(p, dtype=float)).astype(float)
    return _segment_products(f, net.offsets[:-1], net.cluster_of_unit)


def _check_prob(name: str, v: float) -> float:
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise DesignError(f"{name} must lie in [0, 1], got {v}")
    return v


class AssignmentDesign(ABC):
    """A probability law over treatment vectors, independent across clusters."""

    # per-cluster, vectorised over rows of Z (m x n_k)
    @abstractmethod
    def batch_full(self, k: int, Z: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def batch_excluding(self, k: int, Z: np.ndarray) -> np.ndarray:
        """Matrix whose (r, j) entry is P(z_{-j}) for row r; z_j itself is ignored."""

    @abstractmethod
    def marginals(self, k: int, n: int) -> np.ndarray:
        """Marginal treatment probability of each unit of cluster k."""

    @abstractmethod
    def draw(self, net: ClusteredNetwork, stream: CounterStream) -> np.ndarray: ...

    @abstractmethod
    def full_support(self, k: int, n: int) -> bool:
        """True when every vector has positive probability, known without enumeration."""

    @abstractmethod
    def signature(self, k: int) -> tuple: ...

    def needs_enumeration(self, k: int) -> bool:
        return False

    # flat versions over a whole network, one entry per cluster / per unit
    def flat_full(self, net: ClusteredNetwork, z: np.ndarray) -> np.ndarray:
        return np.array([self.batch_full(c.index, zk[None, :])[0] for c, zk in zip(net, net.split(z))])

    def flat_excluding(self, net: ClusteredNetwork, z: np.ndarray) -> np.ndarray:
        parts = [self.batch_excluding(c.index, zk[None, :])[0] for c, zk in zip(net, net.split(z))]
        return np.concatenate(parts) if parts else np.zeros(0)

    def prob_full(self, k: int, z_k: Sequence[int]) -> float:
        Z = np.asarray(z_k, dtype=np.int8)[None, :]
        return float(self.batch_full(k, Z)[0])

    def prob_excluding(self, k: int, j: int, z_minus_j: Sequence[int]) -> float:
        rest = np.asarray(z_minus_j, dtype=np.int8)
        Z = np.insert(rest, j, 0)[None, :]
        return float(self.batch_excluding(k, Z)[0, j])


@dataclass(frozen=True)
class Bernoulli(AssignmentDesign):
    """Independent treatment with probability p."""

    p: float

    def __post_init__(self):
        _check_prob("p", self.p)

    def batch_full(self, k, Z):
        return _rows_products(self.p, np.asarray(Z))[0]

    def batch_excluding(self, k, Z):
        return _rows_products(self.p, np.asarray(Z))[1]

    def flat_full(self, net, z):
        return _flat_products(self.p, net, z)[0]

    def flat_excluding(self, net, z):
        return _flat_products(self.p, net, z)[1]

    def marginals(self, k, n):
        return np.full(n, float(self.p))

    def draw(self, net, stream):
        return (stream.unit_uniforms(net) < self.p).astype(np.int8)

    def full_support(self, k, n):
        return 0.0 < self.p < 1.0

    def signature(self, k):
        return ("bernoulli", float(self.p))


@dataclass(frozen=True)
class TwoStage(AssignmentDesign):
    """With probability nu treat at saturation phi, otherwise at psi."""

    nu: float
    phi: float
    psi: float

    def __post_init__(self):
        for name in ("nu", "phi", "psi"):
            _check_prob(name, getattr(self, name))

    def _mix(self, a, b):
        return self.nu * a + (1.0 - self.nu) * b

    def batch_full(self, k, Z):
        Z = np.asarray(Z)
        return self._mix(_rows_products(self.phi, Z)[0], _rows_products(self.psi, Z)[0])

    def batch_excluding(self, k, Z):
        Z = np.asarray(Z)
        return self._mix(_rows_products(self.phi, Z)[1], _rows_products(self.psi, Z)[1])

    def flat_full(self, net, z):
        return self._mix(_flat_products(self.phi, net, z)[0], _flat_products(self.psi, net, z)[0])

    def flat_excluding(self, net, z):
        return self._mix(_flat_products(self.phi, net, z)[1], _flat_products(self.psi, net, z)[1])

    def marginals(self, k, n):
        return np.full(n, self._mix(self.phi, self.psi))

    def draw(self, net, stream):
        high = stream.cluster_uniforms(net) < self.nu
        sat = np.where(high, self.phi, self.psi)[net.cluster_of_unit]
        return (stream.unit_uniforms(net) < sat).astype(np.int8)

    def full_support(self, k, n):
        ok_phi = 0.0 < self.phi < 1.0
        ok_psi = 0.0 < self.psi < 1.0
        return (self.nu > 0 and ok_phi) or (self.nu < 1 and ok_psi)

    def signature(self, k):
        return ("two_stage", float(self.nu), float(self.phi), float(self.psi))


def _dense_table(n: int, mass: Mapping[tuple[int, ...], float]) -> np.ndarray:
    table = np.zeros(1 << n)
    for vec, prob in mass.items():
        if len(vec) != n:
            raise DesignError(f"tabulated vector {vec} does not have length {n}")
        if any(v not in (0, 1) for v in vec):
            raise DesignError(f"tabulated vector {vec} is not binary")
        code = sum(int(v) << i for i, v in enumerate(vec))
        table[code] += _check_prob("mass", prob)
    if abs(table.sum() - 1.0) > MASS_TOL:
        raise DesignError(f"tabulated masses sum to {table.sum()!r}, not 1")
    return table


@dataclass(frozen=True)
class Tabulated(AssignmentDesign):
    """Explicit masses over treatment vectors.

    ``default`` applies to every cluster; ``overrides`` maps a cluster index
    to its own table. Tables are keyed by tuples of 0/1 of the cluster size.
    """

    default: Mapping[tuple[int, ...], float] | None = None
    overrides: Mapping[int, Mapping[tuple[int, ...], float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.default is None and not self.overrides:
            raise DesignError("tabulated design needs at least one table")
        cache: dict[Any, np.ndarray] = {}
        tables = ([self.default] if self.default is not None else []) + list(self.overrides.values())
        for t in tables:
            n = len(next(iter(t)))
            cache[id(t)] = _dense_table(n, t)
        object.__setattr__(self, "_dense", cache)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[Sequence[int], float]]) -> "Tabulated":
        return cls(default={tuple(int(v) for v in vec): float(p) for vec, p in pairs})

    def _table(self, k: int, n: int) -> np.ndarray:
        t = self.overrides.get(k, self.default)
        if t is None:
            raise DesignError(f"no tabulated masses for cluster {k}")
        dense = self._dense[id(t)]
        if dense.size != 1 << n:
            raise DesignError(f"tabulated masses do not match cluster {k} of size {n}")
        return dense

    def batch_full(self, k, Z):
        Z = np.asarray(Z)
        return self._table(k, Z.shape[1])[codes_of(Z)]

    def batch_excluding(self, k, Z):
        Z = np.asarray(Z)
        n = Z.shape[1]
        table = self._table(k, n)
        codes = codes_of(Z)[:, None]
        bit = np.int64(1) << np.arange(n, dtype=np.int64)
        return table[codes & ~bit] + table[codes | bit]

    def marginals(self, k, n):
        table = self._table(k, n)
        return (all_vectors(n).astype(float) * table[:, None]).sum(axis=0)

    def draw(self, net, stream):
        u = stream.cluster_uniforms(net)
        out = []
        for c in net:
            table = self._table(c.index, c.size)
            cdf = np.cumsum(table)
            code = int(np.searchsorted(cdf, u[c.index] * cdf[-1], side="right"))
            code = min(code, table.size - 1)
            out.append((code >> np.arange(c.size)) & 1)
        return np.concatenate(out).astype(np.int8)

    def full_support(self, k, n):
        return bool(np.all(self._table(k, n) > 0))

    def needs_enumeration(self, k):
        return True

    def signature(self, k):
        t = self.overrides.get(k, self.default)
        return ("tabulated", tuple(sorted(t.items())))


@dataclass
class OverlapReport:
    """Support comparison between a hypothetical and a realized design.

    ``ok`` is the plain check: every vector alpha can produce, beta can too.
    ``leave_one_out_ok`` is the stronger check the weights rely on: whenever
    alpha gives positive mass to z_{-j}, beta gives positive mass to both
    completions of unit j.
    """

    ok: bool
    violations: list[tuple[int, tuple[int, ...]]]
    leave_one_out_ok: bool
    leave_one_out_violations: list[tuple[int, int, tuple[int, ...]]]
    min_positive_mass: dict[int, float]
    certified_structurally: list[int]


def verify_overlap(alpha: AssignmentDesign, beta: AssignmentDesign, net: ClusteredNetwork, cap: int = 20) -> OverlapReport:
    violations: list = []
    loo_violations: list = []
    min_mass: dict[int, float] = {}
    structural: list[int] = []
    for c in net:
        n = c.size
        if beta.full_support(c.index, n) and not beta.needs_enumeration(c.index):
            structural.append(c.index)
            continue
        if n > cap:
            raise DesignError(f"cluster {c.index} has {n} units, above the enumeration cap {cap}")
        Z = all_vectors(n)
        pa = alpha.batch_full(c.index, Z)
        pb = beta.batch_full(c.index, Z)
        pos = pb[pb > 0]
        min_mass[c.index] = float(pos.min()) if pos.size else 0.0
        bad = np.flatnonzero((pa > 0) & (pb <= 0))
        if bad.size:
            violations.append((c.index, tuple(int(v) for v in Z[bad[0]])))
        pa_loo = alpha.batch_excluding(c.index, Z)
        codes = np.arange(1 << n, dtype=np.int64)
        for j in range(n):
            flip = codes ^ (1 << j)
            both = (pb > 0) & (pb[flip] > 0)
            bad = np.flatnonzero((pa_loo[:, j] > 0) & ~both)
            if bad.size:
                loo_violations.append((c.index, j, tuple(int(v) for v in Z[bad[0]])))
                break
    return OverlapReport(
        ok=not violations,
        violations=violations,
        leave_one_out_ok=not loo_violations,
        leave_one_out_violations=loo_violations,
        min_positive_mass=min_mass,
        certified_structurally=structural,
    )


def design_from_config(cfg: Mapping[str, Any]) -> AssignmentDesign:
    kind = cfg.get("type")
    if kind == "bernoulli":
        return Bernoulli(float(cfg["p"]))
    if kind == "two_stage":
        return TwoStage(float(cfg["nu"]), float(cfg["phi"]), float(cfg["psi"]))
    if kind == "tabulated":
        default = None
        if "mass" in cfg:
            default = {tuple(int(v) for v in vec): float(p) for vec, p in cfg["mass"]}
        overrides = {
            int(k) - 1: {tuple(int(v) for v in vec): float(p) for vec, p in pairs}
            for k, pairs in cfg.get("per_cluster", {}).items()
        }
        return Tabulated(default=default, overrides=overrides)
    raise DesignError(f"unknown design type {kind!r}")


def sample(design: AssignmentDesign, net: ClusteredNetwork, stream: CounterStream) -> np.ndarray:
    """Flat 0/1 treatment vector over all units of ``net``."""
    return design.draw(net, stream)
