"""Scenario files and the graph generators they can name.

A scenario is JSON::

    {"graph": {...}, "outcome": {...}, "alpha": {...}, "beta": {...},
     "reps": 2000, "master_seed": 1, "noise_seed": 2, "graph_seed": 3}

``graph`` is either an inline network (``{"clusters": [...]}``), a file
reference (``{"file": "net.json"}``, relative to the scenario), or a
generator (``{"generator": "outward_star", "n": 10, "count": 1000}``, or a
``"groups"`` list of such entries).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .design import AssignmentDesign, design_from_config
from .network import ClusteredNetwork, NetworkError, build_network
from .outcomes import OutcomeModel, outcome_from_config

GENERATORS = ("outward_star", "inward_star", "cycle_regular", "erdos_renyi")


class ScenarioError(ValueError):
    """Malformed scenario file."""


class AssumptionViolation(ScenarioError):
    """A network with a cluster that has no receiver."""


def _star_edges(n: int, outward: bool) -> list[list[int]]:
    edges = [[1, i] for i in range(2, n + 1)]
    return edges if outward else [[i, 1] for _, i in edges]


def generate_graph(kind: str, params: Mapping[str, Any], rng: np.random.Generator | None = None) -> dict[str, Any]:
    """A 1-based network spec of ``count`` clusters of ``n`` units.

    ``outward_star``: unit 1 points at every other unit. ``inward_star``:
    the reverse. ``cycle_regular``: undirected cycle, every unit has degree
    2. ``erdos_renyi``: each ordered pair is an edge with prob ``p_edge``.
    """
    n = int(params.get("n", 0))
    count = int(params.get("count", 1))
    if count < 1:
        raise ScenarioError("count must be at least 1")
    extra = {}
    if "covariates" in params:
        extra["covariates"] = params["covariates"]
    if kind in ("outward_star", "inward_star"):
        if n < 2:
            raise ScenarioError("a star needs at least 2 units")
        return {"clusters": [{"n": n, "edges": _star_edges(n, kind == "outward_star"), "repeat": count, **extra}]}
    if kind == "cycle_regular":
        if n < 3:
            raise ScenarioError("a cycle needs at least 3 units")
        edges = [[i, i % n + 1] for i in range(1, n + 1)]
        return {"clusters": [{"n": n, "edges": edges, "undirected": True, "repeat": count, **extra}]}
    if kind == "erdos_renyi":
        if n < 2:
            raise ScenarioError("an Erdos-Renyi cluster needs at least 2 units")
        p = float(params.get("p_edge", -1))
        if not 0.0 < p <= 1.0:
            raise ScenarioError("p_edge must lie in (0, 1]")
        if rng is None:
            raise ScenarioError("erdos_renyi needs a random generator")
        draws = rng.random((count, n, n)) < p
        draws[:, np.arange(n), np.arange(n)] = False
        clusters = []
        for k in range(count):
            src, dst = np.nonzero(draws[k])
            if src.size == 0:
                raise AssumptionViolation(f"Erdos-Renyi cluster {k + 1} came out empty; every cluster needs a receiver")
            clusters.append({"n": n, "edges": np.column_stack([src + 1, dst + 1]).tolist(), **extra})
        return {"clusters": clusters}
    raise ScenarioError(f"unknown generator {kind!r}; expected one of {GENERATORS}")


def resolve_graph(spec: Mapping[str, Any], graph_seed: int | None, base: Path | None = None) -> ClusteredNetwork:
    if "file" in spec:
        path = Path(spec["file"])
        if base is not None and not path.is_absolute():
            path = base / path
        with open(path) as fh:
            return _require_receivers(build_network(json.load(fh)))
    if "clusters" in spec:
        return _require_receivers(build_network(spec))
    groups = spec.get("groups")
    if groups is None:
        if "generator" not in spec:
            raise ScenarioError("graph needs 'clusters', 'file', 'generator' or 'groups'")
        groups = [spec]
    rng = np.random.default_rng(graph_seed) if graph_seed is not None else None
    clusters: list = []
    for g in groups:
        kind = g.get("generator", spec.get("generator"))
        params = {**{k: v for k, v in spec.items() if k not in ("groups", "generator")}, **g}
        clusters.extend(generate_graph(kind, params, rng)["clusters"])
    return _require_receivers(build_network({"clusters": clusters}))


def _require_receivers(net: ClusteredNetwork) -> ClusteredNetwork:
    empty = net.eligible_sets().empty_clusters
    if empty:
        raise AssumptionViolation(f"cluster {empty[0] + 1} has no receiver")
    return net


@dataclass
class Scenario:
    graph: dict[str, Any]
    outcome: dict[str, Any]
    alpha: dict[str, Any]
    beta: dict[str, Any]
    reps: int = 1000
    master_seed: int = 1
    noise_seed: int = 2
    graph_seed: int = 3
    level: float = 0.05
    labels: list[str] = field(default_factory=list)
    z: list[int] | None = None
    cap: int = 20
    base_dir: Path | None = None

    def __post_init__(self):
        if int(self.reps) < 1:
            raise ScenarioError("reps must be at least 1")
        if not 0.0 < self.level < 1.0:
            raise ScenarioError("level must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base_dir: Path | None = None) -> "Scenario":
        missing = [k for k in ("graph", "outcome", "alpha", "beta") if k not in d]
        if missing:
            raise ScenarioError(f"scenario is missing {', '.join(missing)}")
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = set(d) - known - {"name", "description"}
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in known}, base_dir=base_dir)

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def build(self) -> "BuiltScenario":
        try:
            net = resolve_graph(self.graph, self.graph_seed, self.base_dir)
        except NetworkError as exc:
            raise ScenarioError(str(exc)) from exc
        model = outcome_from_config(self.outcome, net, self.noise_seed)
        return BuiltScenario(self, net, model, design_from_config(self.alpha), design_from_config(self.beta))


@dataclass
class BuiltScenario:
    scenario: Scenario
    net: ClusteredNetwork
    model: OutcomeModel
    alpha: AssignmentDesign
    beta: AssignmentDesign

    @property
    def enumerable(self) -> bool:
        return int(self.net.sizes.max()) <= self.scenario.cap
