"""Built-in scenarios and the seven comparison tables.

T1 and T2 are exact (oracle). T3 to T7 are Monte Carlo. Every value
column in a CSV is followed by a ``<column>_reference`` column holding the
fixed reference figure for that cell, kept as a string.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import estimators as est
from .montecarlo import MonteCarloReport, run_monte_carlo
from .scenario import Scenario

TABLE_IDS = ("T1", "T2", "T3", "T4", "T5", "T6", "T7")
DEFAULT_SEED = 20240101
STAR_GROUPS = [{"n": 10, "count": 1000}, {"n": 5, "count": 1000}]


def star_scenario(kind: str, seed: int = DEFAULT_SEED, reps: int = 2000) -> Scenario:
    """K=2000 stars (1000 of size 10, 1000 of size 5), Y = 0.8 + 2 z + sum of in-neighbor z."""
    return Scenario.from_dict(
        {
            "graph": {"generator": kind, "groups": STAR_GROUPS},
            "outcome": {"type": "linear", "beta0": 0.8, "beta1": 2.0, "edge_coeff": {"default": 1.0}},
            "alpha": {"type": "bernoulli", "p": 0.6},
            "beta": {"type": "bernoulli", "p": 0.6},
            "reps": reps,
            "master_seed": seed,
        }
    )


def er_scenario(n: int, count: int, beta2: float, seed: int = DEFAULT_SEED, reps: int = 500) -> Scenario:
    """Directed Erdos-Renyi clusters (p = 0.4) with frozen N(0, 0.2^2) noise."""
    return Scenario.from_dict(
        {
            "graph": {"generator": "erdos_renyi", "n": n, "count": count, "p_edge": 0.4},
            "outcome": {
                "type": "linear",
                "beta0": 0.8,
                "beta1": 2.0,
                "edge_coeff": {"default": beta2},
                "noise": {"sd": 0.2},
            },
            "alpha": {"type": "bernoulli", "p": 0.6},
            "beta": {"type": "bernoulli", "p": 0.4},
            "reps": reps,
            "master_seed": seed,
            "graph_seed": seed + 1,
            "noise_seed": seed + 2,
        }
    )


def fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return f"{float(v):.6g}"


@dataclass
class Table:
    table_id: str
    title: str
    columns: list[str]
    rows: list[tuple[str, list[float | None], list[str]]] = field(default_factory=list)

    def add(self, label: str, values, reference=None) -> None:
        reference = reference or [""] * len(values)
        self.rows.append((label, list(values), list(reference)))

    def value(self, row: str, column: str) -> float:
        for label, vals, _ in self.rows:
            if label == row:
                return vals[self.columns.index(column)]
        raise KeyError(row)

    def reference(self, row: str, column: str) -> str:
        for label, _, refs in self.rows:
            if label == row:
                return refs[self.columns.index(column)]
        raise KeyError(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["row"]
        for c in self.columns:
            header += [c, f"{c}_reference"]
        w.writerow(header)
        for label, vals, refs in self.rows:
            line = [label]
            for v, r in zip(vals, refs):
                line += [fmt(v), r]
            w.writerow(line)
        return buf.getvalue()

    def to_json(self) -> dict[str, Any]:
        return {
            "table": self.table_id,
            "title": self.title,
            "columns": self.columns,
            "rows": [{"row": lab, "values": vals, "reference": refs} for lab, vals, refs in self.rows],
        }


# exact tables ------------------------------------------------------------


def _star_exact(kind: str):
    ctx = star_scenario(kind).build()
    return ctx, est.weighted_moment_blocks(ctx.net, ctx.model, ctx.alpha, ctx.beta)


def _table1() -> Table:
    t = Table("T1", "V^c_out - V^c_in via per-sender weighted moments", ["outward_star", "inward_star"])
    ref = {
        10: (["-2.83e-9", "2.83e-9"], ["-3.48e-6", "3.01e-7"], ["-2.35e-6", "3.48e-7"], ["-0.0058", "0.0526"]),
        5: (["9.71e-9", "-9.71e-9"], ["2.39e-6", "-4.01e-7"], ["1.65e-6", "-3.91e-7"], ["0.0040", "-0.0127"]),
    }
    cols = {}
    for kind in ("outward_star", "inward_star"):
        ctx, rows = _star_exact(kind)
        diag = est.diff_diagnostics(ctx.net, np.zeros(ctx.net.total_units))
        per = {}
        for n in (10, 5):
            sel = [r for r in rows if ctx.net[r["cluster"]].size == n]
            first = sel[0]
            h = diag[(first["cluster"], first["sender"])].h
            block = float(np.sum([r["block"] * (r["treated"] + r["control"]) for r in sel]))
            per[n] = (float(h[0]), first["treated"], first["control"], block)
        per["total"] = per[10][3] + per[5][3]
        cols[kind] = per
    names = ("H", "E[W^2 Z B D]", "E[W^2 (1-Z) B D]")
    for n, tag, blk in ((10, "n=10 (clusters 1-1000)", "(I)"), (5, "n=5 (clusters 1001-2000)", "(II)")):
        for pos, name in enumerate(names):
            t.add(f"{tag} {name}", [cols["outward_star"][n][pos], cols["inward_star"][n][pos]], ref[n][pos])
        t.add(f"{tag} {blk}", [cols["outward_star"][n][3], cols["inward_star"][n][3]], ref[n][3])
    t.add("V^c_out - V^c_in", [cols["outward_star"]["total"], cols["inward_star"]["total"]], ["-0.0018", "0.0399"])
    return t


def _table2() -> Table:
    t = Table("T2", "decomposition of V_out - V_in", ["outward_star", "inward_star"])
    res = {}
    for kind in ("outward_star", "inward_star"):
        ctx = star_scenario(kind).build()
        res[kind] = est.variance_decomposition(ctx.net, ctx.model, ctx.alpha, ctx.beta)
    o, i = res["outward_star"], res["inward_star"]
    t.add("(a)", [o["a"], i["a"]], ["-0.0018", "0.0027"])
    t.add("(b)", [o["b"], i["b"]], ["-7.4e-5", "-1.34e-5"])
    t.add("(c)", [o["c"], i["c"]], ["0", "8.73e-5"])
    t.add("(a)-(b)+(c)", [o["a"] - o["b"] + o["c"], i["a"] - i["b"] + i["c"]])
    t.add("V_out - V_in", [o["V_out"] - o["V_in"], i["V_out"] - i["V_in"]], ["-0.0017", "0.0028"])
    return t


# Monte Carlo tables ------------------------------------------------------


def _table3(seed, reps, workers) -> Table:
    t = Table("T3", "V^c - V by spillover scale", ["vc_minus_v_out", "vc_minus_v_in"])
    ref = {0: ["0.0369", "0.0466"], 1: ["0.1839", "0.1943"], 4: ["1.3329", "1.2068"], 20: ["25.4030", "21.8151"]}
    for b2 in (0, 1, 4, 20):
        rep = run_monte_carlo(er_scenario(10, 2000, b2, seed, reps).build(), workers=workers, exact=False)
        t.add(f"beta2={b2}", [rep.vc_minus_v("ht_out"), rep.vc_minus_v("ht_in")], ref[b2])
    return t


def _table4(seed, reps, workers) -> Table:
    t = Table("T4", "V^c - V by cluster size", ["vc_minus_v_out", "vc_minus_v_in"])
    ref = {10: ["0.0918", "0.0924"], 30: ["3.6012", "3.0675"], 50: ["13.4354", "12.8587"]}
    for n in (10, 30, 50):
        rep = run_monte_carlo(er_scenario(n, 4000, 1.0, seed, reps).build(), workers=workers, exact=False)
        t.add(f"n={n}", [rep.vc_minus_v("ht_out"), rep.vc_minus_v("ht_in")], ref[n])
    return t


_STAR_CACHE: dict[tuple, MonteCarloReport] = {}


def star_report(kind: str, seed: int, reps: int, workers: int) -> MonteCarloReport:
    key = (kind, seed, reps)
    if key not in _STAR_CACHE:
        _STAR_CACHE[key] = run_monte_carlo(star_scenario(kind, seed, reps).build(), workers=workers)
    return _STAR_CACHE[key]


def _table5(seed, reps, workers) -> Table:
    cols = ["outward_star_out", "outward_star_in", "inward_star_out", "inward_star_in"]
    t = Table("T5", "HT estimators on the star scenarios", cols)
    reps_ = {k: star_report(k, seed, reps, workers) for k in ("outward_star", "inward_star")}
    summ = [reps_[k].estimators[e] for k in ("outward_star", "inward_star") for e in ("ht_out", "ht_in")]
    t.add("E(tau_hat)", [s.mean for s in summ], ["0.9999", "0.9994", "1.0003", "0.9992"])
    t.add("bias", [s.bias for s in summ], ["-0.0001", "-0.0006", "0.0003", "-0.0008"])
    t.add("V(tau_hat)", [s.variance for s in summ], ["0.0122", "0.0141", "0.0141", "0.0115"])
    t.add("V^c(tau_hat)", [s.mean_vc for s in summ], ["0.0129", "0.0147", "0.1175", "0.0776"])
    d_out = summ[0].mean_vc - summ[1].mean_vc
    d_in = summ[2].mean_vc - summ[3].mean_vc
    t.add("V^c_out - V^c_in", [d_out, d_out, d_in, d_in], ["-0.0018", "-0.0018", "0.0398", "0.0398"])
    t.add("CI coverage", [s.coverage for s in summ])
    return t


def _hajek_table(table_id, kind, refs, seed, reps, workers) -> Table:
    cols = ["ht_out", "hj_out", "ht_in", "hj_in"]
    t = Table(table_id, f"HT and Hajek estimators, {kind.replace('_', ' ')}", cols)
    rep = star_report(kind, seed, reps, workers)
    summ = [rep.estimators[c] for c in cols]
    t.add("E(tau_hat)", [s.mean for s in summ], refs[0])
    t.add("V(tau_hat)", [s.variance for s in summ], refs[1])
    t.add("V^c(tau_hat)", [s.mean_vc for s in summ], refs[2])
    t.add("skipped reps", [s.skipped for s in summ])
    return t


def reproduce_table(table_id: str, seed: int = DEFAULT_SEED, reps: int | None = None, workers: int = 1) -> Table:
    table_id = table_id.upper()
    if table_id == "T1":
        return _table1()
    if table_id == "T2":
        return _table2()
    if table_id == "T3":
        return _table3(seed, reps or 500, workers)
    if table_id == "T4":
        return _table4(seed, reps or 500, workers)
    if table_id == "T5":
        return _table5(seed, reps or 2000, workers)
    if table_id == "T6":
        refs = (["0.9999", "1.0006", "0.9994", "1.0007"], ["0.0122", "0.0004", "0.0141", "0.0003"], ["0.0129", "0.0004", "0.0147", "0.0003"])
        return _hajek_table("T6", "outward_star", refs, seed, reps or 2000, workers)
    if table_id == "T7":
        refs = (["1.0003", "1.0017", "0.9992", "1.00174"], ["0.0141", "0.0019", "0.0115", "0.0020"], ["0.1175", "0.0098", "0.0776", "0.0094"])
        return _hajek_table("T7", "inward_star", refs, seed, reps or 2000, workers)
    raise ValueError(f"unknown table {table_id!r}; expected one of {TABLE_IDS}")
