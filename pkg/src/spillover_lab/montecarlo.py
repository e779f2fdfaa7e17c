"""Monte Carlo over the realized design.

Rep r draws its assignment from the counter stream (master_seed, r), so a
rep's numbers do not depend on which worker ran it. Results land in a
rep-indexed buffer and are folded in rep order.
"""

from __future__ import annotations

import math
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any

import numpy as np

from . import estimators as est
from .design import DesignError, verify_overlap
from .estimands import inward_spillover, outward_spillover
from .oracle import CapExceeded
from .rng import CounterStream
from .scenario import BuiltScenario

COLUMNS = ("ht_out", "ht_in", "hj_out", "hj_in", "vc_out", "vc_in")


class OverlapError(DesignError):
    """The realized design cannot reach what the hypothetical design needs."""


def one_rep(ctx: BuiltScenario, rep: int) -> np.ndarray:
    net = ctx.net
    z = ctx.beta.draw(net, CounterStream(ctx.scenario.master_seed, rep))
    y = ctx.model.evaluate_flat(z)
    r = est.WeightedRealization.build(net, ctx.alpha, ctx.beta, z, y)
    hj_out = est.hajek_outward(net, None, ctx.alpha, ctx.beta, z, realization=r)
    hj_in = est.hajek_inward(net, None, ctx.alpha, ctx.beta, z, form="sender", realization=r)
    vc_out, vc_in = est.conservative_variance_hat(net, None, ctx.alpha, ctx.beta, z, realization=r)
    return np.array(
        [
            est.ht_outward(net, None, ctx.alpha, ctx.beta, z, realization=r),
            est.ht_inward(net, None, ctx.alpha, ctx.beta, z, form="sender", realization=r),
            math.nan if isinstance(hj_out, est.Undefined) else hj_out,
            math.nan if isinstance(hj_in, est.Undefined) else hj_in,
            vc_out,
            vc_in,
        ]
    )


_WORKER_CTX: BuiltScenario | None = None


def _run_chunk(bounds: tuple[int, int]) -> np.ndarray:
    lo, hi = bounds
    return np.stack([one_rep(_WORKER_CTX, r) for r in range(lo, hi)])


def simulate(ctx: BuiltScenario, reps: int, workers: int = 1) -> np.ndarray:
    """A reps x len(COLUMNS) buffer, row r holding rep r."""
    global _WORKER_CTX
    if workers <= 1 or reps < 2:
        return np.stack([one_rep(ctx, r) for r in range(reps)])
    size = math.ceil(reps / (4 * workers))
    chunks = [(lo, min(reps, lo + size)) for lo in range(0, reps, size)]
    _WORKER_CTX = ctx
    try:
        with ProcessPoolExecutor(max_workers=workers, mp_context=mp.get_context("fork")) as pool:
            parts = list(pool.map(_run_chunk, chunks))
    finally:
        _WORKER_CTX = None
    return np.concatenate(parts)


@dataclass
class EstimatorSummary:
    truth: float
    mean: float
    bias: float
    variance: float
    mean_vc: float | None
    coverage: float | None
    skipped: int
    used: int

    def to_json(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _mean(x: np.ndarray) -> float:
    return math.fsum(x.tolist()) / x.size


def _variance(x: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    m = _mean(x)
    return math.fsum(((x - m) ** 2).tolist()) / (x.size - 1)


def _summarize(values, truth, vc=None, vc_exact=None, level=0.05) -> EstimatorSummary:
    ok = ~np.isnan(values)
    v = values[ok]
    if v.size == 0:
        return EstimatorSummary(truth, math.nan, math.nan, math.nan, vc_exact, None, int((~ok).sum()), 0)
    coverage = None
    mean_vc = vc_exact
    if vc is not None:
        half = NormalDist().inv_cdf(1.0 - level / 2.0) * np.sqrt(vc[ok])
        coverage = float(np.mean(np.abs(v - truth) <= half))
        mean_vc = _mean(vc[ok])
    m = _mean(v)
    return EstimatorSummary(truth, m, m - truth, _variance(v), mean_vc, coverage, int((~ok).sum()), int(v.size))


@dataclass
class MonteCarloReport:
    reps: int
    master_seed: int
    estimators: dict[str, EstimatorSummary]
    draws: np.ndarray = field(repr=False)
    exact: dict[str, float] = field(default_factory=dict)

    def vc_minus_v(self, key: str) -> float:
        s = self.estimators[key]
        return s.mean_vc - s.variance

    def to_json(self) -> dict[str, Any]:
        return {
            "reps": self.reps,
            "master_seed": self.master_seed,
            "estimators": {k: v.to_json() for k, v in self.estimators.items()},
            "exact": self.exact,
        }


def run_monte_carlo(ctx: BuiltScenario, reps: int | None = None, workers: int = 1, *, exact: bool = True) -> MonteCarloReport:
    """Summaries of HT and Hajek estimates over ``reps`` draws from beta.

    Inward estimates use the sender-ordered sums, which equal the receiver
    form term for term and skip the receiver weights.

    With ``exact`` and enumerable clusters, oracle variances ride along.
    """
    reps = int(reps or ctx.scenario.reps)
    net = ctx.net
    if ctx.enumerable or not ctx.beta.needs_enumeration(0):
        ov = verify_overlap(ctx.alpha, ctx.beta, net, cap=ctx.scenario.cap)
        if not (ov.ok and ov.leave_one_out_ok):
            raise OverlapError(f"overlap fails: {ov.violations or ov.leave_one_out_violations}")
    tau_out = outward_spillover(net, ctx.model, ctx.alpha, ctx.scenario.cap)[0]
    tau_in = inward_spillover(net, ctx.model, ctx.alpha, ctx.scenario.cap)[0]
    draws = simulate(ctx, reps, workers)
    exact_vals: dict[str, float] = {}
    hj_vc = (None, None)
    if exact and ctx.enumerable:
        try:
            hj_vc = est.hajek_conservative_variance_exact(net, ctx.model, ctx.alpha, ctx.beta, ctx.scenario.cap)
            vc = est.conservative_variance_exact(net, ctx.model, ctx.alpha, ctx.beta, ctx.scenario.cap)
            tv = est.true_variances(net, ctx.model, ctx.alpha, ctx.beta, ctx.scenario.cap)
            exact_vals = {"vc_out": vc[0], "vc_in": vc[1], "v_out": tv[0], "v_in": tv[1], "hj_vc_out": hj_vc[0], "hj_vc_in": hj_vc[1]}
        except CapExceeded:
            hj_vc = (None, None)
    lvl = ctx.scenario.level
    summaries = {
        "ht_out": _summarize(draws[:, 0], tau_out, draws[:, 4], level=lvl),
        "ht_in": _summarize(draws[:, 1], tau_in, draws[:, 5], level=lvl),
        "hj_out": _summarize(draws[:, 2], tau_out, vc_exact=hj_vc[0], level=lvl),
        "hj_in": _summarize(draws[:, 3], tau_in, vc_exact=hj_vc[1], level=lvl),
    }
    return MonteCarloReport(reps, ctx.scenario.master_seed, summaries, draws, exact_vals)
