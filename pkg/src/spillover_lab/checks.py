"""Oracle-backed consistency checks over one scenario."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import estimators as est
from . import oracle
from .estimands import (
    check_conditions,
    equivalence_gap,
    inward_by_senders,
    inward_spillover,
    mean_outcome_matrices,
    outward_spillover,
)
from .outcomes import LinearOutcomeModel
from .rng import CounterStream
from .scenario import BuiltScenario

UNBIASED_TOL = 1e-10
VARIANCE_TOL = 1e-12
BOUND_TOL = 1e-10
IDENTITY_TOL = 1e-12
GAP_ZERO_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict[str, Any]

    def to_json(self) -> dict[str, Any]:
        return {"passed": self.passed, **self.detail}


def _scale(*xs: float) -> float:
    return max([1.0] + [abs(x) for x in xs])


def run_checks(ctx: BuiltScenario, z: np.ndarray | None = None, labels: list[str] | None = None) -> list[CheckResult]:
    net, model, alpha, beta, cap = ctx.net, ctx.model, ctx.alpha, ctx.beta, ctx.scenario.cap
    out: list[CheckResult] = []
    ms = oracle.network_moments(net, model, alpha, beta, cap)
    tau_out = outward_spillover(net, model, alpha, cap)[0]
    tau_in = inward_spillover(net, model, alpha, cap)[0]

    for key, tau in (("ht_out", tau_out), ("ht_in", tau_in)):
        mean = oracle.estimator_moments(key, net, model, alpha, beta, cap, ms)["mean"]
        err = abs(mean - tau)
        out.append(CheckResult(f"unbiased_{key}", err <= UNBIASED_TOL * _scale(tau), {"mean": mean, "target": tau, "error": err}))

    v = est.true_variances(net, model, alpha, beta, cap, ms)
    vc = est.conservative_variance_exact(net, model, alpha, beta, cap, ms)
    lo = est.variance_bounds(net, model, alpha, cap)
    for pos, side in enumerate(("out", "in")):
        tol = VARIANCE_TOL * _scale(v[pos], vc[pos])
        out.append(CheckResult(f"conservative_{side}", v[pos] <= vc[pos] + tol, {"V": v[pos], "Vc": vc[pos]}))
        tol = BOUND_TOL * _scale(vc[pos])
        out.append(CheckResult(f"lower_bound_{side}", vc[pos] - v[pos] >= lo[pos] - tol, {"Vc_minus_V": vc[pos] - v[pos], "bound": lo[pos]}))

    d = est.variance_decomposition(net, model, alpha, beta, cap, ms)
    err = abs((d["a"] - d["b"] + d["c"]) - (d["V_out"] - d["V_in"]))
    out.append(CheckResult("decomposition_identity", err <= BOUND_TOL * _scale(d["V_out"], d["V_in"]), {**d, "error": err}))

    gap = equivalence_gap(net, model, alpha, cap=cap)
    out.append(CheckResult("gap_identity", gap.identity_error <= IDENTITY_TOL * _scale(tau_out, tau_in), {"gap": gap.gap, "direct": gap.direct}))
    err = abs(inward_by_senders(net, model, alpha, cap) - tau_in)
    out.append(CheckResult("inward_sender_order", err <= IDENTITY_TOL * _scale(tau_in), {"error": err}))

    conds = check_conditions(net, model, alpha, cap=cap)
    ok = not any(conds.values()) or abs(gap.gap) <= GAP_ZERO_TOL * _scale(tau_out, tau_in)
    out.append(CheckResult("conditions_imply_equality", ok, {"conditions": conds, "gap": gap.gap}))
    for lab in labels or []:
        g = equivalence_gap(net, model, alpha, lab, cap)
        conds = check_conditions(net, model, alpha, lab, cap)
        ok = not any(conds.values()) or abs(g.gap) <= GAP_ZERO_TOL * _scale(g.direct)
        ok = ok and g.identity_error <= IDENTITY_TOL * _scale(g.direct)
        out.append(CheckResult(f"conditional_{lab}", ok, {"conditions": conds, "gap": g.gap}))

    if z is None:
        z = beta.draw(net, CounterStream(ctx.scenario.master_seed, 0))
    r = est.WeightedRealization.build(net, alpha, beta, z, model.evaluate_flat(z))
    a = est.ht_inward(net, None, alpha, beta, z, form="receiver", realization=r)
    b = est.ht_inward(net, None, alpha, beta, z, form="sender", realization=r)
    out.append(CheckResult("inward_forms_agree", abs(a - b) <= IDENTITY_TOL * _scale(a), {"receiver": a, "sender": b}))

    if isinstance(model, LinearOutcomeModel):
        worst = 0.0
        for c in net:
            if alpha.needs_enumeration(c.index):
                continue
            m1, m0 = mean_outcome_matrices(net, model, alpha, c.index, cap)
            e1, e0 = oracle.alpha_mean_outcomes(c, model, alpha, cap)
            err = max(float(np.abs(m1 - e1).max()), float(np.abs(m0 - e0).max()))
            worst = max(worst, err / _scale(float(np.abs(e1).max()), float(np.abs(e0).max())))
        out.append(CheckResult("closed_form_mean_outcomes", worst <= IDENTITY_TOL, {"max_relative_error": worst}))
    return out
