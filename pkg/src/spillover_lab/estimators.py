"""Horvitz-Thompson and Hajek estimators of outward and inward spillovers.

Given one realized assignment z and observed outcomes Y, each sender j gets
a weight W_j = P_alpha(z_{-j}) / P_beta(z_k), set to 0 when P_beta(z_k) = 0.
Exact design moments of these estimators come from the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from statistics import NormalDist
from typing import Any

import numpy as np

from . import oracle
from .design import AssignmentDesign
from .estimands import inward_spillover, mean_outcome_matrices, outward_spillover, pairwise_matrix
from .network import ClusteredNetwork
from .outcomes import OutcomeModel


class EstimatorError(ValueError):
    """Estimator undefined for this network or input."""


@dataclass(frozen=True)
class Undefined:
    """Stands in for a ratio estimate whose denominator vanished."""

    reason: str

    def __bool__(self) -> bool:
        return False


def _total(net: ClusteredNetwork, a: np.ndarray) -> float:
    """Per-cluster partial sums in cluster order, then a compensated sum."""
    return math.fsum(np.add.reduceat(a, net.offsets[:-1]).tolist())


@dataclass
class WeightedRealization:
    """Per-unit weights and neighbor summaries for one realized assignment.

    Arrays are flat over all units. Sender quantities (W, ybar, ytil) are 0
    for units without out-neighbors; receiver quantities (w1, w0) are 0 for
    units without in-neighbors and are computed on first use.
    """

    net: ClusteredNetwork = field(repr=False)
    z: np.ndarray
    y: np.ndarray
    W: np.ndarray
    ybar: np.ndarray
    ytil: np.ndarray

    @classmethod
    def build(cls, net: ClusteredNetwork, alpha: AssignmentDesign, beta: AssignmentDesign, z: np.ndarray, y: np.ndarray):
        z = np.asarray(z, dtype=np.int8)
        y = np.asarray(y, dtype=float)
        if z.shape != (net.total_units,) or y.shape != (net.total_units,):
            raise EstimatorError("z and y need one entry per unit")
        pb = beta.flat_full(net, z)[net.cluster_of_unit]
        loo = alpha.flat_excluding(net, z)
        W = np.divide(loo, pb, out=np.zeros(net.total_units), where=(pb > 0) & net.sender_mask)
        src, dst = net.edge_arrays
        n = net.total_units
        y_edge = y[dst]
        ybar = np.bincount(src, weights=y_edge, minlength=n) / np.maximum(net.out_degree, 1)
        ytil = np.bincount(src, weights=y_edge * net.inverse_in_degree[dst], minlength=n)
        return cls(net=net, z=z, y=y, W=W, ybar=ybar, ytil=ytil)

    def _receiver_average(self, weights: np.ndarray) -> np.ndarray:
        src, dst = self.net.edge_arrays
        total = np.bincount(dst, weights=weights[src], minlength=self.net.total_units)
        return total * self.net.inverse_in_degree

    @cached_property
    def w1(self) -> np.ndarray:
        return self._receiver_average(self.W * self.z)

    @cached_property
    def w0(self) -> np.ndarray:
        return self._receiver_average(self.W * (1 - self.z))

    @property
    def sign(self) -> np.ndarray:
        return 2.0 * self.z - 1.0

    @property
    def v1(self) -> np.ndarray:
        return self.W * self.z * self.ybar

    @property
    def v0(self) -> np.ndarray:
        return self.W * (1 - self.z) * self.ybar

    @property
    def s1(self) -> np.ndarray:
        return self.W * self.z * self.ytil

    @property
    def s0(self) -> np.ndarray:
        return self.W * (1 - self.z) * self.ytil


def _counts(net: ClusteredNetwork) -> tuple[int, int]:
    n_out = int(net.sender_mask.sum())
    n_in = int(net.receiver_mask.sum())
    return n_out, n_in


def _realization(net, outcomes, alpha, beta, z) -> WeightedRealization:
    if isinstance(outcomes, OutcomeModel):
        y = outcomes.evaluate_flat(np.asarray(z))
    else:
        y = np.asarray(outcomes, dtype=float)
    return WeightedRealization.build(net, alpha, beta, z, y)


def ht_outward(net, outcomes, alpha, beta, z, *, realization: WeightedRealization | None = None) -> float:
    r = realization or _realization(net, outcomes, alpha, beta, z)
    n_out, _ = _counts(net)
    if n_out == 0:
        raise EstimatorError("no unit has an out-neighbor")
    return _total(net, r.W * r.sign * r.ybar) / n_out


def ht_inward(net, outcomes, alpha, beta, z, *, form: str = "receiver", realization: WeightedRealization | None = None) -> float:
    r = realization or _realization(net, outcomes, alpha, beta, z)
    _, n_in = _counts(net)
    if n_in == 0:
        raise EstimatorError("no unit has an in-neighbor")
    if form == "receiver":
        return _total(net, (r.w1 - r.w0) * r.y * net.receiver_mask) / n_in
    if form == "sender":
        return _total(net, r.W * r.sign * r.ytil) / n_in
    raise EstimatorError(f"unknown form {form!r}")


def _ratio_difference(num1, den1, num0, den0) -> float | Undefined:
    if den1 == 0.0:
        return Undefined("treated arm has zero total weight")
    if den0 == 0.0:
        return Undefined("control arm has zero total weight")
    return num1 / den1 - num0 / den0


def hajek_outward(net, outcomes, alpha, beta, z, *, realization=None) -> float | Undefined:
    r = realization or _realization(net, outcomes, alpha, beta, z)
    wt = r.W * r.z
    wc = r.W - wt
    return _ratio_difference(_total(net, wt * r.ybar), _total(net, wt), _total(net, wc * r.ybar), _total(net, wc))


def hajek_inward(net, outcomes, alpha, beta, z, *, form: str = "receiver", realization=None) -> float | Undefined:
    r = realization or _realization(net, outcomes, alpha, beta, z)
    if form == "receiver":
        m = net.receiver_mask
        return _ratio_difference(_total(net, r.w1 * r.y * m), _total(net, r.w1 * m), _total(net, r.w0 * r.y * m), _total(net, r.w0 * m))
    if form == "sender":
        wt = r.W * r.z
        wc = r.W - wt
        cj = net.receiver_weight_sum
        return _ratio_difference(_total(net, wt * r.ytil), _total(net, wt * cj), _total(net, wc * r.ytil), _total(net, wc * cj))
    raise EstimatorError(f"unknown form {form!r}")


def conservative_variance_hat(net, outcomes, alpha, beta, z, *, realization=None) -> tuple[float, float]:
    """Plug-in conservative variances for the outward and inward HT estimators."""
    r = realization or _realization(net, outcomes, alpha, beta, z)
    n_out, n_in = _counts(net)
    block = net.senders_in_cluster
    w2 = r.W * r.W
    v_out = _total(net, block * w2 * r.ybar**2) / n_out**2
    v_in = _total(net, block * w2 * r.ytil**2) / n_in**2
    return v_out, v_in


def confidence_interval(estimate: float, vc_hat: float, level: float = 0.05) -> tuple[float, float]:
    """Normal interval estimate +/- z_{1 - level/2} sqrt(vc_hat)."""
    if vc_hat < 0:
        raise EstimatorError("variance must be non-negative")
    if not 0.0 < level < 1.0:
        raise EstimatorError("level must lie in (0, 1)")
    half = NormalDist().inv_cdf(1.0 - level / 2.0) * math.sqrt(vc_hat)
    return estimate - half, estimate + half


@dataclass
class SenderDiagnostics:
    """B, D and the per-edge coefficient gaps for one sender.

    ``h`` holds a^2 - b^2 per out-edge with a = 1/(N_out |out(j)|) and
    b = 1/(N_in |in(i)|); this is the factor multiplying Y_i Y_h in B * D
    when the out-neighbors share one coefficient. ``h_linear`` holds a - b.
    """

    B: float
    D: float
    h: np.ndarray
    h_linear: np.ndarray


def diff_diagnostics(net: ClusteredNetwork, outcomes: np.ndarray, z=None) -> dict[tuple[int, int], SenderDiagnostics]:
    n_out, n_in = _counts(net)
    if n_out == 0 or n_in == 0:
        raise EstimatorError("empty sender or receiver set")
    y = np.asarray(outcomes, dtype=float)
    out = {}
    for c in net:
        off = int(net.offsets[c.index])
        for j in c.senders:
            nb = np.array(c.out_adj[j])
            a = np.full(nb.size, 1.0 / (n_out * nb.size))
            b = 1.0 / (n_in * c.in_degree[nb])
            yy = y[off + nb]
            out[(c.index, int(j))] = SenderDiagnostics(
                B=math.fsum((a - b) * yy), D=math.fsum((a + b) * yy), h=a * a - b * b, h_linear=a - b
            )
    return out


# exact design moments ---------------------------------------------------


def conservative_variance_exact(net, model, alpha, beta, cap=oracle.DEFAULT_CAP, moments=None) -> tuple[float, float]:
    ms = moments if moments is not None else oracle.network_moments(net, model, alpha, beta, cap)
    n_out, n_in = _counts(net)
    out = [m.senders.size * (m.v1_sq + m.v0_sq).sum() for m in ms]
    inn = [m.senders.size * (m.s1_sq + m.s0_sq).sum() for m in ms]
    return math.fsum(out) / n_out**2, math.fsum(inn) / n_in**2


def true_variances(net, model, alpha, beta, cap=oracle.DEFAULT_CAP, moments=None) -> tuple[float, float]:
    ms = moments if moments is not None else oracle.network_moments(net, model, alpha, beta, cap)
    n_out, n_in = _counts(net)
    return (
        math.fsum(m.block_var_v for m in ms) / n_out**2,
        math.fsum(m.block_var_s for m in ms) / n_in**2,
    )


def _sender_effects(net, model, alpha, cap):
    """Per cluster: (average effect on out-neighbors, in-degree-weighted sum) per sender."""
    res = []
    for c in net:
        T = pairwise_matrix(net, model, alpha, c.index, cap)
        avg = np.array([np.mean([T[j, i] for i in c.out_adj[j]]) for j in c.senders])
        wsum = np.array([math.fsum(T[j, i] / len(c.in_adj[i]) for i in c.out_adj[j]) for j in c.senders])
        res.append((avg, wsum))
    return res


def variance_bounds(net, model, alpha, cap=oracle.DEFAULT_CAP) -> tuple[float, float]:
    """Lower bounds on V^c - V for the outward and inward HT estimators."""
    n_out, n_in = _counts(net)
    eff = _sender_effects(net, model, alpha, cap)
    lo_out = math.fsum(avg.size * float((avg**2).sum()) for avg, _ in eff) / n_out**2
    lo_in = math.fsum(ws.size * float((ws**2).sum()) for _, ws in eff) / n_in**2
    return lo_out, lo_in


def variance_decomposition(net, model, alpha, beta, cap=oracle.DEFAULT_CAP, moments=None) -> dict[str, float]:
    """V_out - V_in split into the weighted second-moment term (a), the squared
    effect term (b) and the within-cluster covariance term (c)."""
    ms = moments if moments is not None else oracle.network_moments(net, model, alpha, beta, cap)
    n_out, n_in = _counts(net)
    eff = _sender_effects(net, model, alpha, cap)
    a_terms, b_terms, c_terms = [], [], []
    for m, (avg, wsum) in zip(ms, eff):
        a_terms.append(float(((m.v1_sq + m.v0_sq) / n_out**2 - (m.s1_sq + m.s0_sq) / n_in**2).sum()))
        b_terms.append(float(((avg / n_out) ** 2 - (wsum / n_in) ** 2).sum()))
        cv, cs = m.cov_v, m.cov_s
        off_v = cv.sum() - np.trace(cv)
        off_s = cs.sum() - np.trace(cs)
        c_terms.append(off_v / n_out**2 - off_s / n_in**2)
    v_out, v_in = true_variances(net, model, alpha, beta, cap, ms)
    return {
        "a": math.fsum(a_terms),
        "b": math.fsum(b_terms),
        "c": math.fsum(c_terms),
        "V_out": v_out,
        "V_in": v_in,
    }


def weighted_moment_blocks(net, model, alpha, beta, cap=oracle.DEFAULT_CAP, moments=None) -> list[dict[str, Any]]:
    """Per sender: E[W^2 Z B D] and E[W^2 (1 - Z) B D] with the network's counts."""
    ms = moments if moments is not None else oracle.network_moments(net, model, alpha, beta, cap)
    n_out, n_in = _counts(net)
    rows = []
    for c, m in zip(net, ms):
        t = m.v1_sq / n_out**2 - m.s1_sq / n_in**2
        u = m.v0_sq / n_out**2 - m.s0_sq / n_in**2
        for pos, j in enumerate(m.senders):
            rows.append({"cluster": c.index, "sender": int(j), "block": m.senders.size, "treated": float(t[pos]), "control": float(u[pos])})
    return rows


def hajek_conservative_variance_exact(net, model, alpha, beta, cap=oracle.DEFAULT_CAP, moments=None) -> tuple[float, float]:
    """Conservative variances of the two ratio estimators, centred at population means."""
    ms = moments if moments is not None else oracle.network_moments(net, model, alpha, beta, cap)
    n_out, n_in = _counts(net)
    mu_out1 = mu_out0 = mu_in1 = mu_in0 = 0.0
    parts_o1, parts_o0, parts_i1, parts_i0 = [], [], [], []
    for c in net:
        m1, m0 = mean_outcome_matrices(net, model, alpha, c.index, cap)
        for j in c.senders:
            nb = list(c.out_adj[j])
            parts_o1.append(float(np.mean(m1[j, nb])))
            parts_o0.append(float(np.mean(m0[j, nb])))
        for i in c.receivers:
            src = list(c.in_adj[i])
            parts_i1.append(float(np.mean(m1[src, i])))
            parts_i0.append(float(np.mean(m0[src, i])))
    mu_out1, mu_out0 = math.fsum(parts_o1) / n_out, math.fsum(parts_o0) / n_out
    mu_in1, mu_in0 = math.fsum(parts_i1) / n_in, math.fsum(parts_i0) / n_in
    out_terms, in_terms = [], []
    for c, m in zip(net, ms):
        cj = np.array([math.fsum(1.0 / len(c.in_adj[i]) for i in c.out_adj[j]) for j in m.senders])
        t_out = (m.v1_sq - 2 * mu_out1 * m.w2_t_ybar + mu_out1**2 * m.w2_t) + (
            m.v0_sq - 2 * mu_out0 * m.w2_c_ybar + mu_out0**2 * m.w2_c
        )
        a1, a0 = cj * mu_in1, cj * mu_in0
        t_in = (m.s1_sq - 2 * a1 * m.w2_t_ytil + a1**2 * m.w2_t) + (m.s0_sq - 2 * a0 * m.w2_c_ytil + a0**2 * m.w2_c)
        out_terms.append(m.senders.size * float(t_out.sum()))
        in_terms.append(m.senders.size * float(t_in.sum()))
    return math.fsum(out_terms) / n_out**2, math.fsum(in_terms) / n_in**2


@dataclass
class EstimateReport:
    tau_hat_out: float
    tau_hat_in: float
    tau_hat_out_hajek: float | Undefined
    tau_hat_in_hajek: float | Undefined
    vc_hat_out: float
    vc_hat_in: float
    ci_out: tuple[float, float]
    ci_in: tuple[float, float]
    level: float
    form: str
    diagnostics: dict[tuple[int, int], SenderDiagnostics] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        def val(v):
            return {"undefined": v.reason} if isinstance(v, Undefined) else v

        return {
            "tau_hat_out": self.tau_hat_out,
            "tau_hat_in": self.tau_hat_in,
            "tau_hat_out_hajek": val(self.tau_hat_out_hajek),
            "tau_hat_in_hajek": val(self.tau_hat_in_hajek),
            "vc_hat_out": self.vc_hat_out,
            "vc_hat_in": self.vc_hat_in,
            "ci_out": list(self.ci_out),
            "ci_in": list(self.ci_in),
            "level": self.level,
            "inward_form": self.form,
            "diagnostics": {
                f"{k + 1}:{j + 1}": {"B": d.B, "D": d.D, "H": d.h.tolist(), "H_linear": d.h_linear.tolist()}
                for (k, j), d in self.diagnostics.items()
            },
        }


FORM_TOL = 1e-12


def estimate(net, outcomes, alpha, beta, z, *, level: float = 0.05, form: str = "receiver", diagnostics: bool = True) -> EstimateReport:
    """Every single-realization quantity at once; both inward forms are cross-checked."""
    r = _realization(net, outcomes, alpha, beta, z)
    t_in_r = ht_inward(net, None, alpha, beta, z, form="receiver", realization=r)
    t_in_s = ht_inward(net, None, alpha, beta, z, form="sender", realization=r)
    if abs(t_in_r - t_in_s) > FORM_TOL * max(1.0, abs(t_in_r)):
        raise EstimatorError(f"inward forms disagree: {t_in_r!r} vs {t_in_s!r}")
    t_out = ht_outward(net, None, alpha, beta, z, realization=r)
    t_in = t_in_r if form == "receiver" else t_in_s
    v_out, v_in = conservative_variance_hat(net, None, alpha, beta, z, realization=r)
    return EstimateReport(
        tau_hat_out=t_out,
        tau_hat_in=t_in,
        tau_hat_out_hajek=hajek_outward(net, None, alpha, beta, z, realization=r),
        tau_hat_in_hajek=hajek_inward(net, None, alpha, beta, z, form=form, realization=r),
        vc_hat_out=v_out,
        vc_hat_in=v_in,
        ci_out=confidence_interval(t_out, v_out, level),
        ci_in=confidence_interval(t_in, v_in, level),
        level=level,
        form=form,
        diagnostics=diff_diagnostics(net, r.y) if diagnostics else {},
    )


def population_targets(net, model, alpha, cap=oracle.DEFAULT_CAP) -> tuple[float, float]:
    return outward_spillover(net, model, alpha, cap)[0], inward_spillover(net, model, alpha, cap)[0]
