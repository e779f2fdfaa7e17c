"""Spillover estimands and estimators for clustered directed networks."""

from .design import Bernoulli, Tabulated, TwoStage, design_from_config, verify_overlap
from .estimands import (
    check_conditions,
    conditional_spillovers,
    equivalence_gap,
    estimand_report,
    inward_spillover,
    outward_spillover,
)
from .estimators import (
    Undefined,
    conservative_variance_exact,
    conservative_variance_hat,
    confidence_interval,
    estimate,
    hajek_inward,
    hajek_outward,
    ht_inward,
    ht_outward,
    variance_decomposition,
)
from .network import Cluster, ClusteredNetwork, build_network
from .outcomes import LinearOutcomeModel, TabulatedOutcomeModel, outcome_from_config

__all__ = [
    "Bernoulli", "Cluster", "ClusteredNetwork", "LinearOutcomeModel", "Tabulated", "TabulatedOutcomeModel",
    "TwoStage", "Undefined", "build_network", "check_conditions", "conditional_spillovers",
    "confidence_interval", "conservative_variance_exact", "conservative_variance_hat", "design_from_config",
    "equivalence_gap", "estimand_report", "estimate", "hajek_inward", "hajek_outward", "ht_inward",
    "ht_outward", "inward_spillover", "outcome_from_config", "outward_spillover", "variance_decomposition",
    "verify_overlap",
]
