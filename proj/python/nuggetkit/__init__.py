"""Nugget-bank statistics, clustering, matching and ranking primitives."""

from ._nuggetkit import (
    NUM_CRITERIA,
    ContractError,
    FormatError,
    StatsError,
    SvmModel,
    connected_components,
    deferred_acceptance,
    fold,
    kendall_tau,
    recall,
    run_cli,
    spearman_rho,
    stable_match,
    train_svm,
    weighted_kendall_tau,
    wilcoxon,
    wpa,
)

__all__ = [
    "NUM_CRITERIA",
    "ContractError",
    "FormatError",
    "StatsError",
    "SvmModel",
    "connected_components",
    "deferred_acceptance",
    "fold",
    "kendall_tau",
    "recall",
    "run_cli",
    "spearman_rho",
    "stable_match",
    "train_svm",
    "weighted_kendall_tau",
    "wilcoxon",
    "wpa",
]
