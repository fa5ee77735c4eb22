"""Anchor-sponsor OSS ecosystem analysis.

Commit-log curation, weekly outcome panels, collaboration-network distance
groups, event-study OLS with Newey-West errors, Monte Carlo no-shock
counterfactuals, and an agent-based participation model.
"""

from .abm import AbmParams, AbmTrace, run, run_ensemble
from .counterfactual import (
    CounterfactualEstimate,
    counterfactual_for_panel,
    fit_preshock_trend,
    simulate_counterfactual,
)
from .errors import AnchorError
from .groups import HoursClass, group_commit_stats, mozilla_devs, working_hours_class
from .ingest import CommitEvent, CurationReport, EventKind, curate, parse_commit_log
from .network import CollaborationGraph, DistanceCategory, build_graph, distance_categories
from .panel import (
    LogMode,
    PanelConfig,
    WeeklyOutcomes,
    build_panel,
    group_share_series,
    log_transform,
    moving_average,
)
from .regression import DesignMatrix, EventStudyFit, build_design, fit, hac_covariance

__version__ = "0.1.0"

__all__ = [
    "AbmParams",
    "AbmTrace",
    "AnchorError",
    "CollaborationGraph",
    "CommitEvent",
    "CounterfactualEstimate",
    "CurationReport",
    "DesignMatrix",
    "DistanceCategory",
    "EventKind",
    "EventStudyFit",
    "HoursClass",
    "LogMode",
    "PanelConfig",
    "WeeklyOutcomes",
    "build_design",
    "build_graph",
    "build_panel",
    "counterfactual_for_panel",
    "curate",
    "distance_categories",
    "fit",
    "fit_preshock_trend",
    "group_commit_stats",
    "group_share_series",
    "hac_covariance",
    "log_transform",
    "moving_average",
    "mozilla_devs",
    "parse_commit_log",
    "run",
    "run_ensemble",
    "simulate_counterfactual",
    "working_hours_class",
]
