"""No-shock counterfactuals by Monte Carlo over pre-shock trend coefficients."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .errors import CounterfactualError
from .panel import LogMode, WeeklyOutcomes, log_transform
from .regression import EventStudyFit, build_design, design_row, fit

JITTER_START = 1e-12
JITTER_STOP = 1e-6


def fit_preshock_trend(
    panel: Sequence[WeeklyOutcomes],
    outcome: str,
    mode: LogMode | str = LogMode.LOG,
    lag: int | None = None,
) -> EventStudyFit:
    """Fit {1, t} + month dummies on the weeks t <= 0 of a log-transformed outcome."""
    pre = [row for row in panel if row.t <= 0]
    if len({row.month for row in pre}) < 2:
        raise CounterfactualError(
            "TOO_FEW_MONTHS", "pre-shock rows must span at least two calendar months"
        )
    return fit(build_design(pre, include_shock_terms=False), log_transform(pre, outcome, mode), lag=lag)


def cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, adding escalating diagonal jitter if needed.

    An all-zero covariance yields a zero factor (every draw equals the mean).
    """
    cov = np.asarray(cov, dtype=float)
    p = cov.shape[0]
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    scale = abs(np.trace(cov)) / p
    jitter = JITTER_START
    while jitter <= JITTER_STOP * (1 + 1e-9):
        try:
            return np.linalg.cholesky(cov + jitter * scale * np.eye(p))
        except np.linalg.LinAlgError:
            jitter *= 10
    raise CounterfactualError(
        "NON_PSD_COVARIANCE", "covariance is not positive semidefinite even after jitter"
    )


@dataclass(frozen=True)
class CounterfactualEstimate:
    percent_effect: float
    ci_low: float
    ci_high: float
    point_percent_effect: float
    point_ci_low: float
    point_ci_high: float
    horizon_weeks: int
    n_draws: int
    seed: int
    weeks: tuple[int, ...]
    observed: tuple[float, ...]
    counterfactual_mean: tuple[float, ...]
    counterfactual_low: tuple[float, ...]
    counterfactual_high: tuple[float, ...]

    @property
    def per_week_ratio(self) -> tuple[float, ...]:
        return tuple(o / c for o, c in zip(self.observed, self.counterfactual_mean))

    def to_dict(self) -> dict:
        return {
            "percent_effect": self.percent_effect,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "point_percent_effect": self.point_percent_effect,
            "point_ci_low": self.point_ci_low,
            "point_ci_high": self.point_ci_high,
            "horizon_weeks": self.horizon_weeks,
            "n_draws": self.n_draws,
            "seed": self.seed,
            "per_week_ratio": list(self.per_week_ratio),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def write_ratio_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("t", "observed", "counterfactual_mean", "ratio"))
        for row in zip(self.weeks, self.observed, self.counterfactual_mean, self.per_week_ratio):
            writer.writerow((row[0], repr(row[1]), repr(row[2]), repr(row[3])))


def simulate_counterfactual(
    trend: EventStudyFit,
    weeks: Sequence[int],
    months: Sequence[int],
    observed_levels: Sequence[float],
    horizon: int = 20,
    draws: int = 10_000,
    seed: int = 0,
    mode: LogMode | str = LogMode.LOG,
    cov: np.ndarray | None = None,
) -> CounterfactualEstimate:
    """Compare observed post-shock levels with pre-trend extrapolations.

    Coefficient draws come from MVN(beta, cov) (HAC covariance by default).
    The headline effect is cumulative over weeks 1..horizon in levels,
    ``(sum observed - sum predicted) / sum predicted * 100``; the point effect
    uses the final week alone. Percentiles 2.5/97.5 of the per-draw effects
    give the 95% band.
    """
    mode = LogMode(mode)
    if horizon < 1 or draws < 1:
        raise ValueError("horizon and draws must be positive")
    if min(len(weeks), len(months), len(observed_levels)) < horizon:
        raise CounterfactualError(
            "HORIZON_EXCEEDS_DATA", f"horizon {horizon} exceeds the {len(observed_levels)} observed weeks"
        )
    weeks = tuple(int(w) for w in weeks[:horizon])
    observed = np.asarray(observed_levels[:horizon], dtype=float)

    Xf = np.vstack(
        [design_row(trend.labels, t, 0, m) for t, m in zip(weeks, months[:horizon])]
    )
    cov = trend.hac_cov if cov is None else np.asarray(cov, dtype=float)
    L = cholesky_with_jitter(cov)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((draws, trend.beta.size))
    betas = trend.beta + z @ L.T

    mean_path = mode.inverse(Xf @ trend.beta)
    paths = mode.inverse(betas @ Xf.T)  # draws x horizon

    def cumulative(pred):
        total = pred.sum(axis=-1)
        return (observed.sum() - total) / total * 100

    def last_week(pred):
        return (observed[-1] - pred[..., -1]) / pred[..., -1] * 100

    effects = cumulative(paths)
    point_effects = last_week(paths)
    lo, hi = np.percentile(effects, [2.5, 97.5])
    plo, phi = np.percentile(point_effects, [2.5, 97.5])
    band_lo, band_hi = np.percentile(paths, [2.5, 97.5], axis=0)
    return CounterfactualEstimate(
        percent_effect=float(cumulative(mean_path)),
        ci_low=float(lo),
        ci_high=float(hi),
        point_percent_effect=float(last_week(mean_path)),
        point_ci_low=float(plo),
        point_ci_high=float(phi),
        horizon_weeks=horizon,
        n_draws=draws,
        seed=seed,
        weeks=weeks,
        observed=tuple(float(v) for v in observed),
        counterfactual_mean=tuple(float(v) for v in mean_path),
        counterfactual_low=tuple(float(v) for v in band_lo),
        counterfactual_high=tuple(float(v) for v in band_hi),
    )


def counterfactual_for_panel(
    panel: Sequence[WeeklyOutcomes],
    outcome: str,
    mode: LogMode | str = LogMode.LOG,
    horizon: int = 20,
    draws: int = 10_000,
    seed: int = 0,
    lag: int | None = None,
) -> tuple[EventStudyFit, CounterfactualEstimate]:
    trend = fit_preshock_trend(panel, outcome, mode, lag=lag)
    post = [row for row in panel if row.t >= 1]
    estimate = simulate_counterfactual(
        trend,
        weeks=[row.t for row in post],
        months=[row.month for row in post],
        observed_levels=[row.outcome(outcome) for row in post],
        horizon=horizon,
        draws=draws,
        seed=seed,
        mode=mode,
    )
    return trend, estimate
