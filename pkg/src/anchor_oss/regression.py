"""Event-study OLS with month-of-year fixed effects and Newey-West HAC covariance."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from scipy import linalg

from .errors import RegressionError

log = logging.getLogger(__name__)

SHOCK_LABELS = ("intercept", "t", "post_shock", "t_x_post_shock")
TREND_LABELS = ("intercept", "t")


class CalendarRow(Protocol):
    t: int
    post_shock: int
    month: int


def month_label(month: int) -> str:
    return f"month_{month:02d}"


def design_row(labels: Sequence[str], t: float, post_shock: int, month: int) -> np.ndarray:
    """One regressor row in the column order given by ``labels``."""
    values = {
        "intercept": 1.0,
        "t": float(t),
        "post_shock": float(post_shock),
        "t_x_post_shock": float(t) * post_shock,
    }
    own_month = month_label(month)
    return np.array(
        [values[name] if name in values else float(name == own_month) for name in labels]
    )


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    labels: tuple[str, ...]
    reference_month: int
    dropped_months: tuple[int, ...] = ()

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape

    def column(self, label: str) -> np.ndarray:
        return self.X[:, self.labels.index(label)]

    def check_time_order(self) -> None:
        if "t" in self.labels and np.any(np.diff(self.column("t")) <= 0):
            raise RegressionError("NOT_TIME_ORDERED", "HAC needs rows in increasing week order")


def build_design(rows: Sequence[CalendarRow], include_shock_terms: bool = True) -> DesignMatrix:
    """Regressors {1, t, D, t*D} (or {1, t}) plus month dummies.

    The reference month is the lowest-numbered calendar month present;
    months with no rows get no dummy.
    """
    if not rows:
        raise ValueError("design needs at least one row")
    present = sorted({r.month for r in rows})
    reference = present[0]
    absent = tuple(m for m in range(1, 13) if m not in present)
    if absent:
        log.warning("months %s have no observations; their dummies are dropped", list(absent))
    labels = (SHOCK_LABELS if include_shock_terms else TREND_LABELS) + tuple(
        month_label(m) for m in present[1:]
    )
    X = np.vstack([design_row(labels, r.t, r.post_shock, r.month) for r in rows])
    return DesignMatrix(X=X, labels=labels, reference_month=reference, dropped_months=absent)


def default_lag(n_obs: int) -> int:
    """Newey-West rule of thumb floor(4 (T/100)^(2/9))."""
    return math.floor(4 * (n_obs / 100) ** (2 / 9))


def _triangular_sandwich(R: np.ndarray, meat: np.ndarray) -> np.ndarray:
    # (X'X)^-1 S (X'X)^-1 with X'X = R'R, via triangular solves only
    left = linalg.solve_triangular(R, meat, trans="T")
    mid = linalg.solve_triangular(R, left.T, trans="T")
    half = linalg.solve_triangular(R, mid)
    cov = linalg.solve_triangular(R, half.T)
    return (cov + cov.T) / 2


def hac_covariance(
    X: np.ndarray | DesignMatrix,
    residuals: np.ndarray,
    lag: int | None = None,
    small_sample: bool = False,
) -> np.ndarray:
    """Newey-West covariance with Bartlett weights 1 - l/(L+1).

    Rows must be in time order. ``lag=0`` gives the HC0 sandwich.
    ``small_sample`` rescales by T/(T-p).
    """
    if isinstance(X, DesignMatrix):
        X.check_time_order()
        X = X.X
    X = np.asarray(X, dtype=float)
    e = np.asarray(residuals, dtype=float)
    n, p = X.shape
    if e.shape != (n,):
        raise RegressionError("DIMENSION_MISMATCH", f"{n} design rows but {e.size} residuals")
    if lag is None:
        lag = default_lag(n)
    if lag < 0:
        raise ValueError("lag must be >= 0")
    if lag >= n:
        raise RegressionError("LAG_EXCEEDS_SAMPLE", f"lag {lag} >= sample size {n}")

    scores = X * e[:, None]
    meat = scores.T @ scores
    for ell in range(1, lag + 1):
        gamma = scores[ell:].T @ scores[:-ell]
        meat += (1 - ell / (lag + 1)) * (gamma + gamma.T)

    R = np.linalg.qr(X, mode="r")
    cov = _triangular_sandwich(R, meat)
    if small_sample:
        cov *= n / (n - p)
    return cov


@dataclass(frozen=True)
class EventStudyFit:
    labels: tuple[str, ...]
    beta: np.ndarray
    hac_cov: np.ndarray
    r2: float
    adj_r2: float
    residuals: np.ndarray
    fitted: np.ndarray
    hac_lag: int
    n_obs: int

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.hac_cov), 0, None))

    def coef(self, label: str) -> float:
        return float(self.beta[self.labels.index(label)])

    def stderr(self, label: str) -> float:
        return float(self.se[self.labels.index(label)])

    def conf_int(self, label: str, z: float = 1.959963984540054) -> tuple[float, float]:
        b, s = self.coef(label), self.stderr(label)
        return b - z * s, b + z * s

    def to_dict(self) -> dict:
        return {
            "coefficients": {k: float(b) for k, b in zip(self.labels, self.beta)},
            "hac_std_errors": {k: float(s) for k, s in zip(self.labels, self.se)},
            "adj_r2": _finite_or_none(self.adj_r2),
            "r2": _finite_or_none(self.r2),
            "n_obs": self.n_obs,
            "hac_lag": self.hac_lag,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _finite_or_none(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def _goodness_of_fit(y: np.ndarray, resid: np.ndarray, n_regressors: int) -> tuple[float, float]:
    n = y.size
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    if tss == 0.0:
        return math.nan, math.nan
    r2 = 1 - rss / tss
    dof = n - n_regressors - 1
    adj = 1 - (1 - r2) * (n - 1) / dof if dof > 0 else math.nan
    return r2, adj


def fit(
    design: DesignMatrix | np.ndarray,
    y: Sequence[float],
    lag: int | None = None,
    small_sample: bool = False,
    labels: Sequence[str] | None = None,
) -> EventStudyFit:
    """OLS via column-pivoted QR, with HAC covariance of the coefficients."""
    if isinstance(design, DesignMatrix):
        design.check_time_order()
        X, labels = design.X, design.labels
    else:
        X = np.asarray(design, dtype=float)
        labels = tuple(labels) if labels is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise RegressionError("DIMENSION_MISMATCH", f"{n} design rows but {y.size} responses")
    if n < p:
        raise RegressionError("RANK_DEFICIENT", f"{n} rows cannot identify {p} columns", tuple(labels))

    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, p) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int((diag > tol).sum())
    if rank < p:
        dependent = tuple(labels[j] for j in sorted(piv[rank:]))
        raise RegressionError(
            "RANK_DEFICIENT",
            f"columns {', '.join(dependent)} are linearly dependent on the others",
            dependent,
        )

    beta = np.empty(p)
    beta[piv] = linalg.solve_triangular(R, Q.T @ y)
    fitted = X @ beta
    resid = y - fitted

    has_intercept = bool(np.any(np.all(X == 1.0, axis=0)))
    r2, adj = _goodness_of_fit(y, resid, p - 1 if has_intercept else p)
    if lag is None:
        lag = default_lag(n)
    cov = hac_covariance(X, resid, lag=lag, small_sample=small_sample)
    return EventStudyFit(
        labels=tuple(labels),
        beta=beta,
        hac_cov=cov,
        r2=r2,
        adj_r2=adj,
        residuals=resid,
        fitted=fitted,
        hac_lag=lag,
        n_obs=n,
    )
