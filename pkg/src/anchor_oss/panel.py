"""Weekly outcome panel around the shock week, plus descriptive series."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import IO, AbstractSet, Iterable, Sequence

import numpy as np

from .errors import PanelError
from .ingest import CommitEvent

WEEK = timedelta(days=7)

OUTCOMES = (
    "commits",
    "pull_requests",
    "new_devs",
    "leaving_devs",
    "new_repos",
    "abandoned_repos",
)


def _utc(year: int, month: int, day: int) -> datetime:
    return datetime(year, month, day, tzinfo=timezone.utc)


@dataclass(frozen=True)
class PanelConfig:
    window_start: datetime = _utc(2019, 1, 1)
    window_end_exclusive: datetime = _utc(2021, 2, 9)
    shock_instant: datetime = _utc(2020, 8, 11)
    dataset_end: datetime = _utc(2022, 9, 1)
    developer_filter: frozenset[str] | None = None

    def __post_init__(self):
        if not (
            self.window_start < self.shock_instant < self.window_end_exclusive <= self.dataset_end
        ):
            raise PanelError(
                "MISALIGNED_WINDOW",
                "need window_start < shock_instant < window_end_exclusive <= dataset_end",
            )
        if (self.window_end_exclusive - self.window_start) % WEEK:
            raise PanelError("MISALIGNED_WINDOW", "window span is not a whole number of weeks")
        if (self.shock_instant - self.window_start) % WEEK:
            raise PanelError("MISALIGNED_WINDOW", "shock does not fall on a weekly bin boundary")
        if self.developer_filter is not None and not isinstance(self.developer_filter, frozenset):
            object.__setattr__(self, "developer_filter", frozenset(self.developer_filter))

    @property
    def n_weeks(self) -> int:
        return (self.window_end_exclusive - self.window_start) // WEEK

    @property
    def n_pre(self) -> int:
        """Number of bins strictly before the shock (t <= 0)."""
        return (self.shock_instant - self.window_start) // WEEK

    def week_start(self, k: int) -> datetime:
        return self.window_start + k * WEEK

    def bin_of(self, ts: datetime) -> int | None:
        """Zero-based bin index of ``ts``, or None outside the window."""
        if ts < self.window_start or ts >= self.window_end_exclusive:
            return None
        return int((ts - self.window_start) // WEEK)

    def t_of_bin(self, k: int) -> int:
        return k - self.n_pre + 1


@dataclass(frozen=True)
class WeeklyOutcomes:
    t: int
    post_shock: int
    month: int
    commits: int = 0
    pull_requests: int = 0
    new_devs: int = 0
    leaving_devs: int = 0
    new_repos: int = 0
    abandoned_repos: int = 0

    def outcome(self, name: str) -> int:
        if name not in OUTCOMES:
            raise KeyError(f"unknown outcome {name!r}; expected one of {OUTCOMES}")
        return getattr(self, name)


PANEL_HEADER = tuple(f.name for f in fields(WeeklyOutcomes))


def calendar(config: PanelConfig) -> list[WeeklyOutcomes]:
    """Empty panel rows: week index, post-shock flag and month of each bin."""
    rows = []
    for k in range(config.n_weeks):
        t = config.t_of_bin(k)
        rows.append(WeeklyOutcomes(t=t, post_shock=int(t >= 1), month=config.week_start(k).month))
    return rows


def _first_last(
    events: Iterable[CommitEvent], key: str, horizon: datetime
) -> dict[str, tuple[CommitEvent, CommitEvent]]:
    spans: dict[str, tuple[CommitEvent, CommitEvent]] = {}
    for e in events:
        if e.timestamp_utc >= horizon:
            continue
        k = getattr(e, key)
        span = spans.get(k)
        if span is None:
            spans[k] = (e, e)
            continue
        first, last = span
        if e.timestamp_utc < first.timestamp_utc:
            first = e
        if e.timestamp_utc >= last.timestamp_utc:
            last = e
        spans[k] = (first, last)
    return spans


def build_panel(
    events: Sequence[CommitEvent], config: PanelConfig | None = None, check_coverage: bool = True
) -> list[WeeklyOutcomes]:
    """Aggregate events into one row per weekly bin.

    First/last-event outcomes are computed over every event before
    ``dataset_end`` (not just the window) and then binned. With a developer
    filter, developers count only if they are in it, and a repository counts
    as new or abandoned only when its first or last event was made by a
    filtered developer.
    """
    config = config or PanelConfig()
    if check_coverage and events:
        latest = max(e.timestamp_utc for e in events)
        if latest < config.window_end_exclusive:
            raise PanelError(
                "EVENTS_END_BEFORE_DATASET_END",
                f"last event {latest:%Y-%m-%d} precedes the window end; "
                "churn outcomes would be censored",
            )

    keep = config.developer_filter
    n = config.n_weeks
    counts = {name: [0] * n for name in OUTCOMES}

    for e in events:
        if keep is not None and e.developer_id not in keep:
            continue
        k = config.bin_of(e.timestamp_utc)
        if k is None:
            continue
        counts["commits" if e.is_commit else "pull_requests"][k] += 1

    for key, new_name, gone_name in (
        ("developer_id", "new_devs", "leaving_devs"),
        ("repo_id", "new_repos", "abandoned_repos"),
    ):
        for first, last in _first_last(events, key, config.dataset_end).values():
            for e, name in ((first, new_name), (last, gone_name)):
                if keep is not None and e.developer_id not in keep:
                    continue
                k = config.bin_of(e.timestamp_utc)
                if k is not None:
                    counts[name][k] += 1

    rows = []
    for k, row in enumerate(calendar(config)):
        rows.append(
            WeeklyOutcomes(
                t=row.t,
                post_shock=row.post_shock,
                month=row.month,
                **{name: counts[name][k] for name in OUTCOMES},
            )
        )
    return rows


def write_panel_csv(panel: Sequence[WeeklyOutcomes], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(PANEL_HEADER)
    for row in panel:
        writer.writerow(asdict(row).values())


def read_panel_csv(stream: IO[str]) -> list[WeeklyOutcomes]:
    reader = csv.DictReader(stream)
    return [WeeklyOutcomes(**{k: int(v) for k, v in rec.items()}) for rec in reader]


class LogMode(str, Enum):
    LOG = "log"
    LOG1P = "log1p"

    def forward(self, x: float) -> float:
        return math.log(x) if self is LogMode.LOG else math.log1p(x)

    def inverse(self, y):
        return np.exp(y) if self is LogMode.LOG else np.expm1(y)


def log_transform(
    panel: Sequence[WeeklyOutcomes], outcome: str, mode: LogMode | str = LogMode.LOG
) -> list[float]:
    mode = LogMode(mode)
    out = []
    for row in panel:
        value = row.outcome(outcome)
        if mode is LogMode.LOG and value <= 0:
            raise PanelError(
                "NONPOSITIVE_VALUE_IN_LOG_MODE",
                f"{outcome} is {value} in week t={row.t}; use log1p mode",
                week=row.t,
            )
        out.append(mode.forward(value))
    return out


def moving_average(series: Sequence[float], width: int = 12) -> list[float]:
    """Trailing mean over the last ``width`` points (fewer at the start)."""
    if width < 1:
        raise ValueError("width must be >= 1")
    values = list(series)
    out = []
    for i in range(len(values)):
        window = values[max(0, i - width + 1) : i + 1]
        out.append(sum(window) / len(window))
    return out


def group_share_series(
    events: Iterable[CommitEvent], group: AbstractSet[str], config: PanelConfig | None = None
) -> list[float]:
    """Per-week share of COMMIT events made by ``group`` (0 for empty weeks)."""
    config = config or PanelConfig()
    total = [0] * config.n_weeks
    hits = [0] * config.n_weeks
    for e in events:
        if not e.is_commit:
            continue
        k = config.bin_of(e.timestamp_utc)
        if k is None:
            continue
        total[k] += 1
        if e.developer_id in group:
            hits[k] += 1
    return [h / n if n else 0.0 for h, n in zip(hits, total)]
