"""Developer classification: sponsor affiliation and working-hours pattern."""

from __future__ import annotations

import csv
import statistics
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, time, timedelta, timezone
from enum import Enum
from typing import IO, AbstractSet, Iterable, Mapping

from .errors import GroupError
from .ingest import CommitEvent
from .network import DistanceCategory

SPONSOR_SUFFIX = "mozilla.com"
AFFILIATION_WINDOW = (
    datetime(2019, 1, 1, tzinfo=timezone.utc),
    datetime(2020, 8, 11, tzinfo=timezone.utc),
)
WORK_START = time(8, 0)
WORK_END = time(18, 0)


class HoursClass(str, Enum):
    EIGHT_TO_SIX = "8-18"
    NIGHT_OWL = "night_owl"


@dataclass(frozen=True)
class GroupStats:
    group_size: int
    mean_commits: float
    median_commits: float


def _in_window(e: CommitEvent, window: tuple[datetime, datetime]) -> bool:
    return window[0] <= e.timestamp_utc < window[1]


def mozilla_devs(
    events: Iterable[CommitEvent],
    window: tuple[datetime, datetime] = AFFILIATION_WINDOW,
    suffix: str = SPONSOR_SUFFIX,
) -> set[str]:
    """Developers who signed at least one event in ``window`` with ``suffix``."""
    suffix = suffix.lower().lstrip("@")
    return {
        e.developer_id
        for e in events
        if e.email_suffix.lower() == suffix and _in_window(e, window)
    }


def local_time(e: CommitEvent) -> datetime:
    return e.timestamp_utc + timedelta(minutes=e.utc_offset_minutes)


def is_working_time(e: CommitEvent) -> bool:
    local = local_time(e)
    return local.weekday() < 5 and WORK_START <= local.time() < WORK_END


def working_hours_class(events: Iterable[CommitEvent]) -> dict[str, HoursClass]:
    total: Counter[str] = Counter()
    working: Counter[str] = Counter()
    for e in events:
        total[e.developer_id] += 1
        if is_working_time(e):
            working[e.developer_id] += 1
    # "at least half": integer comparison avoids float rounding at the boundary
    return {
        dev: HoursClass.EIGHT_TO_SIX if 2 * working[dev] >= n else HoursClass.NIGHT_OWL
        for dev, n in total.items()
    }


def group_commit_stats(
    events: Iterable[CommitEvent],
    group: AbstractSet[str],
    window: tuple[datetime, datetime] = AFFILIATION_WINDOW,
) -> GroupStats:
    """Mean and median per-developer COMMIT count inside ``window``.

    Group members without commits in the window count as zero.
    """
    if not group:
        raise GroupError("EMPTY_GROUP", "group statistics need at least one developer")
    counts = Counter(
        e.developer_id
        for e in events
        if e.is_commit and e.developer_id in group and _in_window(e, window)
    )
    per_dev = [counts.get(dev, 0) for dev in group]
    return GroupStats(
        group_size=len(per_dev),
        mean_commits=statistics.fmean(per_dev),
        median_commits=float(statistics.median(per_dev)),
    )


def write_classifications_csv(
    developers: Iterable[str],
    mozilla: AbstractSet[str],
    hours: Mapping[str, HoursClass],
    distance: Mapping[str, DistanceCategory],
    stream: IO[str],
) -> None:
    """Distance is left blank for developers outside the collaboration graph."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("developer_id", "mozilla", "hours_class", "distance_category"))
    for dev in sorted(developers):
        cat = distance.get(dev)
        writer.writerow(
            (dev, int(dev in mozilla), hours[dev].value if dev in hours else "", cat.value if cat else "")
        )
