"""Commit-log parsing, serialization and one-commit curation."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import IO, Iterable, Sequence

from .errors import ParseError

FIELDS = (
    "developer_id",
    "repo_id",
    "timestamp_utc",
    "utc_offset_minutes",
    "email_suffix",
    "event_kind",
)
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"
MAX_OFFSET_MINUTES = 840


class EventKind(str, Enum):
    COMMIT = "commit"
    PULL_REQUEST = "pull_request"


@dataclass(frozen=True, slots=True)
class CommitEvent:
    developer_id: str
    repo_id: str
    timestamp_utc: datetime
    utc_offset_minutes: int = 0
    email_suffix: str = ""
    event_kind: EventKind = EventKind.COMMIT

    @property
    def epoch(self) -> int:
        return int(self.timestamp_utc.timestamp())

    @property
    def is_commit(self) -> bool:
        return self.event_kind is EventKind.COMMIT


@dataclass(frozen=True)
class CurationReport:
    """Counts from one curation.

    ``removed_one_commit_devs`` counts every developer who left with a
    single event, including one whose only event sat in a dropped one-event
    repository. Event-level accounting uses the ``events_removed_*`` fields:
    ``retained + by_repo_filter + by_dev_filter == input``.
    """

    removed_one_commit_repos: int
    removed_one_commit_devs: int
    retained_events: int
    input_events: int
    events_removed_by_repo_filter: int = 0
    events_removed_by_dev_filter: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def parse_timestamp(text: str) -> datetime:
    """Parse ``YYYY-MM-DDTHH:MM:SSZ`` into an aware UTC datetime."""
    return datetime.strptime(text, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)


def normalize_suffix(raw: str) -> str:
    return raw.strip().lower().lstrip("@")


def _event_from_record(record: dict, row: int) -> CommitEvent:
    missing = [f for f in FIELDS if record.get(f) is None]
    if missing:
        raise ParseError("MALFORMED_ROW", f"missing field(s) {', '.join(missing)}", row)

    developer_id = str(record["developer_id"]).strip()
    repo_id = str(record["repo_id"]).strip()
    if not developer_id or not repo_id:
        raise ParseError("MALFORMED_ROW", "empty developer_id or repo_id", row)

    try:
        ts = parse_timestamp(str(record["timestamp_utc"]).strip())
    except ValueError:
        raise ParseError(
            "BAD_TIMESTAMP", f"cannot parse timestamp {record['timestamp_utc']!r}", row
        ) from None
    if ts.timestamp() <= 0:
        raise ParseError("BAD_TIMESTAMP", "timestamp must be after the epoch", row)

    raw_offset = record["utc_offset_minutes"]
    try:
        if isinstance(raw_offset, bool) or isinstance(raw_offset, float):
            raise ValueError
        offset = int(str(raw_offset).strip())
    except ValueError:
        raise ParseError("MALFORMED_ROW", f"non-integer utc offset {raw_offset!r}", row) from None
    if not -MAX_OFFSET_MINUTES <= offset <= MAX_OFFSET_MINUTES:
        raise ParseError("OFFSET_OUT_OF_RANGE", f"utc offset {offset} outside [-840, 840]", row)

    kind_text = str(record["event_kind"]).strip().lower()
    try:
        kind = EventKind(kind_text)
    except ValueError:
        raise ParseError("UNKNOWN_EVENT_KIND", f"unknown event kind {kind_text!r}", row) from None

    return CommitEvent(
        developer_id=developer_id,
        repo_id=repo_id,
        timestamp_utc=ts,
        utc_offset_minutes=offset,
        email_suffix=normalize_suffix(str(record["email_suffix"])),
        event_kind=kind,
    )


def _sniff_format(text: str) -> str:
    for line in text.splitlines():
        if line.strip():
            return "jsonl" if line.lstrip().startswith("{") else "csv"
    return "csv"


def parse_commit_log(stream: IO[bytes] | IO[str], fmt: str = "auto") -> list[CommitEvent]:
    """Parse a CSV or JSON-lines commit log.

    ``fmt`` is one of ``"auto"``, ``"csv"`` or ``"jsonl"``. Row numbers in
    errors are 1-based physical line numbers (the CSV header is line 1).
    Events are returned in input order.
    """
    data = stream.read()
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    if fmt == "auto":
        fmt = _sniff_format(text)

    events: list[CommitEvent] = []
    if fmt == "jsonl":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError("MALFORMED_ROW", f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(record, dict):
                raise ParseError("MALFORMED_ROW", "expected a JSON object", lineno)
            events.append(_event_from_record(record, lineno))
        return events
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")

    if not text.strip():
        return events
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    absent = [f for f in FIELDS if f not in header]
    if absent:
        raise ParseError("MALFORMED_ROW", f"header lacks column(s) {', '.join(absent)}", 1)
    for record in reader:
        lineno = reader.line_num
        if None in record:
            raise ParseError("MALFORMED_ROW", "too many fields", lineno)
        events.append(_event_from_record(record, lineno))
    return events


def _as_record(event: CommitEvent) -> dict:
    return {
        "developer_id": event.developer_id,
        "repo_id": event.repo_id,
        "timestamp_utc": format_timestamp(event.timestamp_utc),
        "utc_offset_minutes": event.utc_offset_minutes,
        "email_suffix": event.email_suffix,
        "event_kind": event.event_kind.value,
    }


def write_commit_log(events: Iterable[CommitEvent], stream: IO[str], fmt: str = "csv") -> None:
    if fmt == "jsonl":
        for event in events:
            stream.write(json.dumps(_as_record(event)) + "\n")
        return
    writer = csv.DictWriter(stream, fieldnames=FIELDS, lineterminator="\n")
    writer.writeheader()
    for event in events:
        writer.writerow(_as_record(event))


@dataclass
class _Pass:
    kept: list[CommitEvent]
    repos: int
    devs: int
    repo_events: int
    dev_events: int


def _curate_once(events: Sequence[CommitEvent]) -> _Pass:
    repo_counts = Counter(e.repo_id for e in events)
    lone_repos = {r for r, n in repo_counts.items() if n == 1}
    kept = [e for e in events if e.repo_id not in lone_repos]

    before = Counter(e.developer_id for e in events)
    dev_counts = Counter(e.developer_id for e in kept)
    # single-event developers whose event vanished with its repository
    vanished = sum(1 for d, n in before.items() if n == 1 and d not in dev_counts)
    lone_devs = {d for d, n in dev_counts.items() if n == 1}
    survivors = [e for e in kept if e.developer_id not in lone_devs]
    return _Pass(
        kept=survivors,
        repos=len(lone_repos),
        devs=len(lone_devs) + vanished,
        repo_events=len(events) - len(kept),
        dev_events=len(kept) - len(survivors),
    )


def curate(
    events: Sequence[CommitEvent], until_stable: bool = False
) -> tuple[list[CommitEvent], CurationReport]:
    """Drop one-event repositories, then one-event developers.

    The default is a single pass in that order. A single pass can leave a
    repository with one event after its co-contributor is dropped, so it is
    not idempotent; ``until_stable=True`` repeats the pass to a fixpoint.
    Commits and pull requests both count as events.
    """
    total = _curate_once(events)
    step = total
    while until_stable and (step.repo_events or step.dev_events):
        step = _curate_once(total.kept)
        total = _Pass(
            kept=step.kept,
            repos=total.repos + step.repos,
            devs=total.devs + step.devs,
            repo_events=total.repo_events + step.repo_events,
            dev_events=total.dev_events + step.dev_events,
        )
    report = CurationReport(
        removed_one_commit_repos=total.repos,
        removed_one_commit_devs=total.devs,
        retained_events=len(total.kept),
        input_events=len(events),
        events_removed_by_repo_filter=total.repo_events,
        events_removed_by_dev_filter=total.dev_events,
    )
    return total.kept, report
