"""Event ingestion, new/old user bookkeeping and hourly materialization.

Hours are represented as integer indices counted from the Unix epoch
(``hour = floor(unix_seconds / 3600)``), so an hour window is simply a Python
``range`` of such indices.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .exceptions import DataError

logger = logging.getLogger(__name__)

PLATFORMS = ("twitter", "youtube", "reddit")
ACTIONS = ("post", "repost", "reply", "quote")
ALL_TOPICS = "__all__"
COLUMNS = ["ts", "hour", "topic", "child", "parent", "platform", "action"]

MALFORMED_TOLERANCE = 0.01


def hour_of(ts: datetime) -> int:
    return int(ts.timestamp() // 3600)


def hour_to_datetime(hour: int) -> datetime:
    return datetime.fromtimestamp(hour * 3600, tz=timezone.utc)


def hour_to_iso(hour: int) -> str:
    return hour_to_datetime(hour).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(value) -> datetime:
    if isinstance(value, datetime):
        ts = value
    else:
        text = str(value).strip()
        if not text:
            raise ValueError("empty timestamp")
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class ActivityEvent:
    """One child -> parent interaction. Root posts have ``parent == child``."""

    timestamp: datetime
    topic: str
    child_user: str
    parent_user: str
    platform: str
    action_type: str

    @property
    def hour(self) -> int:
        return hour_of(self.timestamp)

    @classmethod
    def from_record(cls, record: Mapping) -> "ActivityEvent":
        ts = parse_timestamp(record.get("ts"))
        platform = str(record.get("platform") or "").strip().lower()
        if platform not in PLATFORMS:
            raise ValueError(f"unknown platform {platform!r}")
        action = str(record.get("action") or "").strip().lower()
        if action not in ACTIONS:
            raise ValueError(f"unknown action {action!r}")
        child = str(record.get("child") or "").strip()
        if not child:
            raise ValueError("missing child user")
        parent = record.get("parent")
        parent = child if parent is None or str(parent).strip() == "" else str(parent).strip()
        topic = str(record.get("topic") or "").strip()
        if platform == "reddit":
            topic = ALL_TOPICS
        elif not topic:
            raise ValueError(f"{platform} event without topic")
        return cls(ts, topic, child, parent, platform, action)


@dataclass
class EventLog:
    """Time-sorted events held as a DataFrame with the ``COLUMNS`` layout."""

    frame: pd.DataFrame
    n_malformed: int = 0
    malformed_rows: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frame)

    @classmethod
    def from_events(cls, events: Iterable[ActivityEvent], **kwargs) -> "EventLog":
        rows = [
            (e.timestamp, e.hour, e.topic, e.child_user, e.parent_user, e.platform, e.action_type)
            for e in events
        ]
        frame = pd.DataFrame(rows, columns=COLUMNS)
        if len(frame):
            frame["ts"] = pd.to_datetime(frame["ts"], utc=True)
        frame = frame.astype({"hour": "int64"})
        frame = frame.sort_values("ts", kind="mergesort").reset_index(drop=True)
        return cls(frame, **kwargs)

    @property
    def window(self) -> range:
        """Corpus window: every hour from the first to the last event."""
        if not len(self.frame):
            return range(0, 0)
        return range(int(self.frame["hour"].min()), int(self.frame["hour"].max()) + 1)

    def topics(self, platform: str = "twitter") -> list[str]:
        sub = self.frame[self.frame["platform"] == platform]
        return sorted(sub["topic"].unique().tolist())

    def iter_events(self) -> Iterable[ActivityEvent]:
        for row in self.frame.itertuples(index=False):
            yield ActivityEvent(
                row.ts.to_pydatetime(), row.topic, row.child, row.parent, row.platform, row.action
            )


def _read_records(path: Path, fmt: str):
    if fmt == "jsonl":
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError:
                    yield lineno, None
    elif fmt == "csv":
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            # header is line 1
            for lineno, rec in enumerate(reader, start=2):
                yield lineno, rec
    else:
        raise ValueError(f"unsupported event format {fmt!r}")


def ingest_events(path, fmt: str | None = None, window: range | None = None) -> EventLog:
    """Read a JSONL or CSV event log.

    Rows that fail validation (or fall outside ``window``) are skipped and
    counted. More than 1% malformed rows raises :class:`DataError` naming the
    offending row numbers; otherwise a warning is logged.
    """
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    try:
        records = list(_read_records(path, fmt))
    except OSError as exc:
        raise DataError(f"cannot read event file {path}: {exc}") from exc

    events: list[ActivityEvent] = []
    bad: list[int] = []
    for lineno, rec in records:
        try:
            if not isinstance(rec, Mapping):
                raise ValueError("not an object")
            event = ActivityEvent.from_record(rec)
            if window is not None and event.hour not in window:
                raise ValueError("outside corpus window")
        except (ValueError, TypeError):
            bad.append(lineno)
            continue
        events.append(event)

    total = len(records)
    if bad:
        if len(bad) > MALFORMED_TOLERANCE * total:
            shown = ", ".join(map(str, bad[:20]))
            more = "" if len(bad) <= 20 else f" (+{len(bad) - 20} more)"
            raise DataError(
                f"{path}: {len(bad)} of {total} rows malformed (> 1%): rows {shown}{more}"
            )
        logger.warning("%s: skipped %d malformed row(s): %s", path, len(bad), bad[:20])
    return EventLog.from_events(events, n_malformed=len(bad), malformed_rows=bad)


def write_events_jsonl(log: EventLog, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in log.frame.itertuples(index=False):
            rec = {
                "ts": row.ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "topic": row.topic,
                "child": row.child,
                "parent": None if row.parent == row.child else row.parent,
                "platform": row.platform,
                "action": row.action,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


class UserLedger:
    """First hour each user was seen, per platform, across all topics."""

    def __init__(self, first_seen: dict[str, dict[str, int]] | None = None):
        self.first_seen: dict[str, dict[str, int]] = first_seen or {p: {} for p in PLATFORMS}

    @classmethod
    def from_log(cls, log: EventLog) -> "UserLedger":
        first_seen: dict[str, dict[str, int]] = {p: {} for p in PLATFORMS}
        df = log.frame
        if len(df):
            mins = df.groupby(["platform", "child"], sort=True)["hour"].min()
            for (platform, user), hour in mins.items():
                first_seen[platform][user] = int(hour)
        return cls(first_seen)

    def platform(self, platform: str) -> dict[str, int]:
        return self.first_seen.setdefault(platform, {})

    def known_at(self, platform: str, hour: int) -> set[str]:
        """Users whose first appearance is at or before ``hour``."""
        return {u for u, h in self.platform(platform).items() if h <= hour}


@dataclass(frozen=True)
class VolumeTriple:
    topic: str
    bin_starts: range
    activities: np.ndarray
    old_users: np.ndarray
    new_users: np.ndarray

    def __len__(self) -> int:
        return len(self.bin_starts)


def bin_hourly(
    log: EventLog,
    topic: str | None,
    platform: str = "twitter",
    window: range | None = None,
    ledger: UserLedger | None = None,
) -> VolumeTriple:
    """Hourly activity / old-user / new-user counts for one topic.

    ``topic=None`` aggregates all topics of the platform. A user is new in
    hour ``t`` iff their platform-wide first appearance is ``t``.
    """
    window = log.window if window is None else window
    ledger = UserLedger.from_log(log) if ledger is None else ledger
    n = len(window)
    acts = np.zeros(n, dtype=np.int64)
    old = np.zeros(n, dtype=np.int64)
    new = np.zeros(n, dtype=np.int64)

    df = log.frame
    mask = df["platform"] == platform
    if topic is not None:
        mask &= df["topic"] == topic
    sub = df.loc[mask, ["hour", "child"]]
    if n and len(sub):
        sub = sub[(sub["hour"] >= window.start) & (sub["hour"] < window.stop)]
        idx = sub["hour"].to_numpy() - window.start
        np.add.at(acts, idx, 1)
        distinct = sub.drop_duplicates()
        first = ledger.platform(platform)
        first_hours = distinct["child"].map(first).to_numpy()
        hours = distinct["hour"].to_numpy()
        is_new = first_hours == hours
        didx = hours - window.start
        np.add.at(new, didx[is_new], 1)
        np.add.at(old, didx[~is_new], 1)
    return VolumeTriple(topic or ALL_TOPICS, window, acts, old, new)


@dataclass(frozen=True)
class TemporalGraph:
    """Weighted directed child -> parent graph for one hour bin."""

    bin_start: int
    edges: Mapping[tuple[str, str], int]
    nodes: frozenset = frozenset()

    def __post_init__(self):
        ends = {u for e in self.edges for u in e}
        object.__setattr__(self, "nodes", frozenset(self.nodes) | ends)

    @property
    def total_weight(self) -> int:
        return int(sum(self.edges.values()))

    def relabel(self, bin_start: int) -> "TemporalGraph":
        return TemporalGraph(bin_start, dict(self.edges), self.nodes)

    def to_record(self) -> dict:
        edges = [[c, p, int(w)] for (c, p), w in sorted(self.edges.items())]
        return {"bin_start": hour_to_iso(self.bin_start), "edges": edges}

    @classmethod
    def from_record(cls, rec: Mapping) -> "TemporalGraph":
        hour = hour_of(parse_timestamp(rec["bin_start"]))
        return cls(hour, {(c, p): int(w) for c, p, w in rec["edges"]})


def aggregate_graphs(graphs: Iterable[TemporalGraph]) -> TemporalGraph:
    """Sum edge weights over several bins (bin_start of the first)."""
    total: Counter = Counter()
    nodes: set = set()
    start = None
    for g in graphs:
        start = g.bin_start if start is None else start
        total.update(g.edges)
        nodes |= g.nodes
    return TemporalGraph(start if start is not None else 0, dict(total), frozenset(nodes))


def build_temporal_graphs(
    log: EventLog, topic: str, window: range, platform: str = "twitter"
) -> list[TemporalGraph]:
    df = log.frame
    sub = df[(df["platform"] == platform) & (df["topic"] == topic)]
    sub = sub[(sub["hour"] >= window.start) & (sub["hour"] < window.stop)]
    per_hour: dict[int, Counter] = {h: Counter() for h in window}
    for hour, child, parent in zip(sub["hour"].to_numpy(), sub["child"], sub["parent"]):
        per_hour[int(hour)][(child, parent)] += 1
    return [TemporalGraph(h, dict(sorted(per_hour[h].items()))) for h in window]


def write_graphs_jsonl(graphs: Iterable[TemporalGraph], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for g in graphs:
            fh.write(json.dumps(g.to_record()) + "\n")


def read_graphs_jsonl(path) -> list[TemporalGraph]:
    with Path(path).open("r", encoding="utf-8") as fh:
        return [TemporalGraph.from_record(json.loads(line)) for line in fh if line.strip()]

