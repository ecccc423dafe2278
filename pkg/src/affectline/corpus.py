"""Post ingestion, daily partitioning and the append-only label log.

Storage is deliberately flat: a line-delimited post store and a separate
line-delimited label log, both JSON records under a ``#affectline-v1``
header.  Dates are always computed in UTC so partitions are identical
across machines.
"""

from __future__ import annotations

import datetime
import json
import time
from dataclasses import dataclass, field

import numpy as np

FORMAT_HEADER = "#affectline-v1"

PLATFORMS = ("twitter", "weibo", "other")
TASKS = ("relevance", "emotion", "trigger")


def day_of(timestamp: float) -> datetime.date:
    """UTC calendar day of an epoch timestamp."""
    return datetime.datetime.fromtimestamp(timestamp, tz=datetime.timezone.utc).date()


@dataclass(frozen=True)
class Post:
    id: str
    timestamp: float
    text: str
    platform: str = "other"
    lang: str = "en"

    @property
    def date(self) -> datetime.date:
        return day_of(self.timestamp)


@dataclass(frozen=True)
class DailyPartition:
    """All post ids published on one UTC day, sorted for determinism."""

    date: datetime.date
    post_ids: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.post_ids)


@dataclass(frozen=True)
class Rejection:
    line_no: int
    reason: str
    record: str


@dataclass
class LabelRecord:
    """One human annotation; records are append-only, never mutated.

    ``payload`` is task-dependent: bool for relevance, a list of emotion
    ids for emotion, a list of ``[emotion, start, end]`` spans for
    trigger.
    """

    post_id: str
    task: str
    payload: object
    annotator_id: str
    round: int = 0
    created_at: float = field(default_factory=lambda: time.time())

    def to_json(self) -> str:
        return json.dumps(
            {
                "post_id": self.post_id,
                "task": self.task,
                "payload": self.payload,
                "annotator_id": self.annotator_id,
                "round": self.round,
                "created_at": self.created_at,
            },
            ensure_ascii=False,
            sort_keys=True,
        )

    @staticmethod
    def from_json(line: str) -> "LabelRecord":
        d = json.loads(line)
        return LabelRecord(
            post_id=d["post_id"],
            task=d["task"],
            payload=d["payload"],
            annotator_id=d["annotator_id"],
            round=int(d.get("round", 0)),
            created_at=float(d.get("created_at", 0.0)),
        )


def _validate_record(d: dict) -> str | None:
    """Reason string if the raw post record is invalid, else None."""
    if not isinstance(d, dict):
        return "not an object"
    if not d.get("id") or not isinstance(d["id"], str):
        return "missing id"
    if "timestamp" not in d:
        return "missing timestamp"
    try:
        float(d["timestamp"])
    except (TypeError, ValueError):
        return "bad timestamp"
    text = d.get("text")
    if not isinstance(text, str) or not text.strip():
        return "empty text"
    platform = d.get("platform", "other")
    if platform not in PLATFORMS:
        return "unknown platform"
    return None


class Corpus:
    """In-memory view over an ingested post store."""

    def __init__(self, posts: list[Post]):
        self.posts = list(posts)
        self._by_id = {p.id: p for p in self.posts}

    def __len__(self) -> int:
        return len(self.posts)

    def __contains__(self, post_id: str) -> bool:
        return post_id in self._by_id

    def get(self, post_id: str) -> Post:
        return self._by_id[post_id]

    def ids(self) -> list[str]:
        return [p.id for p in self.posts]


def ingest(lines) -> tuple[Corpus, list[Rejection]]:
    """Build a corpus from line-delimited post records.

    Malformed records and duplicate ids are skipped and reported, never
    fatal; the first occurrence of an id wins.
    """
    posts: list[Post] = []
    seen: set[str] = set()
    rejections: list[Rejection] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError:
            rejections.append(Rejection(line_no, "malformed json", line[:200]))
            continue
        reason = _validate_record(d)
        if reason is not None:
            rejections.append(Rejection(line_no, reason, line[:200]))
            continue
        if d["id"] in seen:
            rejections.append(Rejection(line_no, "duplicate id", line[:200]))
            continue
        seen.add(d["id"])
        posts.append(
            Post(
                id=d["id"],
                timestamp=float(d["timestamp"]),
                text=d["text"],
                platform=d.get("platform", "other"),
                lang=d.get("lang", "en"),
            )
        )
    return Corpus(posts), rejections


def ingest_file(path) -> tuple[Corpus, list[Rejection]]:
    with open(path, encoding="utf-8") as fh:
        return ingest(fh)


def write_posts(path, posts: list[Post]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(FORMAT_HEADER + "\n")
        for p in posts:
            fh.write(
                json.dumps(
                    {"id": p.id, "timestamp": p.timestamp, "text": p.text, "platform": p.platform, "lang": p.lang},
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def partition_by_day(corpus: Corpus) -> list[DailyPartition]:
    """Group posts by UTC day; days with no posts are simply absent."""
    by_day: dict[datetime.date, list[str]] = {}
    for p in corpus.posts:
        by_day.setdefault(p.date, []).append(p.id)
    return [
        DailyPartition(date=day, post_ids=tuple(sorted(ids)))
        for day, ids in sorted(by_day.items())
    ]


def sample_uniform(post_ids, n: int, seed: int) -> list[str]:
    """min(n, |set|) distinct ids, uniform without replacement, seeded."""
    if n < 0:
        raise ValueError("n must be >= 0")
    ordered = sorted(post_ids)
    if n >= len(ordered):
        return ordered
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(ordered), size=n, replace=False)
    return [ordered[i] for i in picked]


class LabelLog:
    """Append-only label log; one writer, replay reconstructs state.

    "Active" record per (post_id, task, annotator_id) is the last one
    appended; earlier records stay in the log untouched.
    """

    def __init__(self, path):
        self.path = path
        self._records: list[LabelRecord] = []
        self._load()

    def _load(self) -> None:
        try:
            fh = open(self.path, encoding="utf-8")
        except FileNotFoundError:
            return
        with fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                self._records.append(LabelRecord.from_json(line))

    def append(self, record: LabelRecord) -> None:
        validate_label(record)
        new_file = not self._file_exists()
        with open(self.path, "a", encoding="utf-8") as fh:
            if new_file:
                fh.write(FORMAT_HEADER + "\n")
            fh.write(record.to_json() + "\n")
            fh.flush()
        self._records.append(record)

    def _file_exists(self) -> bool:
        try:
            with open(self.path, encoding="utf-8"):
                return True
        except FileNotFoundError:
            return False

    def records(self, task: str | None = None, round: int | None = None) -> list[LabelRecord]:
        out = self._records
        if task is not None:
            out = [r for r in out if r.task == task]
        if round is not None:
            out = [r for r in out if r.round == round]
        return list(out)

    def active(self, task: str) -> dict[str, LabelRecord]:
        """Latest record per post for a task (last write per annotator,
        last annotator wins across annotators)."""
        state: dict[str, LabelRecord] = {}
        for r in self._records:
            if r.task == task:
                state[r.post_id] = r
        return state


def validate_label(record: LabelRecord) -> None:
    """Raise ValueError when a LabelRecord violates its invariants."""
    from .emoclass import EMOTIONS, canonical_emotion

    if record.task not in TASKS:
        raise ValueError(f"unknown task {record.task!r}")
    if record.round < 0:
        raise ValueError("round must be >= 0")
    if record.task == "relevance":
        if not isinstance(record.payload, bool):
            raise ValueError("relevance payload must be a boolean")
    elif record.task == "emotion":
        if not isinstance(record.payload, (list, tuple, set)):
            raise ValueError("emotion payload must be a list of emotion ids")
        for emo in record.payload:
            if canonical_emotion(emo) not in EMOTIONS:
                raise ValueError(f"unknown emotion id {emo!r}")
    elif record.task == "trigger":
        if not isinstance(record.payload, (list, tuple)):
            raise ValueError("trigger payload must be a span list")
        spans = []
        for item in record.payload:
            if not (isinstance(item, (list, tuple)) and len(item) == 3):
                raise ValueError("trigger span must be [emotion, start, end]")
            emo, start, end = item
            if canonical_emotion(emo) not in EMOTIONS:
                raise ValueError(f"unknown emotion id {emo!r}")
            if not (0 <= start < end):
                raise ValueError("span must satisfy 0 <= start < end")
            spans.append((int(start), int(end)))
        spans.sort()
        for (s1, e1), (s2, _) in zip(spans, spans[1:]):
            if s2 < e1:
                raise ValueError("trigger spans must not overlap")
