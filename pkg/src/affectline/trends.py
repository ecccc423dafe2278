"""Daily intensity series for topics, emotions and emotion subcategories.

A series maps calendar days to scores in [0, 1].  Days with no posts are
simply absent (the day's mean is undefined, not zero), so exports render
them as gaps.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

from .corpus import DailyPartition
from .emoclass import EMOTIONS


@dataclass
class IntensitySeries:
    """One named daily score series; subject examples: "topic", "anger",
    "anger/3" for subcategory 3 of anger."""

    subject: str
    points: dict[datetime.date, float] = field(default_factory=dict)

    def dates(self) -> list[datetime.date]:
        return sorted(self.points)

    def __getitem__(self, date: datetime.date) -> float:
        return self.points[date]

    def __len__(self) -> int:
        return len(self.points)


def topic_intensity(partitions: list[DailyPartition], related: dict[str, bool]) -> IntensitySeries:
    """Fraction of each day's posts classified as on-topic.

    ``related`` must cover every post id in the partitions.
    """
    series = IntensitySeries(subject="topic")
    for part in partitions:
        if len(part) == 0:
            continue
        hits = 0
        for pid in part.post_ids:
            if pid not in related:
                raise KeyError(f"no relevance decision for post {pid!r}")
            hits += bool(related[pid])
        series.points[part.date] = hits / len(part)
    return series


def emotion_intensity(partitions: list[DailyPartition], related: dict[str, bool],
                      probabilities: dict[str, dict[str, float]]) -> dict[str, IntensitySeries]:
    """Mean per-post emotion probability per day, one series per emotion.

    Non-related posts contribute probability 0 for every emotion (the
    emotion heads are never run on them); related posts must appear in
    ``probabilities`` as {emotion: p}.
    """
    out = {emo: IntensitySeries(subject=emo) for emo in EMOTIONS}
    for part in partitions:
        if len(part) == 0:
            continue
        totals = {emo: 0.0 for emo in EMOTIONS}
        for pid in part.post_ids:
            if pid not in related:
                raise KeyError(f"no relevance decision for post {pid!r}")
            if not related[pid]:
                continue
            if pid not in probabilities:
                raise KeyError(f"no emotion probabilities for related post {pid!r}")
            for emo in EMOTIONS:
                totals[emo] += probabilities[pid][emo]
        for emo in EMOTIONS:
            out[emo].points[part.date] = totals[emo] / len(part)
    return out


def moving_average(series: IntensitySeries, window: int) -> IntensitySeries:
    """Trailing mean over the last ``window`` present days (derived view)."""
    smoothed = IntensitySeries(subject=series.subject)
    dates = series.dates()
    for i, d in enumerate(dates):
        lo = max(0, i - window + 1)
        chunk = [series.points[x] for x in dates[lo : i + 1]]
        smoothed.points[d] = sum(chunk) / len(chunk)
    return smoothed


def write_series_csv(path, series_list: list[IntensitySeries]) -> None:
    """CSV with header date,subject,score; ISO dates, 10-decimal scores."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,subject,score\n")
        for series in series_list:
            for d in series.dates():
                fh.write(f"{d.isoformat()},{series.subject},{series.points[d]:.10f}\n")


def read_series_csv(path) -> dict[str, IntensitySeries]:
    out: dict[str, IntensitySeries] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "date,subject,score":
            raise ValueError(f"unexpected series header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            date_s, subject, score_s = line.split(",")
            series = out.setdefault(subject, IntensitySeries(subject=subject))
            series.points[datetime.date.fromisoformat(date_s)] = float(score_s)
    return out
