"""Synthetic corpora with planted structure, for tests and demos.

The generator plants three recoverable signals: a keyword family that
marks related posts (with decoy mentions on unrelated posts), per-day
emotion expression probabilities, and per-emotion trigger phrases.  The
scripted annotator answers from the same ground truth, standing in for
the human in the loop.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Post
from .emoclass import EMOTIONS
from .topics import TriggerMention
from .trigger import TriggerSpan

KEYWORD_FAMILY = ["covid", "corona", "pandemic", "quarantine", "lockdown",
                  "vaccine", "outbreak", "epidemic"]

RELATED_CONTEXT = ["cases", "hospital", "symptoms", "testing", "spread",
                   "deaths", "icu", "nurses", "wards", "infection"]

FILLERS = ["football", "music", "coffee", "movie", "cats", "traffic",
           "recipe", "garden", "photo", "holiday"]

EMOTION_LEXICON = {
    "anger": ["furious", "outraged"],
    "disgust": ["revolting", "vile"],
    "fear": ["terrified", "anxious"],
    "happiness": ["joyful", "delighted"],
    "sadness": ["heartbroken", "mourning"],
    "surprise": ["astonished", "stunned"],
}

TRIGGER_LEXICON = {
    "anger": [["curfew"], ["the", "politicians"]],
    "disgust": [["hoarders"], ["fake", "cures"]],
    "fear": [["getting", "infected"], ["ventilators"]],
    "happiness": [["recovery"], ["reopening", "day"]],
    "sadness": [["lost", "friends"], ["funerals"]],
    "surprise": [["sudden", "surge"], ["record", "numbers"]],
}


@dataclass
class SyntheticTruth:
    """Everything the generator decided, keyed the way tests need it."""

    related: dict[str, bool] = field(default_factory=dict)
    emotions: dict[str, set] = field(default_factory=dict)
    trigger_spans: dict[str, list[TriggerSpan]] = field(default_factory=dict)
    emotion_curves: dict[str, dict[datetime.date, float]] = field(default_factory=dict)
    related_per_day: dict[datetime.date, int] = field(default_factory=dict)
    day_sizes: dict[datetime.date, int] = field(default_factory=dict)
    keyword_family: list[str] = field(default_factory=list)
    seed_keywords: list[str] = field(default_factory=list)

    def related_ids(self) -> set[str]:
        return {pid for pid, rel in self.related.items() if rel}

    def expected_emotion_intensity(self) -> dict[str, dict[datetime.date, float]]:
        """Eq-2 target: related_count(t) * pi(t, y) / |X_t|."""
        out: dict[str, dict[datetime.date, float]] = {emo: {} for emo in EMOTIONS}
        for day, size in self.day_sizes.items():
            for emo in EMOTIONS:
                out[emo][day] = self.related_per_day[day] * self.emotion_curves[emo][day] / size
        return out


def planted_emotion_curves(days: list[datetime.date]) -> dict[str, dict[datetime.date, float]]:
    """Smooth, phase-shifted per-emotion probability curves in [0.08, 0.72]."""
    curves: dict[str, dict[datetime.date, float]] = {}
    n = max(len(days), 1)
    for i, emo in enumerate(EMOTIONS):
        phase = 2 * math.pi * i / len(EMOTIONS)
        curves[emo] = {
            day: 0.4 + 0.32 * math.sin(2 * math.pi * t / n + phase)
            for t, day in enumerate(days)
        }
        for day in days:
            curves[emo][day] = min(max(curves[emo][day], 0.08), 0.72)
    return curves


def make_synthetic_corpus(n_days: int = 30, posts_per_day: int = 1000, seed: int = 0,
                          start: datetime.date = datetime.date(2020, 3, 1),
                          related_fraction: float = 0.5,
                          decoy_rate: float = 0.3) -> tuple[list[Post], SyntheticTruth]:
    """Planted corpus: relevance keywords, emotion curves, trigger phrases.

    Related posts carry one keyword-family word plus context words; a
    ``decoy_rate`` share of unrelated posts also mention a family word
    (that ambiguity is what the relevance model must resolve).  Token
    positions of trigger phrases are recorded as gold spans.
    """
    rng = np.random.default_rng(seed)
    days = [start + datetime.timedelta(days=i) for i in range(n_days)]
    curves = planted_emotion_curves(days)
    truth = SyntheticTruth(
        emotion_curves=curves,
        keyword_family=list(KEYWORD_FAMILY),
        seed_keywords=["covid", "pandemic"],
    )
    posts: list[Post] = []
    pid_counter = 0
    for day in days:
        day_start = int(datetime.datetime.combine(
            day, datetime.time(0), tzinfo=datetime.timezone.utc).timestamp())
        truth.day_sizes[day] = posts_per_day
        truth.related_per_day[day] = 0
        for j in range(posts_per_day):
            pid = f"s{pid_counter}"
            pid_counter += 1
            related = bool(rng.random() < related_fraction)
            words: list[str] = []
            spans: list[TriggerSpan] = []
            expressed: set[str] = set()
            if related:
                truth.related_per_day[day] += 1
                words.append(KEYWORD_FAMILY[int(rng.integers(len(KEYWORD_FAMILY)))])
                words.extend(rng.choice(RELATED_CONTEXT, size=2, replace=False))
                for emo in EMOTIONS:
                    if rng.random() < curves[emo][day]:
                        expressed.add(emo)
                        words.append(EMOTION_LEXICON[emo][int(rng.integers(2))])
                        phrase = TRIGGER_LEXICON[emo][int(rng.integers(2))]
                        s = len(words)
                        words.extend(phrase)
                        spans.append(TriggerSpan(post_id=pid, emotion=emo, token_start=s,
                                                 token_end=s + len(phrase),
                                                 surface=" ".join(phrase)))
                words.append(FILLERS[int(rng.integers(len(FILLERS)))])
            else:
                words.extend(rng.choice(FILLERS, size=3, replace=False))
                if rng.random() < decoy_rate:
                    words.insert(1, KEYWORD_FAMILY[int(rng.integers(len(KEYWORD_FAMILY)))])
            posts.append(Post(
                id=pid,
                timestamp=day_start + 60 * j,
                text=" ".join(words),
                platform="twitter",
                lang="en",
            ))
            truth.related[pid] = related
            truth.emotions[pid] = expressed
            truth.trigger_spans[pid] = spans
    return posts, truth


class ScriptedAnnotator:
    """Oracle annotator: answers every task from the planted truth."""

    def __init__(self, truth: SyntheticTruth, annotator_id: str = "oracle"):
        self.truth = truth
        self.annotator_id = annotator_id

    def relevance(self, post_id: str) -> bool:
        return self.truth.related[post_id]

    def emotions(self, post_id: str) -> set:
        return set(self.truth.emotions[post_id])

    def triggers(self, post_id: str) -> list:
        return [[s.emotion, s.token_start, s.token_end] for s in self.truth.trigger_spans[post_id]]


# -- small fixed fixtures ------------------------------------------------------


def crf_toy_dataset() -> list[tuple[list[str], list[tuple[int, int]]]]:
    """Tiny tagging set where the span is always the token "lockdown"."""
    sentences = [
        "angry about the lockdown tonight",
        "lockdown again in my city",
        "they extended the lockdown here",
        "no end to this lockdown",
        "quiet evening with good coffee",
        "watching football all day long",
    ]
    out = []
    for sent in sentences:
        toks = sent.split()
        spans = [(i, i + 1) for i, t in enumerate(toks) if t == "lockdown"]
        out.append((toks, spans))
    return out


def planted_mention_corpus(n_mentions: int = 200, seed: int = 0,
                           start: datetime.date = datetime.date(2020, 3, 1)):
    """Two-plant mention set: disjoint vocabularies on disjoint date ranges.

    Returns (mentions, labels) where labels[i] is the plant of mention i.
    """
    rng = np.random.default_rng(seed)
    vocab_a = ["curfew", "police", "fines", "patrol", "checkpoint"]
    vocab_b = ["stocks", "market", "savings", "prices", "rent"]
    mentions, labels = [], []
    for i in range(n_mentions):
        plant = int(rng.random() < 0.5)
        vocab = vocab_b if plant else vocab_a
        day = start + datetime.timedelta(days=int(rng.integers(0, 10)) + (10 if plant else 0))
        k = 2 + int(rng.integers(2))
        tokens = tuple(str(t) for t in rng.choice(vocab, size=k, replace=True))
        mentions.append(TriggerMention(
            mention_id=f"m{i}", post_id=f"p{i}", emotion="anger", tokens=tokens, date=day,
        ))
        labels.append(plant)
    return mentions, labels
