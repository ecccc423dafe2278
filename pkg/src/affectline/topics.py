"""Date-aware LDA over trigger mentions, fit by collapsed Gibbs sampling.

Each topic carries a distribution over trigger words *and* a
distribution over calendar dates; every token emits its mention's date
from the topic's date distribution, which pulls same-day mentions into
the same topic.  One fitted state covers the mentions of one emotion.
"""

from __future__ import annotations

import datetime
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corpus import DailyPartition
from .trends import IntensitySeries

CHECKPOINT_FORMAT = "affectline-lda-v1"

# compact function-word list used to normalize mention tokens
MENTION_STOPWORDS = frozenset(
    """a an and are as at be been by for from had has have he her his i in is
    it its me my of on or our she so that the their them they this to was we
    were will with you your""".split()
)


@dataclass(frozen=True)
class TriggerMention:
    """Normalized trigger span: lowercased tokens minus stopwords."""

    mention_id: str
    post_id: str
    emotion: str
    tokens: tuple[str, ...]
    date: datetime.date


def normalize_mention(mention_id: str, post_id: str, emotion: str, tokens,
                      date: datetime.date) -> TriggerMention | None:
    """Build a mention, or None when nothing survives normalization."""
    norm = tuple(t.lower() for t in tokens if t.lower() not in MENTION_STOPWORDS and t.strip())
    if not norm:
        return None
    return TriggerMention(mention_id=mention_id, post_id=post_id, emotion=emotion,
                          tokens=norm, date=date)


class DateLda:
    """Collapsed Gibbs sampler with per-topic word and date distributions.

    The resampling weight for topic k at a token of word w and date d is
    (n_mk + alpha) * (n_kw + beta) / (n_k + V beta)
                   * (n_kd + gamma) / (n_k + D gamma),
    all counts excluding the token itself.  The fit keeps the
    assignments of the last sweep only.
    """

    def __init__(self, n_topics: int = 20, iterations: int = 1000,
                 alpha: float | None = None, beta: float = 0.01,
                 gamma: float = 0.01, seed: int = 0):
        self.n_topics = n_topics
        self.iterations = iterations
        self.alpha = alpha if alpha is not None else 50.0 / n_topics
        self.beta = beta
        self.gamma = gamma
        self.seed = seed

    # -- state bookkeeping -------------------------------------------------

    def _index(self, mentions: list[TriggerMention]) -> None:
        self.mentions_ = list(mentions)
        self.vocab_ = sorted({t for m in mentions for t in m.tokens})
        self.word_id_ = {w: i for i, w in enumerate(self.vocab_)}
        self.dates_ = sorted({m.date for m in mentions})
        self.date_id_ = {d: i for i, d in enumerate(self.dates_)}
        self.mention_id_ = {m.mention_id: i for i, m in enumerate(mentions)}
        self.tokens_w_ = [np.array([self.word_id_[t] for t in m.tokens]) for m in mentions]
        self.tokens_d_ = np.array([self.date_id_[m.date] for m in mentions])

    def _zero_counts(self) -> None:
        K, V, D, M = self.n_topics, len(self.vocab_), len(self.dates_), len(self.mentions_)
        self.n_mk_ = np.zeros((M, K))
        self.n_kw_ = np.zeros((K, V))
        self.n_kd_ = np.zeros((K, D))
        self.n_k_ = np.zeros(K)
        self.z_ = [np.zeros(len(w), dtype=int) for w in self.tokens_w_]

    def _inc(self, m: int, k: int, w: int, d: int, sign: float) -> None:
        self.n_mk_[m, k] += sign
        self.n_kw_[k, w] += sign
        self.n_kd_[k, d] += sign
        self.n_k_[k] += sign

    def _conditional(self, m: int, w: int, d: int) -> np.ndarray:
        """Normalized sampling distribution with the token removed."""
        V, D = len(self.vocab_), len(self.dates_)
        p = (self.n_mk_[m] + self.alpha) \
            * (self.n_kw_[:, w] + self.beta) / (self.n_k_ + V * self.beta) \
            * (self.n_kd_[:, d] + self.gamma) / (self.n_k_ + D * self.gamma)
        return p / p.sum()

    @staticmethod
    def _draw(p: np.ndarray, rng: np.random.Generator) -> int:
        cum = np.cumsum(p)
        return min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(p) - 1)

    # -- fitting -------------------------------------------------------------

    def fit(self, mentions: list[TriggerMention], trace_hook=None,
            average_sweeps: int = 0) -> "DateLda":
        """Run the Gibbs chain; bit-deterministic for a fixed seed.

        By default posteriors come from the last sweep's assignments
        alone; ``average_sweeps=n`` instead averages the mention-topic
        counts over the final n sweeps.  ``trace_hook``, when given,
        receives a copy of every sampling distribution in iteration
        order (used by reference checks).
        """
        if not mentions:
            raise ValueError("empty mention set")
        if len(mentions) < self.n_topics:
            warnings.warn(f"only {len(mentions)} mentions for {self.n_topics} topics")
        self._index(mentions)
        self._zero_counts()
        self.avg_n_mk_ = None
        self.rng_ = np.random.default_rng(self.seed)
        # init: uniform topic per token, in mention/token order
        for m, (ws, d) in enumerate(zip(self.tokens_w_, self.tokens_d_)):
            for j, w in enumerate(ws):
                k = int(self.rng_.integers(self.n_topics))
                self.z_[m][j] = k
                self._inc(m, k, int(w), int(d), +1)
        self.completed_iterations_ = 0
        if average_sweeps > 0:
            head = max(self.iterations - average_sweeps, 0)
            self.continue_sweeps(head, trace_hook)
            acc = np.zeros_like(self.n_mk_)
            for _ in range(self.iterations - head):
                self.continue_sweeps(1, trace_hook)
                acc += self.n_mk_
            self.avg_n_mk_ = acc / max(self.iterations - head, 1)
        else:
            self.continue_sweeps(self.iterations, trace_hook)
        return self

    def continue_sweeps(self, n: int, trace_hook=None) -> "DateLda":
        """Run ``n`` more Gibbs sweeps on the chain's own RNG stream."""
        for _ in range(n):
            self._sweep(self.rng_, trace_hook)
        self.completed_iterations_ += n
        return self

    def _sweep(self, rng: np.random.Generator, trace_hook=None) -> None:
        for m, (ws, d) in enumerate(zip(self.tokens_w_, self.tokens_d_)):
            d = int(d)
            for j, w in enumerate(ws):
                w = int(w)
                k_old = int(self.z_[m][j])
                self._inc(m, k_old, w, d, -1)
                p = self._conditional(m, w, d)
                if trace_hook is not None:
                    trace_hook(p.copy())
                k_new = self._draw(p, rng)
                self.z_[m][j] = k_new
                self._inc(m, k_new, w, d, +1)

    def check_consistency(self) -> None:
        """Raise when count tables disagree with the assignments."""
        n_mk = np.zeros_like(self.n_mk_)
        n_kw = np.zeros_like(self.n_kw_)
        n_kd = np.zeros_like(self.n_kd_)
        n_k = np.zeros_like(self.n_k_)
        for m, (ws, d) in enumerate(zip(self.tokens_w_, self.tokens_d_)):
            for j, w in enumerate(ws):
                k = int(self.z_[m][j])
                n_mk[m, k] += 1
                n_kw[k, int(w)] += 1
                n_kd[k, int(d)] += 1
                n_k[k] += 1
        for mine, rebuilt, name in ((self.n_mk_, n_mk, "n_mk"), (self.n_kw_, n_kw, "n_kw"),
                                    (self.n_kd_, n_kd, "n_kd"), (self.n_k_, n_k, "n_k")):
            if not np.array_equal(mine, rebuilt):
                raise AssertionError(f"count table {name} inconsistent with assignments")

    # -- posteriors ------------------------------------------------------------

    def mention_posterior(self, mention) -> np.ndarray:
        """p(k | mention) = (n_mk + alpha) / (len + K alpha); sums to 1.

        Uses the averaged counts when the fit ran with averaging.
        """
        if isinstance(mention, TriggerMention):
            mention = mention.mention_id
        if mention not in self.mention_id_:
            raise KeyError(f"unknown mention {mention!r}")
        m = self.mention_id_[mention]
        length = len(self.tokens_w_[m])
        counts = self.n_mk_[m] if getattr(self, "avg_n_mk_", None) is None else self.avg_n_mk_[m]
        return (counts + self.alpha) / (length + self.n_topics * self.alpha)

    def topic_word_probs(self, k: int) -> np.ndarray:
        return (self.n_kw_[k] + self.beta) / (self.n_k_[k] + len(self.vocab_) * self.beta)

    def topic_date_probs(self, k: int) -> np.ndarray:
        return (self.n_kd_[k] + self.gamma) / (self.n_k_[k] + len(self.dates_) * self.gamma)

    def dominant_topic(self, mention) -> int:
        return int(np.argmax(self.mention_posterior(mention)))


def gibbs_fit(mentions, n_topics: int = 20, iterations: int = 1000,
              alpha: float | None = None, beta: float = 0.01, gamma: float = 0.01,
              seed: int = 0) -> DateLda:
    """Fit one emotion's mentions; defaults are 20 topics, 1000 sweeps."""
    return DateLda(n_topics=n_topics, iterations=iterations, alpha=alpha,
                   beta=beta, gamma=gamma, seed=seed).fit(mentions)


# -- reporting / curation -----------------------------------------------------


@dataclass
class TopicSummary:
    topic: int
    top_words: list[str]
    top_dates: list[datetime.date]
    mention_count: int
    status: str = "kept"


@dataclass
class TopicReport:
    emotion: str
    chain_seed: int = 0
    topics: list[TopicSummary] = field(default_factory=list)


def topic_report(state: DateLda, emotion: str = "", top_m: int = 10,
                 curation: dict[int, str] | None = None) -> TopicReport:
    """Top words/dates per topic; ties go lexicographic (words) or
    chronological (dates).  The report carries its chain's seed so
    parallel chains stay tellable apart."""
    curation = curation or {}
    counts = [0] * state.n_topics
    for m in state.mentions_:
        counts[state.dominant_topic(m)] += 1
    report = TopicReport(emotion=emotion, chain_seed=state.seed)
    for k in range(state.n_topics):
        wp = state.topic_word_probs(k)
        order = sorted(range(len(state.vocab_)), key=lambda i: (-wp[i], state.vocab_[i]))
        dp = state.topic_date_probs(k)
        dorder = sorted(range(len(state.dates_)), key=lambda i: (-dp[i], state.dates_[i]))
        report.topics.append(TopicSummary(
            topic=k,
            top_words=[state.vocab_[i] for i in order[:top_m]],
            top_dates=[state.dates_[i] for i in dorder[:top_m]],
            mention_count=counts[k],
            status=curation.get(k, "kept"),
        ))
    return report


def subcategory_intensity(partitions: list[DailyPartition], state: DateLda,
                          kept_topics=None) -> dict[int, IntensitySeries]:
    """Eq-style daily subcategory scores for the state's emotion.

    S(t, k) sums p(k | mention) over the day's mentions and divides by
    the day's total post count; days with posts but no mentions score 0.
    Discarded topics are excluded via ``kept_topics``.
    """
    if kept_topics is None:
        kept_topics = range(state.n_topics)
    kept = sorted(set(kept_topics))
    emotions = {m.emotion for m in state.mentions_}
    emotion = emotions.pop() if len(emotions) == 1 else ""
    by_date: dict[datetime.date, np.ndarray] = {}
    for m in state.mentions_:
        totals = by_date.setdefault(m.date, np.zeros(state.n_topics))
        totals += state.mention_posterior(m)
    out: dict[int, IntensitySeries] = {}
    for k in kept:
        series = IntensitySeries(subject=f"{emotion}/{k}" if emotion else str(k))
        for part in partitions:
            if len(part) == 0:
                continue
            total = by_date.get(part.date)
            series.points[part.date] = float(total[k]) / len(part) if total is not None else 0.0
        out[k] = series
    return out


class CurationStore:
    """Human keep/discard decisions per (emotion, topic), persisted."""

    def __init__(self, path):
        self.path = path
        self.status: dict[str, dict[int, str]] = {}
        self._load()

    def _load(self) -> None:
        try:
            with open(self.path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            return
        self.status = {emo: {int(k): v for k, v in topics.items()} for emo, topics in raw.items()}

    def save(self) -> None:
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump({emo: {str(k): v for k, v in topics.items()}
                       for emo, topics in self.status.items()}, fh, sort_keys=True, indent=1)

    def set(self, emotion: str, topic: int, status: str) -> None:
        if status not in ("kept", "discarded"):
            raise ValueError(f"status must be kept or discarded, got {status!r}")
        self.status.setdefault(emotion, {})[topic] = status
        self.save()

    def get(self, emotion: str, topic: int) -> str:
        return self.status.get(emotion, {}).get(topic, "kept")

    def kept_topics(self, emotion: str, n_topics: int) -> list[int]:
        return [k for k in range(n_topics) if self.get(emotion, k) == "kept"]


# -- files ---------------------------------------------------------------------


def write_mentions(path, mentions: list[TriggerMention]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in mentions:
            fh.write(json.dumps({
                "mention_id": m.mention_id, "post_id": m.post_id, "emotion": m.emotion,
                "date": m.date.isoformat(), "tokens": list(m.tokens),
            }, ensure_ascii=False, sort_keys=True) + "\n")


def read_mentions(path) -> list[TriggerMention]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            d = json.loads(line)
            out.append(TriggerMention(
                mention_id=d["mention_id"], post_id=d["post_id"], emotion=d["emotion"],
                tokens=tuple(d["tokens"]), date=datetime.date.fromisoformat(d["date"]),
            ))
    return out


def save_checkpoint(path, state: DateLda) -> None:
    """Versioned checkpoint with assignments, counts, seed and iteration."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "n_topics": state.n_topics, "iterations": state.iterations,
        "alpha": state.alpha, "beta": state.beta, "gamma": state.gamma,
        "seed": state.seed, "completed_iterations": state.completed_iterations_,
        "vocab": state.vocab_, "dates": [d.isoformat() for d in state.dates_],
        "mentions": [{
            "mention_id": m.mention_id, "post_id": m.post_id, "emotion": m.emotion,
            "date": m.date.isoformat(), "tokens": list(m.tokens),
        } for m in state.mentions_],
        "z": [z.tolist() for z in state.z_],
        "counts": {
            "n_mk": state.n_mk_.tolist(), "n_kw": state.n_kw_.tolist(),
            "n_kd": state.n_kd_.tolist(), "n_k": state.n_k_.tolist(),
        },
        "avg_n_mk": None if getattr(state, "avg_n_mk_", None) is None
        else state.avg_n_mk_.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_checkpoint(path) -> DateLda:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format in {path}")
    state = DateLda(n_topics=d["n_topics"], iterations=d["iterations"], alpha=d["alpha"],
                    beta=d["beta"], gamma=d["gamma"], seed=d["seed"])
    mentions = [TriggerMention(
        mention_id=m["mention_id"], post_id=m["post_id"], emotion=m["emotion"],
        tokens=tuple(m["tokens"]), date=datetime.date.fromisoformat(m["date"]),
    ) for m in d["mentions"]]
    state._index(mentions)
    state._zero_counts()
    state.z_ = [np.array(z, dtype=int) for z in d["z"]]
    state.n_mk_ = np.array(d["counts"]["n_mk"], dtype=float)
    state.n_kw_ = np.array(d["counts"]["n_kw"], dtype=float)
    state.n_kd_ = np.array(d["counts"]["n_kd"], dtype=float)
    state.n_k_ = np.array(d["counts"]["n_k"], dtype=float)
    state.avg_n_mk_ = None if d.get("avg_n_mk") is None else np.array(d["avg_n_mk"], dtype=float)
    state.completed_iterations_ = d["completed_iterations"]
    # resumed chains get a fresh deterministic stream keyed off progress
    state.rng_ = np.random.default_rng([state.seed, state.completed_iterations_])
    state.check_consistency()
    return state
