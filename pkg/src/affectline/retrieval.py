"""Bootstrapped harvesting: keywords -> sample -> label -> train -> expand.

A round is a small state machine persisted to disk after every
transition, so the human labeling pause survives process restarts.  Only
one round per corpus is open at a time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, sample_uniform
from .emoclass import MlpBinaryClassifier, save_model
from .textfeat import KeywordScore, featurize, stable_hash, stack_features, tokenize

FORMAT_HEADER = "#affectline-v1"


@dataclass
class KeywordList:
    round: int
    entries: list[KeywordScore] = field(default_factory=list)

    def terms(self) -> list[str]:
        return [e.term for e in self.entries]


@dataclass
class BootstrapRound:
    """One bootstrap round; metrics freeze once status reaches 'closed'."""

    index: int
    keywords: KeywordList
    status: str = "new"  # new -> awaiting_labels -> closed
    harvested_count: int = 0
    harvested_ids: list[str] = field(default_factory=list)
    sample_ids: list[str] = field(default_factory=list)
    split: dict[str, str] = field(default_factory=dict)
    model_id: str = ""
    test_f1: float | None = None
    next_keywords: KeywordList | None = None


def token_forms(corpus: Corpus) -> dict[str, list[str]]:
    """Tokenized forms per post id; harvesting and saliency reuse this."""
    return {p.id: tokenize(p.text).forms for p in corpus.posts}


def harvest(corpus: Corpus, keywords, forms: dict[str, list[str]] | None = None) -> set[str]:
    """Post ids mentioning any keyword.

    A single-word keyword matches a token (case-insensitive); a
    multi-word keyword must appear as a contiguous token sequence.
    """
    terms = [k.term if isinstance(k, KeywordScore) else k for k in keywords]
    singles = {t.lower() for t in terms if " " not in t.strip()}
    multis = [t.lower().split() for t in terms if " " in t.strip()]
    if forms is None:
        forms = token_forms(corpus)
    matched: set[str] = set()
    for pid, toks in forms.items():
        if pid not in corpus:
            continue
        if singles and not singles.isdisjoint(toks):
            matched.add(pid)
            continue
        for seq in multis:
            n = len(seq)
            if n and any(toks[i : i + n] == seq for i in range(len(toks) - n + 1)):
                matched.add(pid)
                break
    return matched


def make_split(labeled_ids, seed: int) -> dict[str, str]:
    """Deterministic 8:1:1 split; the rounding remainder goes to train."""
    ids = sorted(labeled_ids)
    if len(ids) < 10:
        raise ValueError("insufficient labels: need at least 10")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    n = len(ids)
    n_test = n // 10
    n_dev = n // 10
    split = {}
    for pos, idx in enumerate(order):
        if pos < n_test:
            split[ids[idx]] = "test"
        elif pos < n_test + n_dev:
            split[ids[idx]] = "dev"
        else:
            split[ids[idx]] = "train"
    return split


def corpus_stopwords(forms: dict[str, list[str]], n: int = 50) -> set[str]:
    """The n highest document-frequency tokens; excluded from expansion."""
    df: dict[str, int] = {}
    for toks in forms.values():
        for tok in set(toks):
            df[tok] = df.get(tok, 0) + 1
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
    return {tok for tok, _ in ranked[:n]}


def expand_keywords(model: MlpBinaryClassifier, positive_forms: dict[str, list[str]],
                    top_k: int, max_n: int = 2, dim: int | None = None,
                    stopwords: set[str] | None = None,
                    previous: KeywordList | None = None,
                    replace: bool = False) -> KeywordList:
    """Rank tokens by first-order saliency of the relevance head.

    A token's saliency is the mean, over positive posts containing it,
    of |d p(related) / d h_token| at the post's feature vector.  The
    previous round's keywords are retained (union) unless ``replace``.
    """
    if not hasattr(model, "W1_"):
        raise ValueError("model is not trained")
    if not positive_forms:
        raise ValueError("need at least one positive post")
    dim = dim if dim is not None else model.n_features_in_
    stopwords = stopwords or set()
    totals: dict[str, float] = {}
    counts: dict[str, int] = {}
    for toks in positive_forms.values():
        vec = featurize(toks, max_n=max_n, dim=dim)
        uniq = sorted(set(toks) - stopwords)
        if not uniq:
            continue
        idx = [stable_hash(t, dim) for t in uniq]
        grads = np.abs(model.input_gradient(vec, indices=idx))
        for tok, g in zip(uniq, grads):
            totals[tok] = totals.get(tok, 0.0) + float(g)
            counts[tok] = counts.get(tok, 0) + 1
    saliency = {tok: totals[tok] / counts[tok] for tok in totals}
    ranked = sorted(saliency.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    entries = [KeywordScore(term=t, score=s) for t, s in ranked]
    next_round = (previous.round + 1) if previous is not None else 0
    if previous is not None and not replace:
        have = {e.term for e in entries}
        merged = entries + [e for e in previous.entries if e.term not in have]
        merged.sort(key=lambda e: (-e.score, e.term))
        entries = merged
    return KeywordList(round=next_round, entries=entries)


# -- round persistence -------------------------------------------------------


def write_round(path, rnd: BootstrapRound) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(FORMAT_HEADER + "\n")
        fh.write("[round]\n")
        fh.write(f"index\t{rnd.index}\n")
        fh.write(f"status\t{rnd.status}\n")
        fh.write(f"harvested_count\t{rnd.harvested_count}\n")
        if rnd.model_id:
            fh.write(f"model_id\t{rnd.model_id}\n")
        if rnd.test_f1 is not None:
            fh.write(f"test_f1\t{rnd.test_f1!r}\n")
        fh.write("[keywords]\n")
        for e in rnd.keywords.entries:
            fh.write(f"{e.term}\t{e.score!r}\n")
        fh.write("[harvested]\n")
        for pid in rnd.harvested_ids:
            fh.write(pid + "\n")
        fh.write("[sample]\n")
        for pid in rnd.sample_ids:
            fh.write(pid + "\n")
        fh.write("[split]\n")
        for pid in sorted(rnd.split):
            fh.write(f"{pid}\t{rnd.split[pid]}\n")
        if rnd.next_keywords is not None:
            fh.write("[next_keywords]\n")
            for e in rnd.next_keywords.entries:
                fh.write(f"{e.term}\t{e.score!r}\n")


def read_round(path) -> BootstrapRound:
    section = None
    meta: dict[str, str] = {}
    keywords: list[KeywordScore] = []
    next_keywords: list[KeywordScore] = []
    harvested: list[str] = []
    sample: list[str] = []
    split: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line == FORMAT_HEADER:
                continue
            if line.startswith("["):
                section = line.strip("[]")
                continue
            if section == "round":
                key, _, val = line.partition("\t")
                meta[key] = val
            elif section == "keywords":
                term, _, score = line.partition("\t")
                keywords.append(KeywordScore(term, float(score)))
            elif section == "next_keywords":
                term, _, score = line.partition("\t")
                next_keywords.append(KeywordScore(term, float(score)))
            elif section == "harvested":
                harvested.append(line)
            elif section == "sample":
                sample.append(line)
            elif section == "split":
                pid, _, part = line.partition("\t")
                split[pid] = part
    index = int(meta["index"])
    rnd = BootstrapRound(index=index, keywords=KeywordList(round=index, entries=keywords))
    rnd.status = meta["status"]
    rnd.harvested_count = int(meta.get("harvested_count", 0))
    rnd.harvested_ids = harvested
    rnd.model_id = meta.get("model_id", "")
    rnd.test_f1 = float(meta["test_f1"]) if "test_f1" in meta else None
    rnd.sample_ids = sample
    rnd.split = split
    if next_keywords:
        rnd.next_keywords = KeywordList(round=index + 1, entries=next_keywords)
    return rnd


class BootstrapRunner:
    """Drives bootstrap rounds over a corpus, persisting to ``out_dir``.

    ``advance`` moves the open round as far as the available labels
    allow and returns it; call it again once more labels have arrived.
    """

    def __init__(self, corpus: Corpus, out_dir, sample_size: int = 1000,
                 top_k: int = 100, max_n: int = 2, dim: int = 2 ** 18,
                 seed: int = 0, replace_keywords: bool = False,
                 stopword_count: int = 50, hyper: dict | None = None):
        self.corpus = corpus
        self.out_dir = str(out_dir)
        self.sample_size = sample_size
        self.top_k = top_k
        self.max_n = max_n
        self.dim = dim
        self.seed = seed
        self.replace_keywords = replace_keywords
        self.hyper = hyper or {}
        self.forms = token_forms(corpus)
        self.stopwords = corpus_stopwords(self.forms, n=stopword_count)
        os.makedirs(self.out_dir, exist_ok=True)

    def _round_path(self, index: int) -> str:
        return os.path.join(self.out_dir, f"round-{index}.state")

    def rounds(self) -> list[BootstrapRound]:
        out = []
        index = 0
        while os.path.exists(self._round_path(index)):
            out.append(read_round(self._round_path(index)))
            index += 1
        return out

    def current(self) -> BootstrapRound | None:
        rounds = self.rounds()
        return rounds[-1] if rounds else None

    def start(self, seed_keywords: list[KeywordScore]) -> BootstrapRound:
        if os.path.exists(self._round_path(0)):
            raise RuntimeError("bootstrap already started in this directory")
        rnd = BootstrapRound(index=0, keywords=KeywordList(round=0, entries=list(seed_keywords)))
        self._open(rnd)
        return rnd

    def _open(self, rnd: BootstrapRound) -> None:
        matched = sorted(harvest(self.corpus, rnd.keywords.entries, forms=self.forms))
        rnd.harvested_ids = matched
        rnd.harvested_count = len(matched)
        rnd.sample_ids = sample_uniform(matched, self.sample_size, seed=self.seed + rnd.index)
        rnd.status = "awaiting_labels"
        write_round(self._round_path(rnd.index), rnd)

    def advance(self, relevance_labels: dict[str, bool]) -> BootstrapRound:
        """Close the open round if its sample is fully labeled.

        ``relevance_labels`` maps post id to the human decision; ids
        missing from it leave the round open (resumable later).
        """
        rnd = self.current()
        if rnd is None:
            raise RuntimeError("no open round: call start() first")
        if rnd.status == "closed":
            nxt = BootstrapRound(index=rnd.index + 1,
                                 keywords=rnd.next_keywords or rnd.keywords)
            self._open(nxt)
            return nxt
        pending = [pid for pid in rnd.sample_ids if pid not in relevance_labels]
        if pending:
            return rnd

        labels = {pid: bool(relevance_labels[pid]) for pid in rnd.sample_ids}
        rnd.split = make_split(rnd.sample_ids, seed=self.seed + rnd.index)
        parts = {name: [pid for pid in rnd.sample_ids if rnd.split[pid] == name]
                 for name in ("train", "dev", "test")}

        def matrix(ids):
            vecs = [featurize(self.forms[pid], max_n=self.max_n, dim=self.dim) for pid in ids]
            return stack_features(vecs, self.dim)

        y = {name: np.array([1.0 if labels[pid] else 0.0 for pid in parts[name]]) for name in parts}
        model = MlpBinaryClassifier(seed=self.seed + rnd.index, **self.hyper)
        model.fit(matrix(parts["train"]), y["train"], dev=(matrix(parts["dev"]), y["dev"]))

        test_pred = model.predict(matrix(parts["test"]))
        rnd.test_f1 = _f1(test_pred, y["test"])
        rnd.model_id = f"relevance-round{rnd.index}.json"
        save_model(os.path.join(self.out_dir, rnd.model_id), model)

        # expansion sees only train/dev positives, never test posts
        positives = {pid: self.forms[pid] for pid in parts["train"] + parts["dev"] if labels[pid]}
        rnd.next_keywords = expand_keywords(
            model, positives, top_k=self.top_k, max_n=self.max_n, dim=self.dim,
            stopwords=self.stopwords, previous=rnd.keywords, replace=self.replace_keywords,
        )
        rnd.status = "closed"
        write_round(self._round_path(rnd.index), rnd)
        return rnd


def _f1(pred, gold) -> float:
    pred = np.asarray(pred).astype(bool)
    gold = np.asarray(gold).astype(bool)
    tp = int(np.sum(pred & gold))
    fp = int(np.sum(pred & ~gold))
    fn = int(np.sum(~pred & gold))
    return 0.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)
