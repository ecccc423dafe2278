"""Tokenization, hashed n-gram features and tf-idf keyword ranking.

Everything here is pure and deterministic: the feature hash is seedless
(blake2b over the n-gram bytes), so feature indices are stable across
runs, machines and Python versions.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import re
from collections import Counter
from dataclasses import dataclass

from scipy.sparse import csr_matrix
from sklearn.base import BaseEstimator, TransformerMixin

DEFAULT_DIM = 2 ** 18

# URLs first so "x.co" is not split into word tokens; hashtags and user
# mentions stay single tokens; any other non-space symbol is one token.
_TOKEN_RE = re.compile(
    r"""
    https?://\S+ | www\.\S+     # URLs, collapsed to <url>
    | [#@]\w+                   # hashtags / user mentions
    | \w+                       # word characters
    | [^\w\s]                   # single punctuation symbol
    """,
    re.VERBOSE | re.UNICODE,
)

_URL_RE = re.compile(r"https?://\S+|www\.\S+")


@dataclass(frozen=True)
class Token:
    """One token: normalized form plus the exact source span.

    ``form`` is what every downstream consumer (features, harvesting,
    CRF) sees: lowercased, URLs collapsed to ``<url>``.  ``surface`` is
    the verbatim substring; ``start``/``end`` are byte offsets into the
    UTF-8 encoding of the source text, so ``surface`` always
    reconstructs from the source.
    """

    form: str
    surface: str
    start: int
    end: int


class TokenSequence:
    """Ordered tokens over one text, with non-overlapping source spans."""

    def __init__(self, text: str, tokens: list[Token]):
        self.text = text
        self.tokens = tokens

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]


def tokenize(text: str) -> TokenSequence:
    """Split ``text`` into lowercased tokens with byte spans.

    '#tag' and '@user' are kept whole, URLs become the single form
    ``<url>``, punctuation is one token per symbol.
    """
    # cumulative UTF-8 byte offset for every character position
    byte_at = list(itertools.accumulate((len(c.encode("utf-8")) for c in text), initial=0))
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        surface = m.group(0)
        form = "<url>" if _URL_RE.fullmatch(surface) else surface.lower()
        tokens.append(Token(form=form, surface=surface, start=byte_at[m.start()], end=byte_at[m.end()]))
    return TokenSequence(text, tokens)


def stable_hash(feature: str, dim: int) -> int:
    """Map a feature string into ``[0, dim)`` with a fixed, seedless hash."""
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def ngrams(forms: list[str], max_n: int) -> list[str]:
    """All 1..max_n-grams of ``forms``; n-grams joined by a single space."""
    out = []
    for n in range(1, max_n + 1):
        out.extend(" ".join(forms[i : i + n]) for i in range(len(forms) - n + 1))
    return out


def featurize(tokens: TokenSequence | list[str], max_n: int = 2, dim: int = DEFAULT_DIM) -> dict[int, float]:
    """Hashed n-gram counts as a sparse {index: count} map.

    Indices are always < ``dim`` and zero counts are never stored; the
    sum of values equals the number of emitted n-grams.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    forms = tokens.forms if isinstance(tokens, TokenSequence) else list(tokens)
    counts: dict[int, float] = {}
    for gram in ngrams(forms, max_n):
        idx = stable_hash(gram, dim)
        counts[idx] = counts.get(idx, 0.0) + 1.0
    return counts


def stack_features(vectors: list[dict[int, float]], dim: int) -> csr_matrix:
    """Stack sparse feature maps into one CSR matrix of shape (n, dim)."""
    data, indices, indptr = [], [], [0]
    for vec in vectors:
        for idx in sorted(vec):
            indices.append(idx)
            data.append(vec[idx])
        indptr.append(len(indices))
    return csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


class HashingNgramVectorizer(BaseEstimator, TransformerMixin):
    """Stateless text-to-CSR transformer over hashed n-gram counts.

    ``fit`` is a no-op (the hash needs no vocabulary); provided so the
    vectorizer composes with sklearn pipelines.
    """

    def __init__(self, max_n: int = 2, dim: int = DEFAULT_DIM):
        self.max_n = max_n
        self.dim = dim

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> csr_matrix:
        """X: iterable of raw strings, TokenSequence, or form lists."""
        vectors = []
        for item in X:
            if isinstance(item, str):
                item = tokenize(item)
            vectors.append(featurize(item, max_n=self.max_n, dim=self.dim))
        return stack_features(vectors, self.dim)


@dataclass(frozen=True)
class KeywordScore:
    term: str
    score: float


def _sorted_keywords(scores: dict[str, float]) -> list[KeywordScore]:
    # descending score, ties broken lexicographically
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [KeywordScore(term=t, score=s) for t, s in ranked]


def tfidf_rank(target_docs: list[str], background_docs: list[str], top_k: int = 100) -> list[KeywordScore]:
    """Rank target-doc terms by tf * ln(N / df).

    tf is the raw count over the concatenated target docs; df is the
    document frequency over the background docs and N their number, so
    a term found in every background doc scores exactly 0.  Terms never
    seen in the background fall back to df = 1 (maximal idf).
    """
    if len(background_docs) < 1:
        raise ValueError("need at least one background document")
    if not target_docs:
        return []
    tf = Counter()
    for doc in target_docs:
        tf.update(tokenize(doc).forms)
    n_docs = len(background_docs)
    df = Counter()
    for doc in background_docs:
        df.update(set(tokenize(doc).forms))
    scores = {term: count * math.log(n_docs / max(df[term], 1)) for term, count in tf.items()}
    return _sorted_keywords(scores)[:top_k]


def write_keyword_list(path, keywords: list[KeywordScore]) -> None:
    """One ``term<TAB>score`` per line, descending score."""
    with open(path, "w", encoding="utf-8") as fh:
        for kw in keywords:
            fh.write(f"{kw.term}\t{kw.score!r}\n")


def read_keyword_list(path) -> list[KeywordScore]:
    keywords = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            term, _, score = line.partition("\t")
            keywords.append(KeywordScore(term=term, score=float(score) if score else 0.0))
    return keywords
