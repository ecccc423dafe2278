"""Linear-chain CRF over BIO tags for emotion-trigger span extraction.

One shared tagger serves all six emotions, with the emotion injected as
a categorical feature (far too few span annotations exist at desk scale
to train six separate taggers).  The O -> I transition is a structural
-inf: no decoded or scored path can enter a span other than through B.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from .textfeat import TokenSequence, stable_hash

TAGS = ("B", "I", "O")
_B, _I, _O = 0, 1, 2

DEFAULT_CRF_DIM = 2 ** 16

MODEL_FORMAT = "affectline-crf-v1"


@dataclass(frozen=True)
class TriggerSpan:
    """Half-open token span naming what an emotion is directed at."""

    post_id: str
    emotion: str
    token_start: int
    token_end: int
    surface: str = ""

    def key(self) -> tuple:
        return (self.post_id, self.emotion, self.token_start, self.token_end)


@dataclass
class SequenceFeatures:
    """Per-position hashed feature ids plus optional dense side features."""

    indices: list[list[int]]
    dense: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.indices)


def featurize_sequence(tokens, emotion: str | None = None,
                       dense: np.ndarray | None = None,
                       dim: int = DEFAULT_CRF_DIM) -> SequenceFeatures:
    """Lexical window features, hashed.

    Per position: bias, token identity, lowercased form, 3-char
    prefix/suffix, previous/next form, and the emotion id when given.
    ``tokens`` may be a TokenSequence or a plain list of forms.
    """
    if isinstance(tokens, TokenSequence):
        forms = tokens.forms
        surfaces = tokens.surfaces
    else:
        forms = list(tokens)
        surfaces = forms
    n = len(forms)
    out = []
    for i in range(n):
        feats = [
            "bias",
            "tok=" + surfaces[i],
            "low=" + forms[i],
            "pre3=" + forms[i][:3],
            "suf3=" + forms[i][-3:],
            "prev=" + (forms[i - 1] if i > 0 else "<s>"),
            "next=" + (forms[i + 1] if i + 1 < n else "</s>"),
        ]
        if emotion is not None:
            # conjunctions let one shared tagger mark a token as a trigger
            # for one emotion and plain context for another
            feats.append("emo=" + emotion)
            feats.append("emo|low=" + emotion + "|" + forms[i])
            feats.append("emo|prev=" + emotion + "|" + (forms[i - 1] if i > 0 else "<s>"))
        out.append(sorted({stable_hash(f, dim) for f in feats}))
    if dense is not None:
        dense = np.asarray(dense, dtype=float)
        if dense.shape[0] != n:
            raise ValueError("dense feature rows must match sequence length")
    return SequenceFeatures(indices=out, dense=dense)


def bio_tags(length: int, spans: list[tuple[int, int]]) -> list[int]:
    """Tag indices for non-overlapping half-open spans."""
    tags = [_O] * length
    for start, end in spans:
        if not (0 <= start < end <= length):
            raise ValueError(f"span ({start}, {end}) out of range for length {length}")
        if any(tags[i] != _O for i in range(start, end)):
            raise ValueError("overlapping spans")
        tags[start] = _B
        for i in range(start + 1, end):
            tags[i] = _I
    return tags


class CrfTagger(BaseEstimator):
    """B/I/O linear-chain CRF trained by regularized gradient ascent.

    Parameters are zero-initialized (the conditional log-likelihood is
    concave, so the seed only matters for bookkeeping); training uses
    full-batch gradient ascent with exact forward-backward gradients.
    """

    def __init__(self, dim: int = DEFAULT_CRF_DIM, ext_width: int = 0,
                 l2: float = 0.01, lr: float = 0.5, epochs: int = 150, seed: int = 0):
        self.dim = dim
        self.ext_width = ext_width
        self.l2 = l2
        self.lr = lr
        self.epochs = epochs
        self.seed = seed

    # -- parameters -----------------------------------------------------

    def zero_init(self) -> "CrfTagger":
        self.Ws_ = np.zeros((self.dim, 3))
        self.Wd_ = np.zeros((self.ext_width, 3)) if self.ext_width else None
        self.T_ = np.zeros((3, 3))
        self.T_[_O, _I] = -np.inf
        self.history_: list[float] = []
        return self

    def _check_ready(self):
        if not hasattr(self, "Ws_"):
            raise ValueError("model is neither trained nor zero-initialized")

    def _emissions(self, x: SequenceFeatures) -> np.ndarray:
        E = np.zeros((len(x), 3))
        for i, idxs in enumerate(x.indices):
            if idxs:
                E[i] = self.Ws_[idxs].sum(axis=0)
        if x.dense is not None:
            if self.Wd_ is None or x.dense.shape[1] != self.Wd_.shape[0]:
                raise ValueError("external feature width does not match the model")
            E += x.dense @ self.Wd_
        return E

    # -- inference -------------------------------------------------------

    def _viterbi(self, E: np.ndarray) -> list[int]:
        L = E.shape[0]
        if L == 0:
            return []
        V = E[0].copy()
        back = np.zeros((L, 3), dtype=int)
        for i in range(1, L):
            scores = V[:, None] + self.T_  # (from, to)
            back[i] = np.argmax(scores, axis=0)  # ties -> lowest tag index (B < I < O)
            V = scores[back[i], np.arange(3)] + E[i]
        path = [int(np.argmax(V))]
        for i in range(L - 1, 0, -1):
            path.append(int(back[i][path[-1]]))
        return path[::-1]

    def decode(self, x: SequenceFeatures) -> list[str]:
        """Most probable BIO tag path; empty input gives an empty path."""
        self._check_ready()
        return [TAGS[t] for t in self._viterbi(self._emissions(x))]

    @staticmethod
    def _lse(M: np.ndarray, axis: int) -> np.ndarray:
        # logsumexp over one axis of a small matrix; tolerates -inf rows
        m = np.max(M, axis=axis)
        safe = np.where(np.isfinite(m), m, 0.0)
        out = safe + np.log(np.sum(np.exp(M - np.expand_dims(safe, axis)), axis=axis))
        return np.where(np.isfinite(m), out, -np.inf)

    def _forward_backward(self, E: np.ndarray):
        L = E.shape[0]
        alpha = np.zeros((L, 3))
        alpha[0] = E[0]
        for i in range(1, L):
            alpha[i] = E[i] + self._lse(alpha[i - 1][:, None] + self.T_, axis=0)
        log_z = float(logsumexp(alpha[-1]))
        beta = np.zeros((L, 3))
        for i in range(L - 2, -1, -1):
            beta[i] = self._lse(self.T_ + (E[i + 1] + beta[i + 1])[None, :], axis=1)
        return alpha, beta, log_z

    def marginals(self, x: SequenceFeatures) -> np.ndarray:
        """Posterior tag marginals, one row per position (rows sum to 1)."""
        self._check_ready()
        E = self._emissions(x)
        if E.shape[0] == 0:
            return np.zeros((0, 3))
        alpha, beta, log_z = self._forward_backward(E)
        return np.exp(alpha + beta - log_z)

    def _path_score(self, E: np.ndarray, tags) -> float:
        score = float(sum(E[i, t] for i, t in enumerate(tags)))
        score += float(sum(self.T_[tags[i - 1], tags[i]] for i in range(1, len(tags))))
        return score

    def sequence_log_likelihood(self, x: SequenceFeatures, tags) -> float:
        self._check_ready()
        E = self._emissions(x)
        if E.shape[0] == 0:
            return 0.0
        _, _, log_z = self._forward_backward(E)
        return self._path_score(E, tags) - log_z

    # -- training ----------------------------------------------------------

    def objective(self, X: list[SequenceFeatures], y: list) -> float:
        """Mean conditional log-likelihood minus (l2/2)||theta||^2."""
        self._check_ready()
        total = 0.0
        for x, tags in zip(X, y):
            tags = [TAGS.index(t) if isinstance(t, str) else int(t) for t in tags]
            if len(tags):
                total += self.sequence_log_likelihood(x, tags)
        total /= len(X)
        finite = np.isfinite(self.T_)
        total -= 0.5 * self.l2 * (
            float(np.sum(self.Ws_ ** 2))
            + (float(np.sum(self.Wd_ ** 2)) if self.Wd_ is not None else 0.0)
            + float(np.sum(self.T_[finite] ** 2))
        )
        return total

    def objective_and_grad(self, X: list[SequenceFeatures], y: list) -> tuple[float, dict]:
        """Mean conditional log-likelihood minus (l2/2)||theta||^2, with
        its exact gradient (forward-backward marginals)."""
        self._check_ready()
        n = len(X)
        gWs = np.zeros_like(self.Ws_)
        gWd = np.zeros_like(self.Wd_) if self.Wd_ is not None else None
        gT = np.zeros((3, 3))
        total = 0.0
        for x, tags in zip(X, y):
            tags = [TAGS.index(t) if isinstance(t, str) else int(t) for t in tags]
            E = self._emissions(x)
            L = E.shape[0]
            if L == 0:
                continue
            alpha, beta, log_z = self._forward_backward(E)
            total += self._path_score(E, tags) - log_z
            gamma = np.exp(alpha + beta - log_z)
            dE = -gamma
            for i, t in enumerate(tags):
                dE[i, t] += 1.0
            for i, idxs in enumerate(x.indices):
                gWs[idxs] += dE[i] / n
            if x.dense is not None and gWd is not None:
                gWd += (x.dense.T @ dE) / n
            for i in range(1, L):
                xi = np.exp(alpha[i - 1][:, None] + self.T_ + (E[i] + beta[i])[None, :] - log_z)
                gT -= xi / n
                gT[tags[i - 1], tags[i]] += 1.0 / n
        objective = total / n
        # L2 on learned weights; the banned transition stays structural
        finite = np.isfinite(self.T_)
        objective -= 0.5 * self.l2 * (
            float(np.sum(self.Ws_ ** 2))
            + (float(np.sum(self.Wd_ ** 2)) if self.Wd_ is not None else 0.0)
            + float(np.sum(self.T_[finite] ** 2))
        )
        gWs -= self.l2 * self.Ws_
        if gWd is not None:
            gWd -= self.l2 * self.Wd_
        gT[finite] -= self.l2 * self.T_[finite]
        gT[~finite] = 0.0
        return objective, {"Ws": gWs, "Wd": gWd, "T": gT}

    def _apply_step(self, g: dict, step: float) -> None:
        self.Ws_ += step * g["Ws"]
        if self.Wd_ is not None:
            self.Wd_ += step * g["Wd"]
        finite = np.isfinite(self.T_)
        self.T_[finite] += step * g["T"][finite]

    def fit(self, X: list[SequenceFeatures], y: list) -> "CrfTagger":
        """Gradient ascent with backtracking; the recorded objective
        never decreases.  Raises when no sequence has a span."""
        def has_b(tags):
            return any((t == "B" or t == _B) for t in tags)

        if not X or not any(has_b(tags) for tags in y):
            raise ValueError("no positive spans in the training data")
        widths = {x.dense.shape[1] for x in X if x.dense is not None}
        if widths:
            if len(widths) > 1:
                raise ValueError("inconsistent external feature widths")
            self.ext_width = widths.pop()
        self.zero_init()
        self.history_ = []
        step = self.lr
        for _ in range(self.epochs):
            obj, g = self.objective_and_grad(X, y)
            self.history_.append(obj)
            if len(self.history_) >= 2 and obj - self.history_[-2] < 1e-8:
                break  # converged
            accepted = False
            while step >= 1e-9:
                self._apply_step(g, step)
                if self.objective(X, y) >= obj - 1e-12:
                    accepted = True
                    step = min(step * 1.2, 16 * self.lr)
                    break
                self._apply_step(g, -step)  # backtrack
                step /= 2.0
            if not accepted:
                break  # flat gradient: converged
        return self

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        self._check_ready()
        finite = np.isfinite(self.T_)
        return {
            "dim": self.dim, "ext_width": self.ext_width, "l2": self.l2,
            "lr": self.lr, "epochs": self.epochs, "seed": self.seed,
            "Ws": self.Ws_.ravel().tolist(),
            "Wd": self.Wd_.ravel().tolist() if self.Wd_ is not None else None,
            "T": [[self.T_[i, j] if finite[i, j] else None for j in range(3)] for i in range(3)],
        }

    @staticmethod
    def from_dict(d: dict) -> "CrfTagger":
        crf = CrfTagger(dim=d["dim"], ext_width=d["ext_width"], l2=d["l2"],
                        lr=d["lr"], epochs=d["epochs"], seed=d["seed"])
        crf.zero_init()
        crf.Ws_ = np.array(d["Ws"], dtype=float).reshape(d["dim"], 3)
        if d["Wd"] is not None:
            crf.Wd_ = np.array(d["Wd"], dtype=float).reshape(d["ext_width"], 3)
        T = np.array([[(-np.inf if v is None else v) for v in row] for row in d["T"]])
        crf.T_ = T
        return crf


def save_crf(path, model: CrfTagger) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"format": MODEL_FORMAT, "model": model.to_dict()}, fh, sort_keys=True)


def load_crf(path) -> CrfTagger:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported CRF model format in {path}")
    return CrfTagger.from_dict(payload["model"])


# -- spans ----------------------------------------------------------------


def spans_from_tags(tags) -> list[tuple[int, int]]:
    """Maximal B(I)* runs as half-open spans; dangling I is ignored."""
    spans = []
    start = None
    for i, t in enumerate(tags):
        t = TAGS.index(t) if isinstance(t, str) else int(t)
        if t == _B:
            if start is not None:
                spans.append((start, i))
            start = i
        elif t == _I:
            if start is None:
                continue  # I without a B opens nothing
        else:
            if start is not None:
                spans.append((start, i))
                start = None
    if start is not None:
        spans.append((start, len(list(tags))))
    return spans


def span_prf(predicted, gold) -> dict:
    """Exact-match precision/recall/F1 over span identities.

    Spans compare on (post_id, emotion, start, end) for TriggerSpan
    inputs, or as given for plain tuples.  An empty prediction scores
    precision 0 against non-empty gold.
    """
    def keys(spans):
        return {s.key() if isinstance(s, TriggerSpan) else tuple(s) for s in spans}

    p_keys, g_keys = keys(predicted), keys(gold)
    tp = len(p_keys & g_keys)
    if p_keys:
        precision = tp / len(p_keys)
    else:
        precision = 1.0 if not g_keys else 0.0
    if g_keys:
        recall = tp / len(g_keys)
    else:
        recall = 1.0 if not p_keys else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return {"precision": precision, "recall": recall, "f1": f1}


def tag_post(model: CrfTagger, post_id: str, tokens, emotion: str,
             dense: np.ndarray | None = None) -> list[TriggerSpan]:
    """Decode one post for one emotion and materialize its spans."""
    x = featurize_sequence(tokens, emotion=emotion, dense=dense, dim=model.dim)
    tags = model.decode(x)
    forms = tokens.forms if isinstance(tokens, TokenSequence) else list(tokens)
    return [
        TriggerSpan(post_id=post_id, emotion=emotion, token_start=s, token_end=e,
                    surface=" ".join(forms[s:e]))
        for s, e in spans_from_tags(tags)
    ]


# -- annotation / sidecar files ---------------------------------------------


def write_trigger_annotations(path, spans: list[TriggerSpan]) -> None:
    """One ``post_id<TAB>emotion<TAB>start<TAB>end`` per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in spans:
            fh.write(f"{s.post_id}\t{s.emotion}\t{s.token_start}\t{s.token_end}\n")


def read_trigger_annotations(path) -> list[TriggerSpan]:
    spans = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            pid, emotion, start, end = line.split("\t")
            spans.append(TriggerSpan(post_id=pid, emotion=emotion,
                                     token_start=int(start), token_end=int(end)))
    return spans


SIDECAR_HEADER = "#affectline-features-v1"


def write_sidecar_features(path, features: dict[str, np.ndarray]) -> None:
    """Per-token dense vectors: ``post_id<TAB>index<TAB>v1,v2,...``."""
    widths = {a.shape[1] for a in features.values()}
    if len(widths) > 1:
        raise ValueError("all posts must share the feature width")
    width = widths.pop() if widths else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{SIDECAR_HEADER}\twidth={width}\n")
        for pid in sorted(features):
            arr = features[pid]
            for i in range(arr.shape[0]):
                vals = ",".join(repr(float(v)) for v in arr[i])
                fh.write(f"{pid}\t{i}\t{vals}\n")


def read_sidecar_features(path) -> tuple[dict[str, dict[int, np.ndarray]], int]:
    """Returns ({post_id: {token_index: vector}}, width); callers fill
    missing token rows with zeros."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith(SIDECAR_HEADER):
            raise ValueError(f"unsupported sidecar header {header!r}")
        width = int(header.split("width=")[1])
        out: dict[str, dict[int, np.ndarray]] = {}
        for line in fh:
            line = line.strip()
            if not line:
                continue
            pid, idx, vals = line.split("\t")
            vec = np.array([float(v) for v in vals.split(",")], dtype=float)
            if vec.shape[0] != width:
                raise ValueError(f"row width {vec.shape[0]} != declared {width}")
            out.setdefault(pid, {})[int(idx)] = vec
    return out, width


def dense_for_tokens(per_token: dict[int, np.ndarray] | None, length: int, width: int) -> np.ndarray | None:
    """Materialize an (L, width) matrix, zero-filled where absent."""
    if per_token is None or width == 0:
        return None
    arr = np.zeros((length, width))
    for idx, vec in per_token.items():
        if 0 <= idx < length:
            arr[idx] = vec
    return arr
