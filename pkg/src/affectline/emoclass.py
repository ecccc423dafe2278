"""Binary MLP heads and the six-emotion one-vs-rest classifier.

The same head doubles as the relevance model for bootstrap harvesting.
Forward pass: p = sigmoid(W2 . relu(W1 . h + b1) + b2).  Training is
plain mini-batch gradient descent on mean binary cross-entropy plus an
L2 penalty on the weight matrices (biases are not penalized, so a very
large penalty collapses the model onto a bias-only fit).
"""

from __future__ import annotations

import json

import numpy as np
from scipy.sparse import issparse
from scipy.special import expit
from sklearn.base import BaseEstimator

from .textfeat import DEFAULT_DIM, stack_features

EMOTIONS = ("anger", "disgust", "fear", "happiness", "sadness", "surprise")

_ALIASES = {"worry": "fear"}

# short label glosses, stored alongside each head for documentation
EMOTION_DESCRIPTIONS = {
    "anger": "a strong hostile feeling toward someone or something seen as a provocation or wrong",
    "disgust": "strong revulsion or profound disapproval aroused by something offensive",
    "fear": "distress or unease caused by a perceived danger or threat; includes worry",
    "happiness": "a state of pleasure, contentment or joy",
    "sadness": "sorrow or unhappiness, often over loss or hardship",
    "surprise": "the feeling caused by something unexpected or astonishing",
}

MODEL_FORMAT = "affectline-model-v1"

_PROB_EPS = 1e-15  # keeps predict_proba inside the open interval (0, 1)


def canonical_emotion(label: str) -> str:
    """Canonical id for a label, mapping display aliases (worry -> fear)."""
    return _ALIASES.get(label, label)


def _as_matrix(X, dim: int | None):
    """Accept a dict feature map, a list of dicts, or an array/CSR."""
    if isinstance(X, dict):
        return stack_features([X], dim), True
    if isinstance(X, list) and (not X or isinstance(X[0], dict)):
        return stack_features(X, dim), False
    X = np.asarray(X, dtype=float) if not issparse(X) else X
    if X.ndim == 1:
        return X.reshape(1, -1), True
    return X, False


class MlpBinaryClassifier(BaseEstimator):
    """One-hidden-layer binary classifier over sparse feature vectors.

    Parameters
    ----------
    hidden : hidden layer width H.
    l2 : penalty weight on ||W1||^2 + ||W2||^2 (not on biases).
    lr, epochs, batch_size : mini-batch gradient descent schedule.
    seed : controls init and epoch shuffling; identical seeds give
        bit-identical models.
    """

    def __init__(self, hidden: int = 64, l2: float = 1e-4, lr: float = 0.5,
                 epochs: int = 50, batch_size: int = 32, seed: int = 0):
        self.hidden = hidden
        self.l2 = l2
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    # -- parameters ------------------------------------------------------

    def set_weights(self, W1, b1, W2, b2) -> "MlpBinaryClassifier":
        """Install explicit parameters (used by tests and model loading)."""
        self.W1_ = np.asarray(W1, dtype=float)
        self.b1_ = np.asarray(b1, dtype=float).ravel()
        self.W2_ = np.asarray(W2, dtype=float).reshape(1, -1)
        self.b2_ = float(b2)
        if self.W1_.shape[0] != self.W2_.shape[1] or self.W1_.shape[0] != self.b1_.shape[0]:
            raise ValueError("inconsistent parameter shapes")
        self.n_features_in_ = self.W1_.shape[1]
        return self

    def _init_weights(self, dim: int, rng: np.random.Generator) -> None:
        h = self.hidden
        r1 = np.sqrt(6.0 / (dim + h))
        r2 = np.sqrt(6.0 / (h + 1))
        self.W1_ = rng.uniform(-r1, r1, size=(h, dim))
        self.b1_ = np.zeros(h)
        self.W2_ = rng.uniform(-r2, r2, size=(1, h))
        self.b2_ = 0.0
        self.n_features_in_ = dim

    def _check_fitted(self):
        if not hasattr(self, "W1_"):
            raise ValueError("model is not trained")

    # -- forward / loss ---------------------------------------------------

    def _forward(self, X):
        Z1 = X @ self.W1_.T + self.b1_
        Z1 = np.asarray(Z1)
        A1 = np.maximum(Z1, 0.0)
        logits = A1 @ self.W2_.ravel() + self.b2_
        return Z1, A1, logits

    def decision_function(self, X):
        self._check_fitted()
        M, single = _as_matrix(X, self.n_features_in_)
        if M.shape[1] != self.n_features_in_:
            raise ValueError(f"feature dimension {M.shape[1]} != model dimension {self.n_features_in_}")
        logits = self._forward(M)[2]
        return float(logits[0]) if single else logits

    def predict_proba(self, X):
        """Probability of the positive class, strictly inside (0, 1)."""
        logits = self.decision_function(X)
        return float(np.clip(expit(logits), _PROB_EPS, 1.0 - _PROB_EPS)) if np.isscalar(logits) \
            else np.clip(expit(logits), _PROB_EPS, 1.0 - _PROB_EPS)

    def predict(self, X, threshold: float = 0.5):
        p = self.predict_proba(X)
        return (np.asarray(p) >= threshold).astype(int) if not np.isscalar(p) else int(p >= threshold)

    def loss_and_grad(self, X, y):
        """Mean BCE + (l2/2)(||W1||^2 + ||W2||^2) and its exact gradient.

        Returns (loss, grads) with grads keyed like the parameters; the
        same expression drives every training step, so finite
        differences of this loss validate the training gradient.
        """
        self._check_fitted()
        y = np.asarray(y, dtype=float)
        n = X.shape[0]
        Z1, A1, logits = self._forward(X)
        # stable log(1 + exp(-|z|)) form of the cross-entropy
        loss = float(np.mean(np.maximum(logits, 0) - logits * y + np.log1p(np.exp(-np.abs(logits)))))
        loss += 0.5 * self.l2 * (float(np.sum(self.W1_ ** 2)) + float(np.sum(self.W2_ ** 2)))
        p = expit(logits)
        dlogits = (p - y) / n
        dW2 = (dlogits @ A1).reshape(1, -1) + self.l2 * self.W2_
        db2 = float(np.sum(dlogits))
        dZ1 = np.outer(dlogits, self.W2_.ravel()) * (Z1 > 0)
        dW1 = np.asarray((X.T @ dZ1)).T + self.l2 * self.W1_
        db1 = dZ1.sum(axis=0)
        return loss, {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}

    # -- training ----------------------------------------------------------

    def fit(self, X, y, dev=None):
        """Train on (X, y) with y in {0, 1}; raises on single-class data.

        When ``dev=(X_dev, y_dev)`` is given, the parameters from the
        epoch with the best dev F1 are kept (earliest epoch on ties).
        """
        if isinstance(X, (dict, list)):
            raise TypeError("fit expects a feature matrix; use textfeat.stack_features first")
        X, _ = _as_matrix(X, None)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y length mismatch")
        if len(np.unique(y)) < 2:
            raise ValueError("degenerate labels: need at least one positive and one negative example")
        rng = np.random.default_rng(self.seed)
        self._init_weights(X.shape[1], rng)
        n = X.shape[0]
        best = None  # (f1, params) for dev selection
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                _, g = self.loss_and_grad(X[idx], y[idx])
                self.W1_ -= self.lr * g["W1"]
                self.b1_ -= self.lr * g["b1"]
                self.W2_ -= self.lr * g["W2"]
                self.b2_ -= self.lr * g["b2"]
            if dev is not None:
                f1 = _binary_f1(self.predict(dev[0]), np.asarray(dev[1]))
                if best is None or f1 > best[0]:
                    best = (f1, (self.W1_.copy(), self.b1_.copy(), self.W2_.copy(), self.b2_))
        if best is not None:
            self.W1_, self.b1_, self.W2_, self.b2_ = best[1]
        return self

    def input_gradient(self, h, indices=None):
        """d p / d h at a single feature vector.

        ``indices`` restricts the output to the given feature columns
        (saliency only ever needs the token columns).
        """
        self._check_fitted()
        M, _ = _as_matrix(h, self.n_features_in_)
        Z1, _, logits = self._forward(M)
        p = float(expit(logits[0]))
        v = self.W2_.ravel() * (Z1[0] > 0)  # (H,)
        if indices is None:
            return p * (1 - p) * (v @ self.W1_)
        cols = self.W1_[:, np.asarray(indices, dtype=int)]
        return p * (1 - p) * (v @ cols)

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "hidden": self.hidden, "l2": self.l2, "lr": self.lr, "epochs": self.epochs,
            "batch_size": self.batch_size, "seed": self.seed, "dim": self.n_features_in_,
            "W1": self.W1_.ravel().tolist(), "b1": self.b1_.tolist(),
            "W2": self.W2_.ravel().tolist(), "b2": self.b2_,
        }

    @staticmethod
    def from_dict(d: dict) -> "MlpBinaryClassifier":
        clf = MlpBinaryClassifier(
            hidden=d["hidden"], l2=d["l2"], lr=d["lr"], epochs=d["epochs"],
            batch_size=d["batch_size"], seed=d["seed"],
        )
        h, dim = d["hidden"], d["dim"]
        clf.set_weights(
            np.array(d["W1"], dtype=float).reshape(h, dim), d["b1"],
            np.array(d["W2"], dtype=float).reshape(1, h), d["b2"],
        )
        return clf


def _binary_f1(pred, gold) -> float:
    pred = np.asarray(pred).astype(bool)
    gold = np.asarray(gold).astype(bool)
    tp = int(np.sum(pred & gold))
    fp = int(np.sum(pred & ~gold))
    fn = int(np.sum(~pred & gold))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


class MultiLabelEmotionModel:
    """Six one-vs-rest heads sharing one featurization config.

    A post's label set is every emotion whose head probability clears
    the threshold (inclusive); the empty set reads as neutral.
    """

    def __init__(self, heads: dict[str, MlpBinaryClassifier], max_n: int = 2,
                 dim: int = DEFAULT_DIM, threshold: float = 0.5):
        if set(heads) != set(EMOTIONS):
            raise ValueError(f"need exactly the six heads {EMOTIONS}")
        dims = {h.n_features_in_ for h in heads.values()}
        if len(dims) != 1 or dims != {dim}:
            raise ValueError("all heads must share the featurization dimension")
        self.heads = heads
        self.max_n = max_n
        self.dim = dim
        self.threshold = threshold
        self.descriptions = dict(EMOTION_DESCRIPTIONS)

    def probabilities(self, h) -> dict[str, float]:
        return {emo: self.heads[emo].predict_proba(h) for emo in EMOTIONS}

    def predict_labels(self, h) -> set[str]:
        probs = self.probabilities(h)
        return {emo for emo, p in probs.items() if p >= self.threshold}

    def to_dict(self) -> dict:
        return {
            "max_n": self.max_n, "dim": self.dim, "threshold": self.threshold,
            "descriptions": self.descriptions,
            "heads": {emo: head.to_dict() for emo, head in self.heads.items()},
        }

    @staticmethod
    def from_dict(d: dict) -> "MultiLabelEmotionModel":
        heads = {emo: MlpBinaryClassifier.from_dict(hd) for emo, hd in d["heads"].items()}
        model = MultiLabelEmotionModel(heads, max_n=d["max_n"], dim=d["dim"], threshold=d["threshold"])
        model.descriptions = dict(d.get("descriptions", EMOTION_DESCRIPTIONS))
        return model


def train_emotion_model(X, label_sets, max_n: int = 2, dim: int = DEFAULT_DIM,
                        dev=None, strict: bool = True, **hyper) -> MultiLabelEmotionModel:
    """Train the six one-vs-rest heads on featurized posts.

    X is a feature matrix (n, dim); label_sets the aligned gold emotion
    sets.  Per-head seeds are offset from the base seed so the heads do
    not share an init.  With ``strict=False`` an emotion missing from
    the labels gets a bias-only prior head instead of raising.
    """
    label_sets = [set(canonical_emotion(e) for e in s) for s in label_sets]
    base_seed = hyper.pop("seed", 0)
    heads = {}
    for i, emo in enumerate(EMOTIONS):
        y = np.array([1.0 if emo in s else 0.0 for s in label_sets])
        head = MlpBinaryClassifier(seed=base_seed + i, **hyper)
        if len(np.unique(y)) < 2 and not strict:
            rate = min(max(float(np.mean(y)), _PROB_EPS), 1.0 - _PROB_EPS)
            head.set_weights(np.zeros((head.hidden, X.shape[1])), np.zeros(head.hidden),
                             np.zeros((1, head.hidden)), float(np.log(rate / (1.0 - rate))))
            heads[emo] = head
            continue
        dev_head = None
        if dev is not None:
            dev_y = np.array([1.0 if emo in set(map(canonical_emotion, s)) else 0.0 for s in dev[1]])
            dev_head = (dev[0], dev_y)
        head.fit(X, y, dev=dev_head)
        heads[emo] = head
    return MultiLabelEmotionModel(heads, max_n=max_n, dim=dim)


# -- metrics ---------------------------------------------------------------


def evaluate(pred_sets, gold_sets, labels=None, subset_accuracy: bool = False) -> dict:
    """Multi-label metrics: Jaccard accuracy, micro F1, macro F1.

    Accuracy is the mean per-example Jaccard |P ∩ G| / |P ∪ G| with both
    sets empty counting 1 (``subset_accuracy=True`` switches to exact
    set match).  Micro F1 pools per-label decisions; macro F1 averages
    per-label F1 over ``labels`` (default: every label observed), with
    a label's F1 defined as 0 when it has no gold and no predicted
    positives.
    """
    if len(pred_sets) != len(gold_sets):
        raise ValueError("prediction and gold lists differ in length")
    pred_sets = [set(s) for s in pred_sets]
    gold_sets = [set(s) for s in gold_sets]
    if labels is None:
        observed = set().union(*pred_sets, *gold_sets) if pred_sets else set()
        labels = sorted(observed)

    if subset_accuracy:
        acc = float(np.mean([p == g for p, g in zip(pred_sets, gold_sets)])) if pred_sets else 1.0
    else:
        scores = []
        for p, g in zip(pred_sets, gold_sets):
            union = p | g
            scores.append(1.0 if not union else len(p & g) / len(union))
        acc = float(np.mean(scores)) if scores else 1.0

    tp_total = fp_total = fn_total = 0
    per_label_f1 = []
    for label in labels:
        tp = sum(1 for p, g in zip(pred_sets, gold_sets) if label in p and label in g)
        fp = sum(1 for p, g in zip(pred_sets, gold_sets) if label in p and label not in g)
        fn = sum(1 for p, g in zip(pred_sets, gold_sets) if label not in p and label in g)
        tp_total += tp
        fp_total += fp
        fn_total += fn
        per_label_f1.append(0.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn))

    micro = 0.0 if 2 * tp_total + fp_total + fn_total == 0 else \
        2 * tp_total / (2 * tp_total + fp_total + fn_total)
    macro = float(np.mean(per_label_f1)) if per_label_f1 else 0.0
    return {"accuracy": acc, "micro_f1": micro, "macro_f1": macro}


# -- model files -------------------------------------------------------------


def save_model(path, model) -> None:
    """Versioned, self-describing JSON; floats as decimal text that
    round-trips bit-exactly."""
    if isinstance(model, MultiLabelEmotionModel):
        payload = {"format": MODEL_FORMAT, "kind": "emotion_multilabel", "model": model.to_dict()}
    elif isinstance(model, MlpBinaryClassifier):
        payload = {"format": MODEL_FORMAT, "kind": "mlp_binary", "model": model.to_dict()}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format in {path}")
    if payload["kind"] == "mlp_binary":
        return MlpBinaryClassifier.from_dict(payload["model"])
    if payload["kind"] == "emotion_multilabel":
        return MultiLabelEmotionModel.from_dict(payload["model"])
    raise ValueError(f"unknown model kind {payload['kind']!r}")
