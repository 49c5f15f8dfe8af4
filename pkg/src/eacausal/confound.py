"""Plug-in estimate of the confounding carried by irrelevant sentences.

Two logistic relevance classifiers score every sentence, one from the
question and document only, one that also sees the gold summary. Their
held-out cross-entropies upper-bound H(X_R | X, Q) and H(X_R | X, Q, Y),
and the difference estimates the causal effect of the irrelevant sentences.

Relevance labels inside one example are scored as a chain in document
order: each sentence's features include its position and how many earlier
sentences were relevant (gold labels, teacher-forced). Summing the per
sentence losses of an example therefore estimates the entropy of the whole
relevant set, not a sum of independent marginal entropies.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from .kernels import hash_features
from .pipeline import Example, tok
from .stats import welch_t
from .textmetrics import TokenSeq

HASH_DIM = 1 << 18
HASH_SEED = 0
MAX_POSITION = 15
CLASSIFIER_FORMAT = "eacausal.relevance/1"
_EPS = 1e-15
NUMERIC_ULPS = 64


# --- features -------------------------------------------------------------

def _gram_keys(prefix: str, seq: TokenSeq) -> list[str]:
    toks = seq.stemmed
    keys = [f"{prefix}1:{t}" for t in toks]
    keys += [f"{prefix}2:{a} {b}" for a, b in zip(toks, toks[1:])]
    return keys


def overlap_ratio(sentence: TokenSeq, summary: TokenSeq) -> float:
    """Share of the sentence's unigram types present in the summary."""
    sent = set(sentence.stemmed)
    if not sent:
        return 0.0
    return len(sent & set(summary.stemmed)) / len(sent)


def featurize(sentence: TokenSeq, question: TokenSeq, summary: TokenSeq | None = None,
              hash_dim: int = HASH_DIM, position: int | None = None,
              n_prev_relevant: int | None = None,
              seed: int = HASH_SEED) -> tuple[np.ndarray, np.ndarray]:
    """Signed-hashed sparse features as (indices, values).

    The document-side block (sentence, question, relevance history) and the
    summary block are each L2-normalized.
    """
    if hash_dim < 1 or hash_dim & (hash_dim - 1):
        raise ValueError("hash_dim must be a power of two")
    keys = _gram_keys("s", sentence) + _gram_keys("q", question)
    if position is not None:
        prev = min(n_prev_relevant or 0, 2)
        pos = min(position, MAX_POSITION)
        keys += [f"h:{pos}:{prev}", f"hp:{prev}"]
    acc = _normalized(_hashed(keys, [], seed, hash_dim))
    if summary is not None:
        extra = [("overlap", overlap_ratio(sentence, summary))]
        for b, v in _normalized(_hashed(_gram_keys("y", summary), extra, seed,
                                        hash_dim)).items():
            acc[b] = acc.get(b, 0.0) + v
    idx = np.array(sorted(b for b, v in acc.items() if v != 0.0), dtype=np.int64)
    val = np.array([acc[b] for b in idx.tolist()], dtype=np.float64)
    return idx, val


def _hashed(keys, weighted, seed, hash_dim) -> dict[int, float]:
    acc: dict[int, float] = {}
    for bucket, sign in hash_features(keys, seed, hash_dim):
        acc[bucket] = acc.get(bucket, 0.0) + sign
    for key, value in weighted:
        if value:
            (bucket, sign), = hash_features([key], seed, hash_dim)
            acc[bucket] = acc.get(bucket, 0.0) + sign * value
    return acc


def _normalized(acc: dict[int, float]) -> dict[int, float]:
    # the summary block is scaled on its own so that zero summary weights
    # reproduce the summary-blind classifier exactly
    norm = math.sqrt(sum(v * v for v in acc.values()))
    return {b: v / norm for b, v in acc.items()} if norm > 0 else acc


@dataclass
class Design:
    X: sparse.csr_matrix
    y: np.ndarray
    example_of: np.ndarray    # row -> example index
    n_examples: int


def build_design(corpus: Sequence[Example], uses_summary: bool,
                 hash_dim: int = HASH_DIM, seed: int = HASH_SEED) -> Design:
    indptr, indices, data, labels, owner = [0], [], [], [], []
    for e, ex in enumerate(corpus):
        q = tok(ex.question)
        summ = tok(ex.summary) if uses_summary else None
        prev = 0
        pos = 0
        for a in ex.answers:
            if a.relevance is None:
                raise ValueError(f"example {e} is missing relevance labels")
            for s, r in zip(a.sentences, a.relevance):
                idx, val = featurize(tok(s), q, summ, hash_dim, pos, prev, seed)
                indices.append(idx)
                data.append(val)
                indptr.append(indptr[-1] + idx.size)
                labels.append(1.0 if r else 0.0)
                owner.append(e)
                prev += bool(r)
                pos += 1
    if not labels:
        raise ValueError("corpus has no labelled sentences")
    X = sparse.csr_matrix(
        (np.concatenate(data), np.concatenate(indices), np.array(indptr)),
        shape=(len(labels), hash_dim))
    return Design(X, np.array(labels), np.array(owner, dtype=np.int64), len(corpus))


# --- logistic regression --------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def log_losses(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-row binary cross-entropy in nats from logits, clipped away from 0 and 1."""
    p = np.clip(_sigmoid(z), _EPS, 1 - _EPS)
    return -(y * np.log(p) + (1 - y) * np.log1p(-p))


def objective(w: np.ndarray, b: float, X, y: np.ndarray, l2: float,
              mu: np.ndarray | None = None) -> float:
    """Mean log loss + l2/2 |w|^2, with logits X w + b - mu.w (mu: feature means)."""
    z = X @ w + b - (0.0 if mu is None else float(mu @ w))
    return float(log_losses(z, y).mean() + 0.5 * l2 * (w @ w))


def gradient(w: np.ndarray, b: float, X, y: np.ndarray, l2: float,
             mu: np.ndarray | None = None):
    """Gradient of :func:`objective` with respect to (w, b)."""
    z = X @ w + b - (0.0 if mu is None else float(mu @ w))
    r = (_sigmoid(z) - y) / y.size
    gw = X.T @ r + l2 * w
    if mu is not None:
        gw -= mu * r.sum()
    return gw, float(r.sum())


@dataclass
class RelevanceClassifier:
    weights: np.ndarray
    bias: float
    hash_dim: int
    uses_summary: bool
    hash_seed: int = HASH_SEED
    history: list = field(default_factory=list)   # training objective per epoch

    def logits(self, design: Design) -> np.ndarray:
        return design.X @ self.weights + self.bias

    def predict_proba(self, design: Design) -> np.ndarray:
        return _sigmoid(self.logits(design))

    def design(self, corpus: Sequence[Example]) -> Design:
        return build_design(corpus, self.uses_summary, self.hash_dim, self.hash_seed)

    def to_dict(self) -> dict:
        nz = np.flatnonzero(self.weights)
        return {"format": CLASSIFIER_FORMAT, "hash_dim": self.hash_dim,
                "hash_seed": self.hash_seed, "uses_summary": self.uses_summary,
                "bias": self.bias, "indices": nz.tolist(),
                "weights": self.weights[nz].tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RelevanceClassifier":
        if d.get("format") != CLASSIFIER_FORMAT:
            raise ValueError(f"unsupported classifier format {d.get('format')!r}")
        w = np.zeros(int(d["hash_dim"]))
        w[np.array(d["indices"], dtype=np.int64)] = d["weights"]
        return cls(w, float(d["bias"]), int(d["hash_dim"]), bool(d["uses_summary"]),
                   int(d["hash_seed"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RelevanceClassifier":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_logistic(design: Design, l2: float = 1e-4, epochs: int = 200, lr: float = 0.5,
                 track: bool = False):
    """Full-batch gradient descent on mean log loss + l2/2 |w|^2.

    Features are mean-centered inside the optimizer so the unpenalized
    intercept absorbs every feature's mean; the returned bias undoes the
    shift, giving plain logits X w + bias. With constant labels the centered
    gradient vanishes and the fit is intercept-only whatever the features.
    """
    X, y = design.X, design.y
    mu = np.asarray(X.mean(axis=0)).ravel()
    w = np.zeros(X.shape[1])
    b = 0.0
    hist = []
    for _ in range(epochs):
        gw, gb = gradient(w, b, X, y, l2, mu)
        w -= lr * gw
        b -= lr * gb
        if track:
            hist.append(objective(w, b, X, y, l2, mu))
    return w, b - float(mu @ w), hist


def train_classifier(corpus: Sequence[Example], uses_summary: bool, l2: float = 1e-4,
                     epochs: int = 200, lr: float = 0.5, seed: int = 0,
                     hash_dim: int = HASH_DIM, track: bool = False) -> RelevanceClassifier:
    """Fit one relevance classifier. Zero initialization; ``seed`` fixes the hash seed."""
    design = build_design(corpus, uses_summary, hash_dim, seed)
    w, b, hist = fit_logistic(design, l2, epochs, lr, track)
    return RelevanceClassifier(w, b, hash_dim, uses_summary, seed, hist)


# --- estimation -----------------------------------------------------------

@dataclass
class CeEstimate:
    h1: float                   # mean per-sentence loss, no summary
    h2: float                   # mean per-sentence loss, with summary
    ce: float                   # h1 - h2, per sentence
    per_example: list[float]    # mean over each example's sentences of loss1 - loss2
    sentences_per_example: list[int]
    ce_se: float                # standard error of ce (ratio estimator)
    ce_total: float             # per-example sum of loss differences, averaged
    ce_total_se: float

    def as_dict(self, scale: float = 1.0) -> dict:
        return {"h1": self.h1 * scale, "h2": self.h2 * scale, "ce": self.ce * scale,
                "ce_se": self.ce_se * scale, "ce_total": self.ce_total * scale,
                "ce_total_se": self.ce_total_se * scale,
                "n_examples": len(self.per_example),
                "n_sentences": int(sum(self.sentences_per_example)),
                "per_example": [v * scale for v in self.per_example]}


def estimate_ce(c1: RelevanceClassifier, c2: RelevanceClassifier,
                corpus: Sequence[Example]) -> CeEstimate:
    if c1.uses_summary or not c2.uses_summary:
        raise ValueError("estimate_ce needs c1 without summary access and c2 with it")
    d1, d2 = c1.design(corpus), c2.design(corpus)
    l1 = log_losses(c1.logits(d1), d1.y)
    l2 = log_losses(c2.logits(d2), d2.y)
    diff = l1 - l2
    n = np.bincount(d1.example_of, minlength=d1.n_examples).astype(float)
    sums = np.bincount(d1.example_of, weights=diff, minlength=d1.n_examples)
    ce = float(diff.mean())
    live = n > 0
    per_example = np.where(live, sums / np.where(live, n, 1), 0.0)
    m = int(live.sum())
    resid = sums[live] - ce * n[live]
    ce_se = math.sqrt(float(resid @ resid) * m / max(m - 1, 1)) / float(n.sum())
    totals = sums[live]
    ce_total = float(totals.mean())
    ce_total_se = float(totals.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    # below the rounding resolution of the loss means an SE carries no information
    floor = NUMERIC_ULPS * np.finfo(float).eps * float(l1.mean() + l2.mean())
    ce_se = max(ce_se, floor)
    ce_total_se = max(ce_total_se, floor * float(n[live].mean()))
    return CeEstimate(float(l1.mean()), float(l2.mean()), ce, per_example.tolist(),
                      n.astype(int).tolist(), ce_se, ce_total, ce_total_se)


# --- top/bottom comparison ------------------------------------------------

def _group_summary(values: np.ndarray) -> dict:
    return {"mean": float(values.mean()),
            "se": float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0}


def top_bottom_report(per_example_ce: Sequence[float], deltas_loglik: Sequence[float],
                      deltas_rouge: Sequence[float], k: int = 50,
                      loglik_scale: float = 100.0, extra: dict | None = None) -> dict:
    """Compare metric deltas between the k highest- and k lowest-confounding examples.

    Log-likelihood deltas are multiplied by ``loglik_scale`` before reporting.
    """
    ce = np.asarray(per_example_ce, dtype=float)
    metrics = {"loglik": np.asarray(deltas_loglik, dtype=float) * loglik_scale,
               "rouge": np.asarray(deltas_rouge, dtype=float)}
    for name, vals in (extra or {}).items():
        metrics[name] = np.asarray(vals, dtype=float)
    if k < 1:
        raise ValueError("k must be >= 1")
    if 2 * k > ce.size:
        raise ValueError(f"2k = {2 * k} exceeds the {ce.size} available examples")
    for name, vals in metrics.items():
        if vals.shape != ce.shape:
            raise ValueError(f"{name} deltas have {vals.size} entries, expected {ce.size}")
    # stable sorts: ties resolve by example position
    top = np.argsort(-ce, kind="stable")[:k]
    bottom = np.argsort(ce, kind="stable")[:k]
    report = {"k": k, "top_indices": top.tolist(), "bottom_indices": bottom.tolist(),
              "metrics": {}}
    for name, vals in metrics.items():
        if k >= 2:
            test = welch_t(vals[top], vals[bottom]).as_dict()
        else:
            test = {"t": None, "df": None, "p_value": None, "significant_at_05": False}
        report["metrics"][name] = {"top": _group_summary(vals[top]),
                                   "bottom": _group_summary(vals[bottom]),
                                   "welch": test}
    return report
