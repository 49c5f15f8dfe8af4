"""Tokenization, sentence splitting, ROUGE, METEOR-lite and the Perspective score."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .kernels import lcs_length
from .porter import stem

_TOKEN_RE = re.compile(r"[^\W_]+")
_SENT_RE = re.compile(r"(?<=[.?!])\s+")


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]
    stemmed: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.stemmed):
            raise ValueError("tokens and stems must have equal length")

    @classmethod
    def of(cls, tokens: Sequence[str]) -> "TokenSeq":
        """Wrap already-split tokens; stems are computed here."""
        toks = tuple(tokens)
        return cls(toks, tuple(stem(t) for t in toks))

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __add__(self, other: "TokenSeq") -> "TokenSeq":
        return TokenSeq(self.tokens + other.tokens, self.stemmed + other.stemmed)

    def view(self, use_stems: bool) -> tuple[str, ...]:
        return self.stemmed if use_stems else self.tokens


EMPTY = TokenSeq((), ())


def tokenize(text: str) -> TokenSeq:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return TokenSeq.of(_TOKEN_RE.findall(text.lower()))


def split_sentences(text: str) -> list[str]:
    """Split after ``.``, ``?`` or ``!`` followed by whitespace.

    Abbreviations such as "e.g." are oversplit; pre-split corpora avoid this.
    """
    return [s.strip() for s in _SENT_RE.split(text) if s.strip()]


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "Score":
        denom = precision + recall
        f1 = 0.0 if denom == 0 else 2 * precision * recall / denom
        return cls(precision, recall, f1)

    def as_dict(self) -> dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


ZERO = Score(0.0, 0.0, 0.0)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: TokenSeq, reference: TokenSeq, n: int = 1,
            use_stems: bool = True) -> Score:
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = ngrams(candidate.view(use_stems), n)
    ref = ngrams(reference.view(use_stems), n)
    overlap = sum((cand & ref).values())
    n_cand, n_ref = sum(cand.values()), sum(ref.values())
    p = overlap / n_cand if n_cand else 0.0
    r = overlap / n_ref if n_ref else 0.0
    return Score.from_pr(p, r)


def rouge_l(candidate: TokenSeq, reference: TokenSeq, use_stems: bool = True) -> Score:
    """Summary-level ROUGE-L: one LCS over the whole token sequences."""
    if not len(candidate) or not len(reference):
        return ZERO
    lcs = lcs_length(candidate.view(use_stems), reference.view(use_stems))
    return Score.from_pr(lcs / len(candidate), lcs / len(reference))


def _align_stage(cand, ref, cand_free, ref_free, pairs):
    # leftmost-greedy, but continue the previous chunk when possible
    by_word: dict[str, list[int]] = {}
    for j in sorted(ref_free):
        by_word.setdefault(ref[j], []).append(j)
    aligned = dict(pairs)
    for i in sorted(cand_free):
        slots = by_word.get(cand[i])
        if not slots:
            continue
        prev = aligned.get(i - 1)
        j = prev + 1 if prev is not None and prev + 1 in slots else slots[0]
        slots.remove(j)
        aligned[i] = j
        cand_free.discard(i)
        ref_free.discard(j)
    return sorted(aligned.items())


def _chunks(pairs) -> int:
    chunks = 0
    prev = None
    for i, j in pairs:
        if prev is None or not (i == prev[0] + 1 and j == prev[1] + 1):
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_lite(candidate: TokenSeq, reference: TokenSeq, alpha: float = 0.9,
                beta: float = 3.0, gamma: float = 0.5) -> float:
    """METEOR with exact then stem matching and no synonym stage."""
    if not len(candidate) or not len(reference):
        return 0.0
    cand_free = set(range(len(candidate)))
    ref_free = set(range(len(reference)))
    pairs: list[tuple[int, int]] = []
    pairs = _align_stage(candidate.tokens, reference.tokens, cand_free, ref_free, pairs)
    pairs = _align_stage(candidate.stemmed, reference.stemmed, cand_free, ref_free, pairs)
    m = len(pairs)
    if m == 0:
        return 0.0
    p, r = m / len(candidate), m / len(reference)
    fmean = p * r / (alpha * p + (1 - alpha) * r)
    penalty = gamma * (_chunks(pairs) / m) ** beta
    return fmean * (1 - penalty)


def perspective(candidate: TokenSeq, cluster_summaries: Sequence[TokenSeq],
                use_stems: bool = True) -> float:
    """Mean ROUGE-1 recall of the candidate against each cluster summary."""
    if not cluster_summaries:
        raise ValueError("perspective needs at least one cluster summary")
    recalls = [rouge_n(candidate, s, 1, use_stems).recall for s in cluster_summaries]
    return sum(recalls) / len(recalls)
