"""Sequence-model contract, a count-based seq2seq reference model, and scoring.

Model inputs are flat token lists laid out as::

    [task prefix] question tokens <sep> content tokens

The prefix is ``summarize:`` (extract relevant sentences from one answer),
``generate:`` (write the final summary) or absent (plain direct/oracle
models). Every scored output sequence ends with an implicit ``</s>``.
"""
from __future__ import annotations

import abc
import enum
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .textmetrics import TokenSeq

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
SEP = "<sep>"
SUMMARIZE = "summarize:"
GENERATE = "generate:"
PREFIXES = (SUMMARIZE, GENERATE)
RESERVED = frozenset({BOS, EOS, UNK, SEP, SUMMARIZE, GENERATE})
NGRAM_FORMAT = "eacausal.ngram/1"


def _toks(seq) -> tuple[str, ...]:
    if isinstance(seq, TokenSeq):
        return seq.tokens
    return tuple(seq)


def make_input(question, content, prefix: str | None = None) -> TokenSeq:
    """Lay out ``[prefix] question <sep> content`` as one token sequence."""
    head = (prefix,) if prefix else ()
    return TokenSeq.of(head + _toks(question) + (SEP,) + _toks(content))


class SequenceModel(abc.ABC):
    """p(output | input) over token sequences terminated by ``</s>``."""

    @property
    @abc.abstractmethod
    def vocab(self) -> tuple[str, ...]:
        """Output tokens the model normalizes over, ``</s>`` included."""

    @abc.abstractmethod
    def next_logprobs(self, source: Sequence[str], history: Sequence[str]) -> np.ndarray:
        """Log-probabilities over ``vocab`` for the next output token."""

    def token_index(self, token: str) -> int:
        return self._index()[token] if token in self._index() else self._index()[UNK]

    def _index(self) -> dict[str, int]:
        idx = getattr(self, "_vocab_index", None)
        if idx is None or len(idx) != len(self.vocab):
            idx = {t: i for i, t in enumerate(self.vocab)}
            self._vocab_index = idx
        return idx

    def log_prob(self, source, output) -> float:
        src, out = _toks(source), _toks(output)
        total = 0.0
        hist: list[str] = []
        for tok in out + (EOS,):
            total += float(self.next_logprobs(src, hist)[self.token_index(tok)])
            hist.append(tok)
        return total

    def generate(self, source, max_len: int) -> TokenSeq:
        """Greedy decoding; ties go to the lexicographically smallest token."""
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        src = _toks(source)
        vocab = self.vocab
        order = sorted(range(len(vocab)), key=lambda i: vocab[i])
        unk = self._index().get(UNK)
        out: list[str] = []
        while len(out) < max_len:
            lp = self.next_logprobs(src, out)
            best, best_lp = None, -math.inf
            for i in order:
                if i == unk:
                    continue
                if lp[i] > best_lp:
                    best, best_lp = i, lp[i]
            tok = vocab[best]
            if tok == EOS:
                break
            out.append(tok)
        return TokenSeq.of(out)


def log_likelihood(model: SequenceModel, source, output) -> float:
    """Sum of per-token log-probabilities of ``output`` plus ``</s>``."""
    return model.log_prob(source, output)


def generate_greedy(model: SequenceModel, source, max_len: int) -> TokenSeq:
    return model.generate(source, max_len)


class UniformModel(SequenceModel):
    """Every token, ``</s>`` included, equally likely. Test double and baseline."""

    def __init__(self, vocab: Iterable[str]):
        v = set(vocab) | {EOS, UNK}
        self._vocab = tuple(sorted(v))

    @property
    def vocab(self):
        return self._vocab

    def next_logprobs(self, source, history):
        return np.full(len(self._vocab), -math.log(len(self._vocab)))


def _task_of(source: Sequence[str]) -> str:
    return source[0] if source and source[0] in PREFIXES else ""


def _copy_span(source: Sequence[str]) -> Sequence[str]:
    # copy only from the content segment; question and prefix are conditioning
    if SEP in source:
        return source[list(source).index(SEP) + 1:]
    return source[1:] if _task_of(source) else source


class NgramSeq2Seq(SequenceModel):
    """Additive-smoothed target n-gram interpolated with a copy distribution.

    p(w | h, src) = (1 - lam) * p_ngram(w | last order-1 tokens of h, task)
                    + lam * p_copy(w | content tokens of src)

    Both components are add-``alpha`` smoothed over the same vocabulary, so
    every token, including unseen ones (scored as ``<unk>``), has finite
    log-probability. Count tables are kept separately per task prefix.
    """

    def __init__(self, order: int = 3, alpha: float = 0.01, copy_weight: float = 0.5):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= copy_weight <= 1.0:
            raise ValueError("copy_weight must lie in [0, 1]")
        self.order = int(order)
        self.alpha = float(alpha)
        self.copy_weight = float(copy_weight)
        self._words: set[str] = {EOS, UNK}
        self._vocab: tuple[str, ...] = tuple(sorted(self._words))
        # task -> context -> Counter(next token)
        self._counts: dict[str, dict[tuple[str, ...], Counter]] = defaultdict(dict)
        self._cache: dict = {}

    @property
    def vocab(self):
        return self._vocab

    def update(self, pairs: Iterable[tuple]) -> "NgramSeq2Seq":
        """Add the counts of one pass over ``pairs``; one call is one epoch."""
        k = self.order - 1
        for source, output in pairs:
            src, out = _toks(source), _toks(output)
            self._words.update(t for t in out if t != BOS)
            self._words.update(t for t in _copy_span(src) if t not in RESERVED)
            table = self._counts[_task_of(src)]
            hist = (BOS,) * k + out + (EOS,)
            for i in range(k, len(hist)):
                ctx = hist[i - k: i]
                table.setdefault(ctx, Counter())[hist[i]] += 1
        self._vocab = tuple(sorted(self._words))
        self._vocab_index = None
        self._cache.clear()
        return self

    def _ngram_row(self, task: str, ctx: tuple[str, ...]) -> np.ndarray:
        key = ("ng", task, ctx)
        row = self._cache.get(key)
        if row is None:
            counts = self._counts.get(task, {}).get(ctx)
            row = np.full(len(self._vocab), self.alpha)
            total = 0
            if counts:
                idx = self._index()
                for tok, c in counts.items():
                    row[idx[tok]] += c
                    total += c
            row /= total + self.alpha * len(self._vocab)
            self._cache[key] = row
        return row

    def _copy_row(self, source: tuple[str, ...]) -> np.ndarray:
        key = ("cp", source)
        row = self._cache.get(key)
        if row is None:
            span = _copy_span(source)
            row = np.full(len(self._vocab), self.alpha)
            idx = self._index()
            for tok in span:
                row[idx.get(tok, idx[UNK])] += 1
            row /= len(span) + self.alpha * len(self._vocab)
            if len(self._cache) > 200_000:
                self._cache.clear()
            self._cache[key] = row
        return row

    def next_logprobs(self, source, history):
        src = tuple(source)
        k = self.order - 1
        hist = tuple(history)
        ctx = ((BOS,) * k + tuple(t if t in self._words else UNK for t in hist))[-k:] if k else ()
        lam = self.copy_weight
        p = (1 - lam) * self._ngram_row(_task_of(src), ctx)
        if lam:
            p = p + lam * self._copy_row(src)
        return np.log(p)

    # --- persistence ---

    def to_dict(self) -> dict:
        tables = {}
        for task in sorted(self._counts):
            rows = []
            for ctx in sorted(self._counts[task]):
                c = self._counts[task][ctx]
                rows.append([list(ctx), {t: c[t] for t in sorted(c)}])
            tables[task] = rows
        return {"format": NGRAM_FORMAT, "order": self.order, "alpha": self.alpha,
                "copy_weight": self.copy_weight, "vocab": list(self._vocab),
                "tables": tables}

    @classmethod
    def from_dict(cls, data: dict) -> "NgramSeq2Seq":
        if data.get("format") != NGRAM_FORMAT:
            raise ValueError(f"unsupported model format {data.get('format')!r}")
        model = cls(data["order"], data["alpha"], data["copy_weight"])
        model._words = set(data["vocab"])
        model._vocab = tuple(sorted(model._words))
        for task, rows in data["tables"].items():
            for ctx, counts in rows:
                model._counts[task][tuple(ctx)] = Counter(counts)
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "NgramSeq2Seq":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_ngram(pairs: Sequence[tuple], order: int = 3, alpha: float = 0.01,
                copy_weight: float = 0.5, epochs: int = 1) -> NgramSeq2Seq:
    pairs = list(pairs)
    if not pairs:
        raise ValueError("cannot train on an empty set of pairs")
    model = NgramSeq2Seq(order, alpha, copy_weight)
    for _ in range(epochs):
        model.update(pairs)
    return model


# --- adapted faithfulness -------------------------------------------------

class Provenance(str, enum.Enum):
    PREDICTED = "predicted"   # sentences the system itself selected
    GOLD = "gold"             # annotated relevant sentences
    FULL_INPUT = "full-input"  # every answer sentence


class SystemKind(str, enum.Enum):
    EXTRACT_GENERATE = "extract-generate"
    DIRECT = "direct"
    ORACLE = "oracle"


_REQUIRED_BASIS = {
    SystemKind.EXTRACT_GENERATE: Provenance.PREDICTED,
    SystemKind.DIRECT: Provenance.FULL_INPUT,
    SystemKind.ORACLE: Provenance.GOLD,
}


class BasisMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Basis:
    tokens: TokenSeq
    provenance: Provenance


@dataclass(frozen=True)
class Faithfulness:
    raw: float          # summed log-probability under the verifier
    per_token: float    # raw / (summary length + 1); not the published convention

    @property
    def scaled(self) -> float:
        return 100.0 * self.raw


def faithfulness_score(verifier: SequenceModel, question, basis, summary) -> float:
    """log p_v(summary | question, basis) with the verifier's oracle input layout."""
    content = basis.tokens if isinstance(basis, Basis) else basis
    return log_likelihood(verifier, make_input(question, content), summary)


def evaluate_faithfulness(verifier: SequenceModel, system: SystemKind | str,
                          question, basis: Basis, summary) -> Faithfulness:
    """Score a summary against the basis its system actually generated from.

    Extract-and-generate systems must be scored on their predicted sentences,
    direct systems on the full input, oracle systems on gold sentences.
    """
    system = SystemKind(system)
    if not isinstance(basis, Basis):
        raise TypeError("evaluate_faithfulness needs a Basis carrying its provenance")
    want = _REQUIRED_BASIS[system]
    if basis.provenance is not want:
        raise BasisMismatchError(
            f"{system.value} summaries are scored against a {want.value} basis, "
            f"got {basis.provenance.value}")
    raw = faithfulness_score(verifier, question, basis, summary)
    return Faithfulness(raw, raw / (len(_toks(summary)) + 1))
