"""JSONL corpus files and SEM-driven synthetic corpora.

One example per line::

    {"answers": [{"relevance": [true, false], "sentences": ["...", "..."]}],
     "cluster_summaries": ["..."], "question": "...", "summary": "..."}

``relevance`` and ``cluster_summaries`` are optional. Lines are written with
sorted keys and no extra whitespace, so saving is canonical.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pipeline import Answer, Example
from .sem import Sem, sample_indices

_EXAMPLE_KEYS = {"question", "answers", "summary", "cluster_summaries"}
_ANSWER_KEYS = {"sentences", "relevance"}


class CorpusError(ValueError):
    pass


def example_to_dict(ex: Example) -> dict:
    answers = []
    for a in ex.answers:
        d = {"sentences": list(a.sentences)}
        if a.relevance is not None:
            d["relevance"] = list(a.relevance)
        answers.append(d)
    out = {"question": ex.question, "answers": answers, "summary": ex.summary}
    if ex.cluster_summaries is not None:
        out["cluster_summaries"] = list(ex.cluster_summaries)
    return out


def _strs(value, what: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ValueError(f"{what} must be a list of strings")
    return value


def example_from_dict(d: dict, strict: bool = True) -> Example:
    if not isinstance(d, dict):
        raise ValueError("record must be a JSON object")
    if strict and set(d) - _EXAMPLE_KEYS:
        raise ValueError(f"unknown fields {sorted(set(d) - _EXAMPLE_KEYS)}")
    if not isinstance(d.get("question"), str):
        raise ValueError("question must be a string")
    if not isinstance(d.get("summary", ""), str):
        raise ValueError("summary must be a string")
    raw_answers = d.get("answers")
    if not isinstance(raw_answers, list) or not raw_answers:
        raise ValueError("answers must be a nonempty list")
    answers = []
    for i, a in enumerate(raw_answers):
        if not isinstance(a, dict):
            raise ValueError(f"answer {i} must be an object")
        if strict and set(a) - _ANSWER_KEYS:
            raise ValueError(f"answer {i}: unknown fields {sorted(set(a) - _ANSWER_KEYS)}")
        sents = _strs(a.get("sentences"), f"answer {i} sentences")
        rel = a.get("relevance")
        if rel is not None and (not isinstance(rel, list)
                                or not all(isinstance(r, bool) for r in rel)):
            raise ValueError(f"answer {i}: relevance must be a list of booleans")
        try:
            answers.append(Answer(tuple(sents), None if rel is None else tuple(rel)))
        except ValueError as exc:
            raise ValueError(f"answer {i}: {exc}") from None
    clusters = d.get("cluster_summaries")
    if clusters is not None:
        clusters = tuple(_strs(clusters, "cluster_summaries"))
    return Example(d["question"], tuple(answers), d.get("summary", ""), clusters)


def dumps_example(ex: Example) -> str:
    return json.dumps(example_to_dict(ex), sort_keys=True, ensure_ascii=False,
                      separators=(",", ":"))


def save_corpus(corpus: Iterable[Example], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in corpus:
            fh.write(dumps_example(ex) + "\n")


def load_corpus(path, strict: bool = True) -> list[Example]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(example_from_dict(json.loads(line), strict))
            except (json.JSONDecodeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return out


# --- verbalization --------------------------------------------------------

_SYLLABLES = ("ka", "lo", "mi", "ne", "ru", "ta", "vo", "zi", "pe", "su", "do", "ga")


class VerbalizerError(KeyError):
    pass


@dataclass(frozen=True)
class Verbalizer:
    """Injective map from sentence symbols to phrases, plus text templates."""

    phrases: Mapping[str, str]
    question_template: str = "what about {q}?"
    sentence_template: str = "{p}."
    _inverse: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        inv = {}
        for sym, ph in self.phrases.items():
            if ph in inv:
                raise ValueError(f"phrase {ph!r} used for both {inv[ph]!r} and {sym!r}")
            inv[ph] = sym
        object.__setattr__(self, "_inverse", inv)

    @classmethod
    def for_symbols(cls, symbols: Iterable[str], multi_token: bool = False,
                    seed: int = 0, **templates) -> "Verbalizer":
        """One token per symbol by default; ``multi_token`` gives two-word phrases."""
        syms = sorted(set(symbols))
        if not multi_token:
            return cls({s: s.lower() for s in syms}, **templates)
        rng = np.random.default_rng(seed)
        phrases, used = {}, set()
        for s in syms:
            while True:
                words = ["".join(rng.choice(_SYLLABLES, size=3)) for _ in range(2)]
                ph = " ".join(words)
                if ph not in used:
                    break
            used.add(ph)
            phrases[s] = ph
        return cls(phrases, **templates)

    @classmethod
    def for_sem(cls, sem: Sem, **kw) -> "Verbalizer":
        syms = set()
        for alpha in (sem.q_alphabet, sem.x_alphabet, sem.r_alphabet, sem.y_alphabet):
            for label in alpha:
                syms.update(label.split())
        return cls.for_symbols(syms, **kw)

    def phrase(self, symbol: str) -> str:
        try:
            return self.phrases[symbol]
        except KeyError:
            raise VerbalizerError(f"no phrase for symbol {symbol!r}") from None

    def sentence(self, symbol: str) -> str:
        return self.sentence_template.format(p=self.phrase(symbol))

    def question(self, label: str) -> str:
        return self.question_template.format(q=" ".join(self.phrase(s) for s in label.split()))

    def summary(self, label: str) -> str:
        return " ".join(self.sentence(s) for s in label.split())


def synthesize_corpus(sem: Sem, verbalizer: Verbalizer, count: int, seed: int,
                      n_answers: int = 1) -> list[Example]:
    """Sample chains and render them as labelled examples.

    Document sentences are split into ``n_answers`` contiguous answers. A
    sentence is relevant when its symbol appears in the sampled extraction.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    idx = sample_indices(sem, count, seed)
    cache: dict[tuple[int, int, int], Example] = {}
    out = []
    for q, x, r, y in idx.tolist():
        ex = cache.get((q, x, r, y))
        if ex is None:
            ex = _render(sem, verbalizer, q, x, r, y, n_answers)
            cache[(q, x, r, y)] = ex
        out.append(ex)
    return out


def _render(sem, verbalizer, q, x, r, y, n_answers) -> Example:
    syms = sem.x_alphabet[x].split()
    relevant = set(sem.r_alphabet[r].split())
    groups = np.array_split(np.arange(len(syms)), max(1, min(n_answers, len(syms))))
    answers = tuple(
        Answer(tuple(verbalizer.sentence(syms[j]) for j in g),
               tuple(syms[j] in relevant for j in g))
        for g in groups)
    return Example(verbalizer.question(sem.q_alphabet[q]), answers,
                   verbalizer.summary(sem.y_alphabet[y]))


def split_corpus(corpus: Sequence[Example], seed: int, train_fraction: float = 0.8):
    """Seeded train/held-out split; order within each part follows the corpus."""
    n = len(corpus)
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(round(train_fraction * n))
    train_idx, test_idx = sorted(perm[:cut].tolist()), sorted(perm[cut:].tolist())
    return [corpus[i] for i in train_idx], [corpus[i] for i in test_idx]
