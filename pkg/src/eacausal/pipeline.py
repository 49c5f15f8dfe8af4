"""Extract-and-generate mechanics over any :class:`SequenceModel`.

One model serves both tasks, told apart by the leading prefix token:
``summarize:`` maps (question, one answer) to that answer's relevant
sentences, ``generate:`` maps (question, selected sentences) to the final
summary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

from .seqmodels import GENERATE, SUMMARIZE, SequenceModel, log_likelihood, make_input
from .textmetrics import EMPTY, TokenSeq, rouge_n, tokenize

DEFAULT_THRESHOLD = 0.8


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class Answer:
    sentences: tuple[str, ...]
    relevance: tuple[bool, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.sentences:
            raise ValueError("an answer needs at least one sentence")
        if self.relevance is not None:
            rel = tuple(bool(r) for r in self.relevance)
            if len(rel) != len(self.sentences):
                raise ValueError(f"{len(rel)} relevance labels for "
                                 f"{len(self.sentences)} sentences")
            object.__setattr__(self, "relevance", rel)

    def relevant_sentences(self) -> list[str]:
        if self.relevance is None:
            raise LabelError("answer carries no relevance labels")
        return [s for s, r in zip(self.sentences, self.relevance) if r]


@dataclass(frozen=True)
class Example:
    question: str
    answers: tuple[Answer, ...]
    summary: str = ""
    cluster_summaries: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "answers", tuple(self.answers))
        if not self.answers:
            raise ValueError("an example needs at least one answer")
        if self.cluster_summaries is not None:
            object.__setattr__(self, "cluster_summaries", tuple(self.cluster_summaries))

    @property
    def has_labels(self) -> bool:
        return all(a.relevance is not None for a in self.answers)

    @property
    def n_sentences(self) -> int:
        return sum(len(a.sentences) for a in self.answers)

    def sentences(self) -> list[str]:
        return [s for a in self.answers for s in a.sentences]

    def labels(self) -> list[bool]:
        self._require_labels()
        return [r for a in self.answers for r in a.relevance]

    def _require_labels(self):
        if not self.has_labels:
            raise LabelError("example is missing relevance labels")


@dataclass(frozen=True)
class EaResult:
    raw_extractions: tuple[TokenSeq, ...]
    postprocessed: tuple[tuple[int, ...], ...]
    final_summary: TokenSeq
    basis: TokenSeq = field(default=EMPTY)   # concatenated selected sentences


tok = lru_cache(maxsize=1 << 18)(tokenize)


def concat(texts: Sequence[str]) -> TokenSeq:
    out = EMPTY
    for t in texts:
        out = out + tok(t)
    return out


# --- extraction side ------------------------------------------------------

def sentence_coverage(raw: TokenSeq, sentence: TokenSeq, denominator: str = "sentence",
                      use_stems: bool = True) -> float:
    """ROUGE-1 precision with either the sentence or the raw output as prediction."""
    if denominator == "sentence":
        return rouge_n(sentence, raw, 1, use_stems).precision
    if denominator == "raw":
        return rouge_n(raw, sentence, 1, use_stems).precision
    raise ValueError(f"denominator must be 'sentence' or 'raw', not {denominator!r}")


def extractive_postprocess(raw: TokenSeq, answer: Answer,
                           threshold: float = DEFAULT_THRESHOLD,
                           denominator: Literal["sentence", "raw"] = "sentence",
                           use_stems: bool = True) -> list[int]:
    """Indices of answer sentences covered by the free-form extraction.

    With the default denominator a sentence is kept when at least
    ``threshold`` of its unigrams occur in ``raw``; the boundary is inclusive.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    return [j for j, s in enumerate(answer.sentences)
            if sentence_coverage(raw, tok(s), denominator, use_stems) >= threshold]


def relevance_fractions(example: Example) -> np.ndarray:
    example._require_labels()
    return np.array([sum(a.relevance) / len(a.sentences) for a in example.answers])


def answer_probabilities(example: Example) -> np.ndarray:
    frac = relevance_fractions(example)
    total = frac.sum()
    if total == 0:
        # every answer irrelevant: fall back to uniform
        return np.full(frac.size, 1.0 / frac.size)
    return frac / total


def sample_answer(example: Example, rng_seed) -> int:
    """Draw an answer index with probability proportional to its relevant fraction."""
    p = answer_probabilities(example)
    rng = np.random.default_rng(rng_seed)
    return int(rng.choice(p.size, p=p))


# --- training objective ---------------------------------------------------

def generation_pair(example: Example, prefix: str | None = GENERATE):
    """(question + gold relevant sentences -> summary)."""
    rel = [s for a in example.answers for s in a.relevant_sentences()]
    return make_input(tok(example.question), concat(rel), prefix), tok(example.summary)


def extraction_pair(example: Example, index: int, prefix: str | None = SUMMARIZE):
    """(question + answer ``index`` -> its relevant sentences in document order)."""
    answer = example.answers[index]
    src = make_input(tok(example.question), concat(answer.sentences), prefix)
    return src, concat(answer.relevant_sentences())


def direct_pair(example: Example):
    """(question + every answer sentence -> summary), no relevance labels used."""
    return make_input(tok(example.question), concat(example.sentences())), tok(example.summary)


def multitask_terms(model: SequenceModel, example: Example, sampled_answer: int):
    example._require_labels()
    g_src, g_tgt = generation_pair(example)
    e_src, e_tgt = extraction_pair(example, sampled_answer)
    return -log_likelihood(model, g_src, g_tgt), -log_likelihood(model, e_src, e_tgt)


def multitask_loss(model: SequenceModel, example: Example, sampled_answer: int) -> float:
    """Summary cross-entropy from gold relevant sentences plus one answer's extraction loss."""
    gen, ext = multitask_terms(model, example, sampled_answer)
    return gen + ext


def multitask_pairs(corpus: Sequence[Example], seed: int, epoch: int = 0):
    """Training pairs for one epoch, one sampled answer per example."""
    pairs = []
    for i, ex in enumerate(corpus):
        pairs.append(generation_pair(ex))
        pairs.append(extraction_pair(ex, sample_answer(ex, (seed, epoch, i))))
    return pairs


# --- inference ------------------------------------------------------------

def extract(model: SequenceModel, example: Example, threshold: float = DEFAULT_THRESHOLD,
            max_len: int = 64, denominator: str = "sentence"):
    q = tok(example.question)
    raws, picks = [], []
    for answer in example.answers:
        raw = model.generate(make_input(q, concat(answer.sentences), SUMMARIZE), max_len)
        raws.append(raw)
        picks.append(tuple(extractive_postprocess(raw, answer, threshold, denominator)))
    return tuple(raws), tuple(picks)


def selected_basis(example: Example, picks: Sequence[Sequence[int]]) -> TokenSeq:
    chosen = [a.sentences[j] for a, idx in zip(example.answers, picks) for j in idx]
    return concat(chosen)


def run_inference(model: SequenceModel, example: Example,
                  threshold: float = DEFAULT_THRESHOLD, max_len: int = 64,
                  generator: SequenceModel | None = None,
                  generator_prefix: str | None = GENERATE,
                  denominator: str = "sentence") -> EaResult:
    """Extract per answer, post-process, then generate from the selection.

    ``generator`` swaps in a separately trained model for the final step
    (the pipeline variant). An empty selection leaves only the question.
    """
    raws, picks = extract(model, example, threshold, max_len, denominator)
    basis = selected_basis(example, picks)
    gen = generator if generator is not None else model
    final = gen.generate(make_input(tok(example.question), basis, generator_prefix), max_len)
    return EaResult(raws, picks, final, basis)


# --- distant supervision --------------------------------------------------

def distant_label(example: Example, threshold: float,
                  metric: Literal["precision", "recall", "f1"] = "precision",
                  use_stems: bool = True) -> list[list[bool]]:
    """Mark sentences whose ROUGE-1 overlap with the gold summary reaches ``threshold``.

    ``precision`` is the share of the sentence's unigrams found in the summary.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    if metric not in ("precision", "recall", "f1"):
        raise ValueError(f"unknown metric {metric!r}")
    summ = tok(example.summary)
    out = []
    for a in example.answers:
        out.append([getattr(rouge_n(tok(s), summ, 1, use_stems), metric) >= threshold
                    for s in a.sentences])
    return out


@dataclass(frozen=True)
class Overlap:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    def as_dict(self) -> dict:
        return {"TP": self.tp, "FP": self.fp, "FN": self.fn, "TN": self.tn,
                "precision": self.precision, "recall": self.recall}


def overlap_report(gold: Sequence[Sequence[bool]], distant: Sequence[Sequence[bool]]) -> Overlap:
    if len(gold) != len(distant):
        raise ValueError(f"{len(gold)} gold answers vs {len(distant)} distant answers")
    tp = fp = fn = tn = 0
    for i, (g_row, d_row) in enumerate(zip(gold, distant)):
        if len(g_row) != len(d_row):
            raise ValueError(f"answer {i}: {len(g_row)} gold labels vs {len(d_row)} distant")
        for g, d in zip(g_row, d_row):
            if g and d:
                tp += 1
            elif d:
                fp += 1
            elif g:
                fn += 1
            else:
                tn += 1
    return Overlap(tp, fp, fn, tn)

