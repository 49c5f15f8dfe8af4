"""Discrete causal model for extract-and-generate summarization.

The chain is ``(Q, X) -> (Q, X_R) -> Y``::

    q   ~ p(q)
    x   ~ p(x | q)
    x_r ~ p(x_r | q, x)      extractor, exogenous noise folded in
    y   ~ p(y | q, x_r)      generator, exogenous noise folded in

Labels of X, X_R and Y are whitespace-joined sentence symbols, so a document
``"s3 s0 s5"`` holds three sentences and an extraction ``"s0"`` names the
sentence it kept. Everything here is exact; nothing is estimated.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .info import (
    MAX_CELLS,
    RENORM_TOL,
    DistributionError,
    JointDistribution,
    conditional_entropy,
    marginalize,
)

Q, X, XR, Y = "Q", "X", "X_R", "Y"
VARIABLES = (Q, X, XR, Y)
SEM_FORMAT = "eacausal.sem/1"


class SemError(ValueError):
    pass


class ExampleKind(str, enum.Enum):
    ALL_RELEVANT = "all-relevant"
    FIRST_ONLY = "first-only"
    UNIFORM_PICK = "uniform-pick"


def _rows(table, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.array(table, dtype=np.float64)
    if arr.shape != shape:
        raise SemError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise SemError(f"{what}: entries must be finite and nonnegative")
    sums = arr.sum(axis=-1, keepdims=True)
    dev = np.abs(sums - 1.0)
    if np.any(dev >= RENORM_TOL):
        bad = np.unravel_index(int(np.argmax(dev)), dev.shape[:-1])
        raise SemError(f"{what}: row {tuple(int(i) for i in bad)} sums to "
                       f"{float(sums[bad + (0,)]):.12g}, not 1")
    if np.any(dev > 1e-12):
        arr = arr / sums
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Sem:
    """Conditional tables of the chain. Immutable once built."""

    q_alphabet: tuple[str, ...]
    x_alphabet: tuple[str, ...]
    r_alphabet: tuple[str, ...]
    y_alphabet: tuple[str, ...]
    q_prior: np.ndarray        # (|Q|,)
    x_given_q: np.ndarray      # (|Q|, |X|)
    extractor: np.ndarray      # (|Q|, |X|, |X_R|)
    generator: np.ndarray      # (|Q|, |X_R|, |Y|)

    def __post_init__(self):
        alphabets = {}
        for name in ("q_alphabet", "x_alphabet", "r_alphabet", "y_alphabet"):
            alpha = tuple(str(a) for a in getattr(self, name))
            if not alpha:
                raise SemError(f"{name} must be nonempty")
            if len(set(alpha)) != len(alpha):
                raise SemError(f"{name} has duplicate symbols")
            object.__setattr__(self, name, alpha)
            alphabets[name] = len(alpha)
        nq, nx = alphabets["q_alphabet"], alphabets["x_alphabet"]
        nr, ny = alphabets["r_alphabet"], alphabets["y_alphabet"]
        object.__setattr__(self, "q_prior", _rows(self.q_prior, (nq,), "q_prior"))
        object.__setattr__(self, "x_given_q", _rows(self.x_given_q, (nq, nx), "x_given_q"))
        object.__setattr__(self, "extractor", _rows(self.extractor, (nq, nx, nr), "extractor"))
        object.__setattr__(self, "generator", _rows(self.generator, (nq, nr, ny), "generator"))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (len(self.q_alphabet), len(self.x_alphabet),
                len(self.r_alphabet), len(self.y_alphabet))

    def alphabet(self, var: str) -> tuple[str, ...]:
        return {Q: self.q_alphabet, X: self.x_alphabet,
                XR: self.r_alphabet, Y: self.y_alphabet}[var]

    def __eq__(self, other):
        if not isinstance(other, Sem):
            return NotImplemented
        return (self.shape == other.shape
                and all(self.alphabet(v) == other.alphabet(v) for v in VARIABLES)
                and np.array_equal(self.q_prior, other.q_prior)
                and np.array_equal(self.x_given_q, other.x_given_q)
                and np.array_equal(self.extractor, other.extractor)
                and np.array_equal(self.generator, other.generator))

    __hash__ = None


@dataclass(frozen=True)
class CausalReport:
    flow_full: float       # I({Q,X} -> Y)
    flow_relevant: float   # I({Q,X_R} -> Y)
    ce_flow: float
    ce_entropy: float
    l_f: float
    l_g: float

    def residuals(self) -> dict[str, float]:
        return {
            "flow_vs_entropy": abs(self.ce_flow - self.ce_entropy),
            "risk_gap": abs(self.l_f - self.l_g - self.ce_entropy),
        }

    def as_dict(self, scale: float = 1.0) -> dict[str, float]:
        return {k: getattr(self, k) * scale for k in
                ("flow_full", "flow_relevant", "ce_flow", "ce_entropy", "l_f", "l_g")}


# --- joint construction and interventions ---------------------------------

def _check_size(sem: Sem) -> None:
    cells = math.prod(sem.shape)
    if cells > MAX_CELLS:
        raise DistributionError(
            f"joint over {sem.shape} has {cells} cells, above the cap of {MAX_CELLS}")


def _factors(sem: Sem) -> dict[str, np.ndarray]:
    # each mechanism broadcast over axes (q, x, x_r, y)
    return {
        Q: sem.q_prior[:, None, None, None],
        X: sem.x_given_q[:, :, None, None],
        XR: sem.extractor[:, :, :, None],
        Y: sem.generator[:, None, :, :],
    }


def _product(factors: Iterable[np.ndarray], shape) -> np.ndarray:
    out = np.ones(shape)
    for f in factors:
        out = out * f
    return out


def build_joint(sem: Sem) -> JointDistribution:
    """p(q, x, x_r, y) = p(q) p(x|q) p(x_r|q,x) p(y|q,x_r)."""
    _check_size(sem)
    arr = _product(_factors(sem).values(), sem.shape)
    return JointDistribution(list(zip(VARIABLES, sem.shape)), arr)


def _check_sources(sem: Sem, sources) -> tuple[str, ...]:
    if isinstance(sources, str):
        sources = (sources,)
    sources = tuple(dict.fromkeys(sources))
    if not sources:
        raise SemError("intervention needs at least one source variable")
    for s in sources:
        if s == Y:
            raise SemError("cannot intervene on Y: nothing downstream to measure")
        if s not in VARIABLES:
            raise SemError(f"unknown variable {s!r}")
    return tuple(v for v in VARIABLES if v in sources)


def _symbol_index(sem: Sem, var: str, value) -> int:
    alpha = sem.alphabet(var)
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        if not 0 <= value < len(alpha):
            raise SemError(f"index {value} outside the {var} alphabet")
        return int(value)
    try:
        return alpha.index(str(value))
    except ValueError:
        raise SemError(f"{value!r} is not in the {var} alphabet") from None


def do(sem: Sem, assignment: dict) -> JointDistribution:
    """Truncated factorization with every assigned mechanism set to a point mass."""
    srcs = _check_sources(sem, tuple(assignment))
    _check_size(sem)
    factors = _factors(sem)
    for var in srcs:
        axis = VARIABLES.index(var)
        point = np.zeros(sem.shape[axis])
        point[_symbol_index(sem, var, assignment[var])] = 1.0
        shape = [1, 1, 1, 1]
        shape[axis] = -1
        factors[var] = point.reshape(shape)
    arr = _product(factors.values(), sem.shape)
    return JointDistribution(list(zip(VARIABLES, sem.shape)), arr)


def intervene(sem: Sem, var: str, value) -> JointDistribution:
    return do(sem, {var: value})


def interventional_table(sem: Sem, sources) -> np.ndarray:
    """p(y | do(S=s)) for every joint assignment s, shape (*|S|, |Y|).

    Dropping the source mechanisms and summing the remaining factors over
    the non-source variables gives all interventional conditionals at once.
    """
    srcs = _check_sources(sem, sources)
    _check_size(sem)
    factors = _factors(sem)
    rest = _product((f for v, f in factors.items() if v not in srcs), sem.shape)
    drop = tuple(i for i, v in enumerate(VARIABLES[:3]) if v not in srcs)
    return rest.sum(axis=drop) if drop else rest


def _source_marginal(joint: JointDistribution, srcs: tuple[str, ...]) -> np.ndarray:
    return marginalize(joint, srcs).table


def information_flow(sem: Sem, sources, target: str = Y,
                     joint: JointDistribution | None = None) -> float:
    """Causal information flow from the joint source set to Y.

    sum_s p(s) sum_y p(y|do(s)) log[p(y|do(s)) / sum_s' p(s') p(y|do(s'))]
    """
    if target != Y:
        raise SemError("information flow is only defined into Y")
    srcs = _check_sources(sem, sources)
    joint = joint if joint is not None else build_joint(sem)
    p_s = _source_marginal(joint, srcs).reshape(-1)
    p_do = interventional_table(sem, srcs).reshape(p_s.size, -1)
    mix = p_s @ p_do
    live = p_s > 0
    p_s, p_do = p_s[live], p_do[live]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p_do > 0, p_do * np.log(p_do / mix), 0.0)
    flow = float(p_s @ terms.sum(axis=1))
    if flow < -1e-10:
        raise ArithmeticError(f"information flow came out negative: {flow!r}")
    return max(flow, 0.0)


def causal_effect_irrelevant(sem: Sem) -> CausalReport:
    joint = build_joint(sem)
    flow_full = information_flow(sem, (Q, X), joint=joint)
    flow_rel = information_flow(sem, (Q, XR), joint=joint)
    # Markov chain => flow_rel >= flow_full; a real negative is an engine bug
    signed = flow_rel - flow_full
    if signed < -1e-10:
        raise ArithmeticError(
            f"relevant-set flow below full-input flow by {-signed:.3e} nats")
    ce_entropy = (conditional_entropy(joint, XR, (X, Q))
                  - conditional_entropy(joint, XR, (X, Q, Y)))
    if ce_entropy < -1e-10:
        raise ArithmeticError(f"entropy-side causal effect negative: {ce_entropy!r}")
    return CausalReport(
        flow_full=flow_full,
        flow_relevant=flow_rel,
        ce_flow=abs(signed),
        ce_entropy=ce_entropy,
        l_f=conditional_entropy(joint, Y, (Q, X)),
        l_g=conditional_entropy(joint, Y, (Q, XR)),
    )


def ce_conditional_mi(sem: Sem) -> float:
    """I(X_R; Y | X, Q) summed cell by cell as a KL divergence.

    Deliberately avoids the entropy helpers so it cross-checks them.
    """
    p = build_joint(sem).table                      # axes q, x, x_r, y
    p_qx = p.sum(axis=(2, 3), keepdims=True)
    p_qxr = p.sum(axis=3, keepdims=True)
    p_qxy = p.sum(axis=2, keepdims=True)
    live = p > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (p * p_qx) / (p_qxr * p_qxy)
        cmi = float(np.where(live, p * np.log(np.where(live, ratio, 1.0)), 0.0).sum())
    if cmi < -1e-10:
        raise ArithmeticError(f"conditional mutual information negative: {cmi!r}")
    return max(cmi, 0.0)


# --- model families -------------------------------------------------------

def _doc_label(symbols: Sequence[str]) -> str:
    return " ".join(symbols)


def example_sem(kind, n_sentences: int, vocab: int | None = None, seed: int = 0,
                n_docs: int = 16, distinct: bool = True) -> Sem:
    """The three worked examples as concrete chains.

    Documents are ``n_sentences`` sentence symbols drawn from ``vocab``
    symbols; ``n_docs`` random documents form the support of p(x). With
    ``distinct`` the symbols in a document never repeat, so a uniformly
    picked sentence carries exactly ``log n_sentences`` nats. The summary
    copies the extraction verbatim in every kind.
    """
    kind = ExampleKind(kind)
    if n_sentences < 1:
        raise SemError("n_sentences must be >= 1")
    if n_docs < 1:
        raise SemError("n_docs must be >= 1")
    vocab = n_sentences if vocab is None else int(vocab)
    if vocab < 1:
        raise SemError("vocab must be >= 1")
    if distinct and vocab < n_sentences:
        raise SemError(f"vocab={vocab} cannot fill {n_sentences} distinct sentences")
    rng = np.random.default_rng(seed)
    symbols = [f"s{i}" for i in range(vocab)]
    counts: dict[tuple[int, ...], int] = {}
    for _ in range(n_docs):
        doc = tuple(int(i) for i in rng.choice(vocab, size=n_sentences, replace=not distinct))
        counts[doc] = counts.get(doc, 0) + 1
    docs = sorted(counts)
    x_alpha = [_doc_label([symbols[i] for i in d]) for d in docs]
    x_prior = np.array([counts[d] for d in docs], dtype=np.float64) / n_docs

    if kind is ExampleKind.ALL_RELEVANT:
        r_alpha = list(x_alpha)
        extractor = np.eye(len(docs))
    else:
        r_alpha = list(symbols)
        extractor = np.zeros((len(docs), vocab))
        for row, d in enumerate(docs):
            if kind is ExampleKind.FIRST_ONLY:
                extractor[row, d[0]] = 1.0
            else:
                for i in d:
                    extractor[row, i] += 1.0 / n_sentences
    return Sem(
        q_alphabet=("q0",),
        x_alphabet=tuple(x_alpha),
        r_alphabet=tuple(r_alpha),
        y_alphabet=tuple(r_alpha),
        q_prior=np.ones(1),
        x_given_q=x_prior[None, :],
        extractor=extractor[None, :, :],
        generator=np.eye(len(r_alpha))[None, :, :],
    )


def random_sem(cardinalities: Sequence[int], concentration: float = 1.0,
               seed: int = 0) -> Sem:
    """Every conditional row drawn from a symmetric Dirichlet."""
    if len(cardinalities) != 4:
        raise SemError("cardinalities must give (|Q|, |X|, |X_R|, |Y|)")
    nq, nx, nr, ny = (int(c) for c in cardinalities)
    if min(nq, nx, nr, ny) < 1:
        raise SemError("cardinalities must be >= 1")
    if concentration <= 0:
        raise SemError("concentration must be positive")
    cells = nq * nx * nr * ny
    if cells > MAX_CELLS:
        raise DistributionError(f"random SEM would need {cells} joint cells")
    rng = np.random.default_rng(seed)

    def dirichlet(k, size):
        return rng.dirichlet(np.full(k, float(concentration)), size=size)

    return Sem(
        q_alphabet=tuple(f"q{i}" for i in range(nq)),
        x_alphabet=tuple(f"x{i}" for i in range(nx)),
        r_alphabet=tuple(f"r{i}" for i in range(nr)),
        y_alphabet=tuple(f"y{i}" for i in range(ny)),
        q_prior=dirichlet(nq, None),
        x_given_q=dirichlet(nx, nq),
        extractor=dirichlet(nr, (nq, nx)),
        generator=dirichlet(ny, (nq, nr)),
    )


def _draw(rng: np.random.Generator, rows: np.ndarray, parent: np.ndarray) -> np.ndarray:
    # inverse-CDF draw from rows[parent[i]] for every i
    cdf = np.cumsum(rows, axis=-1)
    cdf[:, -1] = 1.0
    u = rng.random(parent.shape[0])
    out = np.empty(parent.shape[0], dtype=np.int64)
    for p in np.unique(parent):
        sel = parent == p
        out[sel] = np.searchsorted(cdf[p], u[sel], side="right")
    return np.minimum(out, rows.shape[-1] - 1)


def sample_indices(sem: Sem, count: int, seed: int) -> np.ndarray:
    """Ancestral samples as an (count, 4) integer array of (q, x, x_r, y)."""
    if count < 1:
        raise SemError("count must be >= 1")
    nq, nx, nr, ny = sem.shape
    rng = np.random.default_rng(seed)
    q = _draw(rng, sem.q_prior[None, :], np.zeros(count, dtype=np.int64))
    x = _draw(rng, sem.x_given_q, q)
    r = _draw(rng, sem.extractor.reshape(nq * nx, nr), q * nx + x)
    y = _draw(rng, sem.generator.reshape(nq * nr, ny), q * nr + r)
    return np.stack([q, x, r, y], axis=1)


def sample_sem(sem: Sem, count: int, seed: int) -> list[tuple[str, str, str, str]]:
    idx = sample_indices(sem, count, seed)
    qa, xa, ra, ya = sem.q_alphabet, sem.x_alphabet, sem.r_alphabet, sem.y_alphabet
    return [(qa[q], xa[x], ra[r], ya[y]) for q, x, r, y in idx.tolist()]


# --- persistence ----------------------------------------------------------

def sem_to_dict(sem: Sem) -> dict:
    return {
        "format": SEM_FORMAT,
        "alphabets": {Q: list(sem.q_alphabet), X: list(sem.x_alphabet),
                      XR: list(sem.r_alphabet), Y: list(sem.y_alphabet)},
        "q_prior": sem.q_prior.tolist(),
        "x_given_q": sem.x_given_q.tolist(),
        "extractor": sem.extractor.tolist(),
        "generator": sem.generator.tolist(),
    }


_SHORTHAND_KEYS = {"kind", "n_sentences", "vocab", "seed", "n_docs", "distinct"}


def sem_from_dict(data: dict) -> Sem:
    if "kind" in data:
        extra = set(data) - _SHORTHAND_KEYS - {"format"}
        if extra:
            raise SemError(f"unknown shorthand fields {sorted(extra)}")
        return example_sem(
            data["kind"], int(data["n_sentences"]), data.get("vocab"),
            int(data.get("seed", 0)), int(data.get("n_docs", 16)),
            bool(data.get("distinct", True)))
    fmt = data.get("format", SEM_FORMAT)
    if fmt != SEM_FORMAT:
        raise SemError(f"unsupported SEM format {fmt!r}")
    try:
        alpha = data["alphabets"]
        return Sem(
            q_alphabet=tuple(alpha[Q]), x_alphabet=tuple(alpha[X]),
            r_alphabet=tuple(alpha[XR]), y_alphabet=tuple(alpha[Y]),
            q_prior=data["q_prior"], x_given_q=data["x_given_q"],
            extractor=data["extractor"], generator=data["generator"],
        )
    except KeyError as exc:
        raise SemError(f"SEM file missing field {exc}") from None


def save_sem(sem: Sem, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(sem_to_dict(sem), indent=1) + "\n", encoding="utf-8")


def load_sem(path) -> Sem:
    with open(path, encoding="utf-8") as fh:
        return sem_from_dict(json.load(fh))
