"""Exact information quantities over small dense joint distributions.

All quantities are in nats. A :class:`JointDistribution` is an immutable
dense table over named finite variables, stored row-major in variable order.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

MAX_CELLS = 10**7
NORM_TOL = 1e-9
RENORM_TOL = 1e-6


class DistributionError(ValueError):
    pass


class JointDistribution:
    """Dense probability table over named finite variables."""

    __slots__ = ("_names", "_cards", "_probs")

    def __init__(self, variables: Sequence[tuple[str, int]], probs):
        names = tuple(str(n) for n, _ in variables)
        cards = tuple(int(c) for _, c in variables)
        if len(set(names)) != len(names):
            raise DistributionError(f"duplicate variable names in {names}")
        if any(c < 1 for c in cards):
            raise DistributionError(f"cardinalities must be >= 1, got {cards}")
        size = int(np.prod(cards, dtype=np.int64)) if cards else 1
        if size > MAX_CELLS:
            raise DistributionError(
                f"table of {size} cells exceeds the dense cap of {MAX_CELLS}")
        arr = np.array(probs, dtype=np.float64)
        if arr.size != size:
            raise DistributionError(
                f"expected {size} probabilities for cardinalities {cards}, got {arr.size}")
        arr = arr.reshape(cards)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DistributionError("probabilities must be finite and nonnegative")
        total = float(arr.sum())
        if abs(total - 1.0) > NORM_TOL:
            if abs(total - 1.0) >= RENORM_TOL:
                raise DistributionError(f"probabilities sum to {total!r}, not 1")
            arr = arr / total
        arr.setflags(write=False)
        self._names = names
        self._cards = cards
        self._probs = arr

    @classmethod
    def _trusted(cls, names, cards, arr) -> "JointDistribution":
        # internal constructor for tables derived from an already-valid one
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        arr.setflags(write=False)
        obj._names = tuple(names)
        obj._cards = tuple(cards)
        obj._probs = arr
        return obj

    @property
    def variables(self) -> tuple[tuple[str, int], ...]:
        return tuple(zip(self._names, self._cards))

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def cards(self) -> tuple[int, ...]:
        return self._cards

    @property
    def table(self) -> np.ndarray:
        """Read-only array shaped by the cardinalities."""
        return self._probs

    @property
    def probs(self) -> np.ndarray:
        return self._probs.reshape(-1)

    def axis(self, name: str) -> int:
        try:
            return self._names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}; have {list(self._names)}") from None

    def __repr__(self):
        return f"JointDistribution({list(self.variables)})"

    def __eq__(self, other):
        if not isinstance(other, JointDistribution):
            return NotImplemented
        return (self.variables == other.variables
                and np.array_equal(self._probs, other._probs))

    __hash__ = None


def _as_set(vars_: Iterable[str] | str | None) -> tuple[str, ...]:
    if vars_ is None:
        return ()
    if isinstance(vars_, str):
        return (vars_,)
    return tuple(vars_)


def _check_known(dist: JointDistribution, names: Iterable[str]) -> None:
    for n in names:
        if n not in dist.names:
            raise KeyError(f"unknown variable {n!r}; have {list(dist.names)}")


def marginalize(dist: JointDistribution, keep) -> JointDistribution:
    """Sum out every variable not in ``keep``; variable order is preserved."""
    keep = set(_as_set(keep))
    if not keep:
        raise ValueError("keep must name at least one variable")
    _check_known(dist, keep)
    drop = tuple(i for i, n in enumerate(dist.names) if n not in keep)
    if not drop:
        return dist
    arr = dist.table.sum(axis=drop)
    idx = [i for i in range(len(dist.names)) if i not in drop]
    return JointDistribution._trusted(
        [dist.names[i] for i in idx], [dist.cards[i] for i in idx], arr)


def _entropy_of(p: np.ndarray) -> float:
    p = p[p > 0]
    # a point mass summed to 1 + ulp would give a tiny negative value
    return max(float(-(p * np.log(p)).sum()), 0.0)


def entropy(dist: JointDistribution, vars_) -> float:
    """Joint Shannon entropy of ``vars_`` (empty set gives 0)."""
    names = _as_set(vars_)
    _check_known(dist, names)
    if not names:
        return 0.0
    drop = tuple(i for i, n in enumerate(dist.names) if n not in names)
    p = dist.table.sum(axis=drop) if drop else dist.table
    return _entropy_of(p.reshape(-1))


def _disjoint(*groups: tuple[str, ...]) -> None:
    seen: set[str] = set()
    for g in groups:
        overlap = seen.intersection(g)
        if overlap:
            raise ValueError(f"variable sets overlap on {sorted(overlap)}")
        seen.update(g)


def conditional_entropy(dist: JointDistribution, target, given=None) -> float:
    target, given = _as_set(target), _as_set(given)
    _check_known(dist, target + given)
    _disjoint(target, given)
    h = entropy(dist, target + given) - entropy(dist, given)
    if h < 0:
        if h < -1e-9:
            raise ArithmeticError(f"conditional entropy came out negative: {h!r}")
        h = 0.0
    return h


def mutual_information(dist: JointDistribution, a, b, given=None) -> float:
    """I(a; b | given) = H(a|given) - H(a|b, given)."""
    a, b, given = _as_set(a), _as_set(b), _as_set(given)
    _check_known(dist, a + b + given)
    _disjoint(a, b, given)
    h_ag = entropy(dist, a + given) - entropy(dist, given)
    h_abg = entropy(dist, a + b + given) - entropy(dist, b + given)
    mi = h_ag - h_abg
    if mi < -1e-10:
        raise ArithmeticError(f"mutual information came out negative: {mi!r}")
    return max(mi, 0.0)
