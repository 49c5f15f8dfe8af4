"""Small statistics helpers: Spearman correlation and Welch's t-test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _st


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of mid-ranked data."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two equal-length 1-D sequences")
    if x.size < 2:
        raise ValueError("spearman needs at least two points")
    rx, ry = _st.rankdata(x), _st.rankdata(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    sx, sy = math.sqrt(rx @ rx), math.sqrt(ry @ ry)
    if sx == 0 or sy == 0:
        raise ValueError("spearman correlation is undefined for a constant input")
    return float(np.clip((rx @ ry) / (sx * sy), -1.0, 1.0))


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_value: float
    significant_at_05: bool

    def as_dict(self) -> dict:
        return {"t": _finite_or_tag(self.t), "df": _finite_or_tag(self.df),
                "p_value": self.p_value, "significant_at_05": self.significant_at_05}


def _finite_or_tag(v: float):
    # JSON has no infinities; degenerate tests report a string sentinel
    if math.isfinite(v):
        return v
    return "+inf" if v > 0 else "-inf"


def welch_t(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("welch_t needs at least two values per group")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return WelchResult(0.0, float(a.size + b.size - 2), 1.0, False)
        return WelchResult(math.copysign(math.inf, diff), math.inf, 0.0, True)
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    p = float(2 * _st.t.sf(abs(t), df))
    return WelchResult(float(t), float(df), p, p < 0.05)
