"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``EACAUSAL_PURE_PYTHON=1`` is set, the pure-Python versions are used.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("EACAUSAL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

murmurhash3_32 = _impl.murmurhash3_32
hash_features = _impl.hash_features
_lcs_ids = _impl.lcs_length


def lcs_length(a, b) -> int:
    """LCS length of two token sequences (any hashable tokens)."""
    ids: dict = {}
    ia = [ids.setdefault(t, len(ids)) for t in a]
    ib = [ids.setdefault(t, len(ids)) for t in b]
    return _lcs_ids(ia, ib)
