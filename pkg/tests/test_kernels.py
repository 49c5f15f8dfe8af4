import os
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from eacausal import _kernels_py, kernels

try:
    from eacausal import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = [pytest.param(_kernels_py, id="python"),
            pytest.param(_compiled, id="compiled",
                         marks=pytest.mark.skipif(_compiled is None,
                                                  reason="extension not built"))]

int_lists = st.lists(st.integers(0, 5), max_size=25)


@pytest.mark.parametrize("impl", BACKENDS)
def test_lcs_known_cases(impl):
    assert impl.lcs_length([], [1, 2]) == 0
    assert impl.lcs_length([1, 2, 3, 4], [1, 3, 2, 4]) == 3
    assert impl.lcs_length([1, 1, 1], [1, 1]) == 2


@pytest.mark.parametrize("impl", BACKENDS)
def test_murmurhash_reference_vectors(impl):
    # published MurmurHash3_x86_32 test vectors
    assert impl.murmurhash3_32(b"", 0) == 0
    assert impl.murmurhash3_32(b"", 1) == 0x514E28B7
    assert impl.murmurhash3_32(b"", 0xFFFFFFFF) == 0x81F16F39
    assert impl.murmurhash3_32(b"\xff\xff\xff\xff", 0) == 0x76293B50
    assert impl.murmurhash3_32(b"\x21\x43\x65\x87", 0) == 0xF55B516B
    assert impl.murmurhash3_32(b"\x21\x43\x65", 0) == 0x7E4A8634
    assert impl.murmurhash3_32(b"\x21\x43", 0) == 0xA0F7B07A
    assert impl.murmurhash3_32(b"\x21", 0) == 0x72661CF4
    assert impl.murmurhash3_32(b"Hello, world!", 1234) == 0xFAF6CDB3


@given(st.text(max_size=40), st.integers(0, 2**32 - 1))
def test_murmurhash_matches_sklearn(text, seed):
    sk = pytest.importorskip("sklearn.utils")
    want = sk.murmurhash3_32(text.encode("utf-8"), seed=seed, positive=True)
    assert _kernels_py.murmurhash3_32(text.encode("utf-8"), seed) == want
    if _compiled is not None:
        assert _compiled.murmurhash3_32(text.encode("utf-8"), seed) == want


@pytest.mark.skipif(_compiled is None, reason="extension not built")
@given(int_lists, int_lists)
def test_backends_agree_on_lcs(a, b):
    assert _compiled.lcs_length(a, b) == _kernels_py.lcs_length(a, b)


@pytest.mark.skipif(_compiled is None, reason="extension not built")
@given(st.lists(st.text(max_size=12), max_size=20), st.integers(0, 2**31),
       st.sampled_from([1, 2, 1 << 10, 1 << 18]))
def test_backends_agree_on_hash_features(keys, seed, dim):
    assert _compiled.hash_features(keys, seed, dim) == _kernels_py.hash_features(keys, seed, dim)


@pytest.mark.parametrize("impl", BACKENDS)
def test_hash_features_layout(impl):
    out = impl.hash_features(["s1:cat", "q1:dog"], 0, 1 << 18)
    for (bucket, sign), key in zip(out, ["s1:cat", "q1:dog"]):
        h = _kernels_py.murmurhash3_32(key.encode(), 0)
        assert bucket == h % (1 << 18)
        assert sign == (1.0 if h < 2**31 else -1.0)


def test_public_lcs_accepts_any_tokens():
    assert kernels.lcs_length(("a", "b", "c"), ("b", "c", "a")) == 2
    assert kernels.BACKEND in ("compiled", "python")


def test_environment_forces_python_backend():
    code = "from eacausal import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, EACAUSAL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"
