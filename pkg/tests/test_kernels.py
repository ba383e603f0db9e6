import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qhboot import _backend, _kernels_python

compiled = pytest.importorskip("qhboot._kernels")

chain = st.integers(1, 40).flatmap(
    lambda J: st.tuples(
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=J, max_size=J, unique=True),
        st.lists(st.floats(-1, 1, allow_nan=False), min_size=J, max_size=J),
    )
)


@given(chain)
def test_compiled_matches_python_bl(xc):
    x, c = xc
    x = np.sort(np.array(x))
    c = np.array(c)
    a = compiled.bl_chain_value(x, c)
    b = _kernels_python.bl_chain_value(x, c)
    assert a == pytest.approx(b, abs=1e-12)


@given(st.integers(2, 30), st.data())
def test_compiled_matches_python_counts(n, data):
    ell = data.draw(st.integers(1, n - 1))
    k = n // ell
    starts = np.array(data.draw(st.lists(st.integers(1, n), min_size=3 * k, max_size=3 * k))).reshape(3, k)
    a = compiled.circular_counts(starts, n, ell)
    b = _kernels_python.circular_counts(starts, n, ell)
    assert np.array_equal(a, b)
    assert np.all(a.sum(axis=1) == k * ell)


def test_counts_by_definition():
    rng = np.random.default_rng(3)
    n, ell = 11, 4
    starts = rng.integers(1, n + 1, size=(50, n // ell))
    for impl in (compiled.circular_counts, _kernels_python.circular_counts):
        W = impl(starts, n, ell)
        for row, s in zip(W, starts):
            direct = np.zeros(n, dtype=int)
            for start in s:
                for j in range(ell):
                    direct[(start - 1 + j) % n] += 1
            assert np.array_equal(row, direct)


def test_backend_selection(monkeypatch):
    import importlib

    monkeypatch.setenv("QHBOOT_PURE_PYTHON", "1")
    mod = importlib.reload(_backend)
    assert mod.COMPILED is False and mod.bl_chain_value is _kernels_python.bl_chain_value
    monkeypatch.setenv("QHBOOT_PURE_PYTHON", "0")
    mod = importlib.reload(_backend)
    assert mod.COMPILED is True
