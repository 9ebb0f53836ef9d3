import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from poissoncdo.stats import Moments

samples = arrays(np.float64, st.integers(2, 60), elements=st.floats(-1e3, 1e3))


@given(samples, st.integers(1, 59))
def test_merge_matches_pooled(y, cut):
    cut = min(cut, len(y) - 1)
    m = Moments.from_samples(y[:cut]).merge(Moments.from_samples(y[cut:]))
    assert m.n == len(y)
    assert m.mean == pytest.approx(y.mean(), abs=1e-9)
    assert m.variance == pytest.approx(y.var(ddof=1), rel=1e-9, abs=1e-7)


@given(samples)
def test_sparse_equals_dense(y):
    base = 0.5
    y = y.copy()
    y[::2] = base
    dev = (y - base)[y != base]
    m = Moments.from_sparse(len(y), base, dev)
    assert m.mean == pytest.approx(y.mean(), abs=1e-9)
    assert m.variance == pytest.approx(y.var(ddof=1), rel=1e-9, abs=1e-7)


def test_sparse_along_columns():
    rng = np.random.default_rng(0)
    y = rng.normal(size=(3, 40))
    m = Moments.from_sparse(40, np.zeros(3), y, axis=1)
    assert np.allclose(m.mean, y.mean(axis=1))
    assert np.allclose(m.variance, y.var(axis=1, ddof=1))


def test_empty_identities():
    e = Moments.empty((2,))
    m = Moments.from_samples(np.ones((3, 2)))
    assert e.merge(m) is m and m.merge(e) is m
    assert np.all(Moments.from_samples(np.ones((1, 2))).variance == 0)
