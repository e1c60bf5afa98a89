import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from desne.distance import (InvariantError, _finish, gram, pairwise_sq_dist,
                            pairwise_sq_dist_naive, row_norms)


def loop_norms(x):
    return np.array([sum(v * v for v in row) for row in x])


def test_row_norms():
    assert row_norms(np.array([[3.0, 4.0]])).tolist() == [25.0]
    assert not row_norms(np.zeros((4, 3))).any()
    x = np.random.default_rng(1).normal(size=(50, 10))
    np.testing.assert_allclose(row_norms(x), loop_norms(x), rtol=1e-12)


def test_gram_examples():
    assert gram(np.eye(2)).tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert gram(np.array([[2.0, 2.0]])).tolist() == [[8.0]]
    x = np.random.default_rng(2).normal(size=(30, 7))
    np.testing.assert_allclose(gram(x, tile=1), gram(x, tile=64), atol=1e-10)
    np.testing.assert_allclose(gram(x, tile=7), x @ x.T, atol=1e-10)


def test_pairwise_examples():
    assert pairwise_sq_dist(np.array([[0.0], [3.0]])).d2.tolist() == [[0.0, 9.0], [9.0, 0.0]]
    dup = pairwise_sq_dist(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])).d2
    assert dup[0, 1] == 0.0
    x = np.random.default_rng(3).normal(size=(40, 12))
    np.testing.assert_allclose(pairwise_sq_dist(x).d2, pairwise_sq_dist_naive(x).d2, atol=1e-8)


def test_naive_examples():
    assert pairwise_sq_dist_naive(np.ones((1, 5))).d2.tolist() == [[0.0]]
    assert pairwise_sq_dist_naive(np.array([[0.0, 0.0], [1.0, 1.0]])).d2[0, 1] == 2.0


def test_large_negative_raises():
    bad = np.array([[0.0, -1e-3], [-1e-3, 0.0]])
    with pytest.raises(InvariantError):
        _finish(bad)


mats = st.integers(2, 25).flatmap(
    lambda n: st.integers(1, 12).flatmap(
        lambda d: arrays(np.float64, (n, d), elements=st.floats(-100, 100))
    )
)


@given(mats)
def test_decomposition_matches_naive(x):
    a = pairwise_sq_dist(x).d2
    b = pairwise_sq_dist_naive(x).d2
    scale = max(1.0, float(np.max(row_norms(x))))
    assert np.max(np.abs(a - b)) <= 1e-12 * scale * 8
    assert np.array_equal(a, a.T)
    assert not np.diag(a).any() and (a >= 0).all()


@given(mats, st.randoms(use_true_random=False))
def test_permutation_equivariance(x, rnd):
    perm = np.array(rnd.sample(range(len(x)), len(x)))
    a = pairwise_sq_dist(x).d2
    b = pairwise_sq_dist(x[perm]).d2
    scale = max(1.0, float(np.max(row_norms(x))))
    assert np.max(np.abs(a[np.ix_(perm, perm)] - b)) <= 1e-12 * scale * 8


def test_triangle_inequality():
    x = np.random.default_rng(4).normal(size=(60, 5))
    r = np.sqrt(pairwise_sq_dist(x).d2)
    i, j, k = np.random.default_rng(5).integers(0, 60, size=(3, 2000))
    assert np.all(r[i, k] <= r[i, j] + r[j, k] + 1e-6)
