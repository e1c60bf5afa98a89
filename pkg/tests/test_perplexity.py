import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from desne.de import DEConfig
from desne.distance import pairwise_sq_dist
from desne.perplexity import (anneal, anneal_sigma, binary_search_sigma, conditional_matrix,
                              conditional_row, de_sigma, joint_affinities, perplexity_of_sigma,
                              row_perplexity, solve_sigmas)
from desne.synthetic import gaussian_blobs


def blob_d2(n=64, d=5, seed=0):
    return pairwise_sq_dist(gaussian_blobs(n, d, 1, seed=seed).data).d2


def test_conditional_examples():
    p = conditional_row(np.array([0.0, 2.0, 2.0]), 0, 1.0)
    np.testing.assert_allclose(p, [0.0, 0.5, 0.5])
    p = conditional_row(np.array([0.0, 1.0, 1e9]), 0, 1.0)
    np.testing.assert_allclose(p, [0.0, 1.0, 0.0], atol=1e-300)


def test_conditional_matches_direct_formula():
    row = np.random.default_rng(0).uniform(0, 3, 20)
    row[4] = 0.0
    sigma = 0.7
    e = np.exp(-row / (2 * sigma**2))
    e[4] = 0.0
    np.testing.assert_allclose(conditional_row(row, 4, sigma), e / e.sum(), rtol=0, atol=1e-12)


@given(arrays(np.float64, 12, elements=st.floats(0, 50)), st.floats(0, 1e4),
       st.floats(0.05, 20))
def test_conditional_shift_invariance(row, c, sigma):
    a = conditional_row(row, 0, sigma)
    b = conditional_row(row + c, 0, sigma)
    assert np.max(np.abs(a - b)) <= 1e-12
    assert abs(a.sum() - 1) <= 1e-12 and a[0] == 0


def test_row_perplexity_examples():
    assert row_perplexity([0.5, 0.5]) == pytest.approx(2.0)
    for k in (3, 7, 20):
        assert row_perplexity(np.full(k, 1.0 / k)) == pytest.approx(k)
    assert row_perplexity([0.0, 1.0, 0.0]) == 1.0


@given(arrays(np.float64, 15, elements=st.floats(0, 100)), st.floats(0.01, 100))
def test_perplexity_bounds_and_log_form(row, sigma):
    row[0] = 0.0
    p = conditional_row(row, 0, sigma)
    direct = row_perplexity(p)
    assert 1 - 1e-9 <= direct <= np.count_nonzero(p) + 1e-9
    assert perplexity_of_sigma(row, 0, sigma) == pytest.approx(direct, rel=1e-9)


def test_degenerate_duplicate_row():
    row = np.zeros(9)
    p = conditional_row(row, 2, 0.3)
    np.testing.assert_allclose(np.delete(p, 2), np.full(8, 1 / 8))
    sv = solve_sigmas(np.zeros((9, 9)), 5.0, "bs")
    np.testing.assert_allclose(sv.per_row_error, 3.0)


def test_de_on_row():
    d2 = blob_d2()
    s, err = de_sigma(d2[5], 5, 15.0, DEConfig(seed=2))
    assert err <= 1e-6
    assert abs(perplexity_of_sigma(d2[5], 5, s) - 15) == pytest.approx(err, abs=1e-12)


def test_binary_search():
    d2 = blob_d2()
    s, err = binary_search_sigma(d2[0], 0, 15.0)
    assert err <= 1e-6
    assert binary_search_sigma(d2[0], 0, 15.0) == (s, err)
    s, err = binary_search_sigma(d2[0], 0, 80.0)
    assert s == pytest.approx(1000.0, rel=1e-9)
    assert err == pytest.approx(80.0 - 63, abs=1e-3)


def test_anneal():
    x, e = anneal(lambda v: v, 15.0, seed=3)
    assert e <= 1e-3
    d2 = blob_d2()
    assert anneal_sigma(d2[1], 1, 15.0, 9) == anneal_sigma(d2[1], 1, 15.0, 9)


def test_de_beats_sa_on_most_rows():
    d2 = blob_d2(n=96, seed=4)
    de = solve_sigmas(d2, 15.0, "de", seed=4).per_row_error
    sa = solve_sigmas(d2, 15.0, "sa", seed=4).per_row_error
    assert np.mean(de <= sa) >= 0.9


def test_joint_examples():
    p = joint_affinities(np.array([[0.0, 1.0], [1.0, 0.0]])).p
    assert p.tolist() == [[0.0, 0.5], [0.5, 0.0]]
    c = np.full((4, 4), 1 / 3)
    np.fill_diagonal(c, 0.0)
    np.testing.assert_allclose(joint_affinities(c).p, np.where(np.eye(4) > 0, 0, 1 / 12))
    with pytest.raises(ValueError):
        joint_affinities(np.array([[0.0, 0.7], [1.0, 0.0]]))


@given(st.integers(3, 30), st.integers(0, 10_000))
def test_affinity_invariants(n, seed):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    d2 = pairwise_sq_dist(x)
    sv = solve_sigmas(d2, min(5.0, n - 1.5), "bs")
    p = joint_affinities(conditional_matrix(d2, sv.sigma)).p
    assert np.array_equal(p, p.T)
    assert not np.diag(p).any()
    assert abs(p.sum() - 1) <= 1e-9
    off = p[~np.eye(n, dtype=bool)]
    assert off.min() >= 1e-12 * (1 - 1e-9)


def test_solve_small_and_threads():
    d2 = pairwise_sq_dist(np.array([[0.0], [1.0], [3.0]]))
    for opt in ("bs", "de", "sa"):
        sv = solve_sigmas(d2, 2.0, opt, seed=1)
        assert sv.per_row_error.max() <= 1e-3, opt
    d2 = blob_d2(n=150, seed=6)
    a = solve_sigmas(d2, 15.0, "de", seed=5, threads=1)
    b = solve_sigmas(d2, 15.0, "de", seed=5, threads=3)
    assert np.array_equal(a.sigma, b.sigma) and np.array_equal(a.evals, b.evals)
    assert a.mean_error <= 1e-6
    assert np.all((a.sigma >= 1e-20) & (a.sigma <= 1000))


def test_target_range():
    d2 = blob_d2(n=10)
    with pytest.raises(ValueError):
        solve_sigmas(d2, 10.0)
    with pytest.raises(ValueError):
        solve_sigmas(d2, 1.0)
    with pytest.raises(ValueError):
        solve_sigmas(d2, 5.0, "ga")
