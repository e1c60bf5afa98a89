import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from desne.de import DEConfig, _donors, de_optimize, de_optimize_batch, row_seed


def test_identity_objective():
    r = de_optimize(lambda x: x, 15.0, DEConfig(seed=3))
    assert abs(r.best - 15.0) <= 1e-10


def test_seeded_determinism():
    f = lambda x: math.sin(x / 50.0) * x  # noqa: E731
    a = de_optimize(f, 3.0, DEConfig(seed=11, max_iter=200))
    b = de_optimize(f, 3.0, DEConfig(seed=11, max_iter=200))
    assert a == b


def test_epsilon_stop():
    r = de_optimize(lambda x: x, 15.0, DEConfig(seed=1, epsilon=1e-3))
    assert r.best_error <= 1e-3
    full = de_optimize(lambda x: x, 15.0, DEConfig(seed=1))
    assert r.generations < full.generations


@given(st.integers(0, 2**32), st.floats(1.0, 900.0))
def test_stays_in_bounds(seed, target):
    cfg = DEConfig(seed=seed, max_iter=40, lb=2.0, ub=500.0)
    r = de_optimize(lambda x: x * x, target, cfg)
    assert cfg.lb <= r.best <= cfg.ub


@given(st.integers(0, 2**32))
def test_donors_distinct(seed):
    u = np.random.default_rng(seed).random((30, 30))
    abc, crand = _donors(u)
    for i, (a, b, c) in enumerate(abc):
        assert len({a, b, c, i}) == 4
    assert crand.shape == (30,)


def test_batch_matches_scalar():
    targets = np.array([2.0, 15.0, 40.0, 0.5])
    cfg = DEConfig(lb=-5.0, ub=5.0, seed=4)
    seeds = [row_seed(4, r) for r in range(4)]
    scale = np.array([1.0, 2.0, 3.0, 0.25])
    best, err, evals, gens = de_optimize_batch(
        lambda x, rows: np.exp(x) * scale[rows], targets, cfg, seeds
    )
    for r in range(4):
        one = de_optimize(lambda x: math.exp(x) * scale[r], targets[r],
                          cfg.with_seed(seeds[r]))
        assert (one.best, one.best_error, one.evals, one.generations) == (
            best[r], err[r], evals[r], gens[r])


def test_restart_rescues_collapse():
    # Without restarts a narrow basin can trap the population; with them the
    # final error must be at float resolution.
    f = lambda x: abs(x - 7.0) ** 0.1 * 10  # noqa: E731
    r = de_optimize(f, 0.0, DEConfig(seed=0, lb=-1000, ub=1000))
    assert r.best_error < 1e-9 * 10


def test_config_validation():
    import pytest

    for kw in ({"cr": 0.0}, {"f_weight": 2.0}, {"lb": 5.0, "ub": 1.0}, {"pop_size": 3}):
        with pytest.raises(ValueError):
            DEConfig(**kw)
