"""High-dimensional affinities and per-row bandwidth search.

Each row ``i`` of the distance matrix gets a Gaussian bandwidth ``sigma_i``
chosen so that the conditional distribution ``p_{.|i}`` has the requested
perplexity. Three searches are available: bisection (``bs``), differential
evolution (``de``) and simulated annealing (``sa``). Rows are independent;
``solve_sigmas`` processes them in fixed-size blocks that may run on a thread
pool without affecting the result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .de import DEConfig, de_optimize_batch, row_seed
from .kernels import MathBackend

__all__ = [
    "AffinityMatrix",
    "SigmaVector",
    "SAConfig",
    "OPTIMIZERS",
    "conditional_row",
    "conditional_matrix",
    "row_perplexity",
    "perplexity_of_sigma",
    "binary_search_sigma",
    "anneal_sigma",
    "anneal",
    "de_sigma",
    "joint_affinities",
    "solve_sigmas",
]

OPTIMIZERS = ("de", "bs", "sa")
PROB_FLOOR = 1e-12
ARG_CAP = 1e4
LN2 = math.log(2.0)
BLOCK_ROWS = 64
REFERENCE = MathBackend("reference")


@dataclass(frozen=True, eq=False)
class SigmaVector:
    sigma: np.ndarray
    per_row_error: np.ndarray
    optimizer_tag: str
    evals: np.ndarray | None = None

    @property
    def mean_error(self):
        return float(np.mean(self.per_row_error))


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    p: np.ndarray

    @property
    def n(self):
        return self.p.shape[0]


@dataclass(frozen=True)
class SAConfig:
    t0: float = 1.0
    cooling: float = 0.95
    steps: int = 2000
    # Proposal std in log space: step_frac * (ln ub - ln lb) * (T / t0) ** step_power.
    step_frac: float = 0.3
    step_power: float = 0.25
    lb: float = 1e-20
    ub: float = 1000.0


# ------------------------------------------------------------- affinities


def _masked_rows(d2_rows, rows):
    """Distance rows shifted by their nearest-neighbor distance.

    Each row's own entry becomes +inf so it receives zero weight. Shifting by
    the row minimum is the usual max-subtraction: the largest kernel value
    in every row is exactly 1, so nothing overflows and the nearest
    neighbor never underflows.
    """
    d = np.array(d2_rows, dtype=np.float64, ndmin=2)
    k = np.arange(d.shape[0])
    d[k, rows] = np.inf
    if np.isnan(d).any() or not np.all(np.isfinite(d).any(axis=1)):
        raise ValueError("distance row has no finite neighbor or contains NaN")
    d -= d.min(axis=1, keepdims=True)
    return d


def _kernel_rows(dd, sigma, backend):
    """Exponent ``(d - dmin) / 2 sigma^2`` and kernel values for each row."""
    sigma = np.asarray(sigma, dtype=np.float64).reshape(-1, 1)
    if np.any(~(sigma > 0)):
        raise ValueError("sigma must be positive")
    arg = dd * (0.5 / (sigma * sigma))
    # exp(-ARG_CAP) is already 0; capping keeps arg * e finite (no inf * 0).
    np.minimum(arg, ARG_CAP, out=arg)
    return arg, backend.exp(-arg)


def _conditional_rows(dd, sigma, backend):
    _, e = _kernel_rows(dd, sigma, backend)
    return e * backend.recip(e.sum(axis=1))[:, None]


def conditional_row(d2_row, i, sigma, backend=REFERENCE):
    """``p_{j|i}`` for one row; entry ``i`` is 0 and the rest sum to 1."""
    return _conditional_rows(_masked_rows(d2_row, [i]), [sigma], backend)[0]


def conditional_matrix(d2, sigma, backend=REFERENCE):
    d2 = getattr(d2, "d2", d2)
    n = d2.shape[0]
    out = np.empty((n, n))
    for lo in range(0, n, BLOCK_ROWS):
        rows = np.arange(lo, min(lo + BLOCK_ROWS, n))
        out[rows] = _conditional_rows(_masked_rows(d2[rows], rows), sigma[rows], backend)
    return out


def row_perplexity(p_row, backend=REFERENCE):
    """2 ** entropy (bits) of a probability vector; zero entries contribute 0."""
    p = np.asarray(p_row, dtype=np.float64)
    nz = p[p > 0.0]
    return float(2.0 ** -(nz * backend.log2(nz)).sum())


def _perplexity_rows(dd, sigma, backend):
    # With p = e / S:  -sum p log2 p = log2 S + sum(arg * e) / (S ln 2).
    arg, e = _kernel_rows(dd, sigma, backend)
    s = e.sum(axis=1)
    h = backend.log2(s) + (arg * e).sum(axis=1) * backend.recip(s) / LN2
    return 2.0 ** h


def perplexity_of_sigma(d2_row, i, sigma, backend=REFERENCE):
    return float(_perplexity_rows(_masked_rows(d2_row, [i]), [sigma], backend)[0])


# --------------------------------------------------------------- searches


def _bisect_rows(d, target, iters, lb, ub, backend):
    k = d.shape[0]
    lo = np.full(k, lb)
    hi = np.full(k, ub)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = _perplexity_rows(d, mid, backend) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    sigma = 0.5 * (lo + hi)
    err = np.abs(_perplexity_rows(d, sigma, backend) - target)
    return sigma, err, np.full(k, iters + 1)


def binary_search_sigma(d2_row, i, target, iters=64, lb=1e-20, ub=1000.0, backend=REFERENCE):
    """Bisection on sigma; returns ``(sigma, |perplexity - target|)``.

    Assumes perplexity grows with sigma. Where it does not, the bracket
    collapses onto the wrong region and the returned error shows it.
    """
    d = _masked_rows(d2_row, [i])
    sigma, err, _ = _bisect_rows(d, target, iters, lb, ub, backend)
    return float(sigma[0]), float(err[0])


def _step_scales(cfg):
    llo, lhi = math.log(cfg.lb), math.log(cfg.ub)
    temps = cfg.t0 * cfg.cooling ** np.arange(cfg.steps)
    return temps, cfg.step_frac * (lhi - llo) * (temps / cfg.t0) ** cfg.step_power


def anneal(objective, target, seed, cfg=SAConfig()):
    """Simulated annealing over ``log(x)`` for a scalar objective.

    Gaussian proposals whose width shrinks with the temperature, Metropolis
    acceptance on ``|f - target|`` and geometric cooling. Returns
    ``(best_x, best_error)`` over all visited points.
    """
    rng = np.random.default_rng(seed)
    llo, lhi = math.log(cfg.lb), math.log(cfg.ub)
    temps, scales = _step_scales(cfg)
    x = rng.uniform(llo, lhi)
    steps, accept = rng.standard_normal(cfg.steps), rng.random(cfg.steps)
    e = abs(objective(math.exp(x)) - target)
    best_x, best_e = x, e
    for k in range(cfg.steps):
        xn = min(max(x + scales[k] * steps[k], llo), lhi)
        en = abs(objective(math.exp(xn)) - target)
        if en < e or accept[k] < math.exp(-(en - e) / temps[k]):
            x, e = xn, en
            if e < best_e:
                best_x, best_e = x, e
    return math.exp(best_x), best_e


def _anneal_rows(d, target, seeds, cfg, backend):
    k = d.shape[0]
    llo, lhi = math.log(cfg.lb), math.log(cfg.ub)
    temps, scales = _step_scales(cfg)
    x = np.empty(k)
    steps = np.empty((k, cfg.steps))
    accept = np.empty((k, cfg.steps))
    for j, s in enumerate(seeds):
        rng = np.random.default_rng(s)
        x[j] = rng.uniform(llo, lhi)
        steps[j] = rng.standard_normal(cfg.steps)
        accept[j] = rng.random(cfg.steps)
    e = np.abs(_perplexity_rows(d, np.exp(x), backend) - target)
    best_x, best_e = x.copy(), e.copy()
    for s in range(cfg.steps):
        xn = np.minimum(np.maximum(x + scales[s] * steps[:, s], llo), lhi)
        en = np.abs(_perplexity_rows(d, np.exp(xn), backend) - target)
        with np.errstate(over="ignore"):
            take = (en < e) | (accept[:, s] < np.exp(-(en - e) / temps[s]))
        x = np.where(take, xn, x)
        e = np.where(take, en, e)
        improved = take & (e < best_e)
        best_x = np.where(improved, x, best_x)
        best_e = np.where(improved, e, best_e)
    return np.exp(best_x), best_e, np.full(k, cfg.steps + 1)


def anneal_sigma(d2_row, i, target, seed, cfg=SAConfig(), backend=REFERENCE):
    d = _masked_rows(d2_row, [i])
    sigma, err, _ = _anneal_rows(d, target, [seed], cfg, backend)
    return float(sigma[0]), float(err[0])


def _de_rows(d, target, seeds, cfg, backend, space="log"):
    if space == "log":
        # Individuals carry ln(sigma); the bounds are mapped the same way.
        cfg = replace(cfg, lb=math.log(cfg.lb), ub=math.log(cfg.ub))
        to_sigma = np.exp
    elif space == "linear":
        to_sigma = np.asarray
    else:
        raise ValueError(f"unknown DE search space {space!r}")

    def objective(x, rows):
        return _perplexity_rows(d[rows], to_sigma(x), backend)

    targets = np.full(d.shape[0], float(target))
    best, err, evals, _ = de_optimize_batch(objective, targets, cfg, seeds)
    return to_sigma(best), err, evals


def de_sigma(d2_row, i, target, cfg=DEConfig(), backend=REFERENCE, space="log"):
    """DE search for one row, seeded directly by ``cfg.seed``.

    ``space="log"`` evolves ln(sigma) between ln(lb) and ln(ub); ``"linear"``
    evolves sigma itself.
    """
    d = _masked_rows(d2_row, [i])
    sigma, err, _ = _de_rows(d, target, [cfg.seed], cfg, backend, space)
    return float(sigma[0]), float(err[0])


# ---------------------------------------------------------------- drivers


def joint_affinities(conditional):
    """Symmetrize conditionals into joint probabilities ``p_ij``.

    ``(p_{j|i} + p_{i|j}) / 2N`` off the diagonal, floored at 1e-12 and
    renormalized to unit total.
    """
    c = np.asarray(conditional, dtype=np.float64)
    n = c.shape[0]
    off = c.copy()
    np.fill_diagonal(off, 0.0)
    sums = off.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"conditional row {bad} sums to {sums[bad]!r}, not 1")
    p = (off + off.T) / (2.0 * n)
    p = np.maximum(p, PROB_FLOOR)
    np.fill_diagonal(p, 0.0)
    p /= p.sum()
    return AffinityMatrix(p)


def solve_sigmas(
    d2,
    target=15.0,
    optimizer="de",
    de_cfg=DEConfig(),
    sa_cfg=SAConfig(),
    bs_iters=64,
    seed=None,
    threads=1,
    backend=REFERENCE,
    de_space="log",
):
    """Per-row bandwidths for ``target`` perplexity.

    Row ``r`` draws from its own stream seeded with ``seed ^ r``, so the result
    does not depend on ``threads`` or on block scheduling.
    """
    d2 = getattr(d2, "d2", d2)
    n = d2.shape[0]
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer!r}; expected one of {OPTIMIZERS}")
    # Perplexity peaks at N - 1 (uniform over the other rows).
    if not 1.0 < target <= n - 1:
        raise ValueError(f"target perplexity {target} outside (1, N-1] for N={n}")
    if seed is None:
        seed = de_cfg.seed

    def run_block(lo):
        rows = np.arange(lo, min(lo + BLOCK_ROWS, n))
        d = _masked_rows(d2[rows], rows)
        seeds = [row_seed(seed, r) for r in rows]
        if optimizer == "de":
            return _de_rows(d, target, seeds, de_cfg, backend, de_space)
        if optimizer == "sa":
            return _anneal_rows(d, target, seeds, sa_cfg, backend)
        return _bisect_rows(d, target, bs_iters, de_cfg.lb, de_cfg.ub, backend)

    starts = range(0, n, BLOCK_ROWS)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_block, starts))
    else:
        parts = [run_block(lo) for lo in starts]
    sigma = np.concatenate([p[0] for p in parts])
    err = np.concatenate([p[1] for p in parts])
    evals = np.concatenate([p[2] for p in parts])
    return SigmaVector(sigma, err, optimizer, evals)
