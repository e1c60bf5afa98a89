"""Differential evolution for one-dimensional target matching.

Minimizes ``|f(x) - target|`` over ``[lb, ub]`` with a population of scalar
individuals. The genome is a single number, so crossover is one Bernoulli(CR)
choice per individual between the mutant and the parent.

``de_optimize`` is the straightforward per-individual loop. ``de_optimize_batch``
runs the same algorithm for many independent problems at once, vectorized
across problems. Each problem consumes its own random stream exactly as the
scalar loop would, so the two agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["DEConfig", "DEResult", "de_optimize", "de_optimize_batch", "row_seed"]

COLLAPSE_ULPS = 4
RESTART_STREAM = 0x5EED


@dataclass(frozen=True)
class DEConfig:
    f_weight: float = 0.5
    cr: float = 0.7
    pop_size: int = 30
    max_iter: int = 10000
    epsilon: float = 0.0
    lb: float = 1e-20
    ub: float = 1000.0
    seed: int = 0
    # Generations without a strictly better best before giving up; None
    # disables the check.
    stall_generations: int | None = 100
    # A population that collapses while the best error is still above
    # restart_tol * |target| is re-seeded uniformly, keeping the best
    # individual. None disables restarts.
    restart_tol: float | None = 1e-9

    def __post_init__(self):
        if not 0.0 < self.cr <= 1.0:
            raise ValueError("cr must lie in (0, 1]")
        if not 0.0 < self.f_weight < 2.0:
            raise ValueError("f_weight must lie in (0, 2)")
        if not self.lb < self.ub:
            raise ValueError("lb must be below ub")
        if self.pop_size < 4:
            raise ValueError("pop_size must be >= 4 (three distinct donors)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class DEResult:
    best: float
    best_error: float
    evals: int
    generations: int


def row_seed(seed, row):
    """Per-row stream seed, independent of scheduling order."""
    return (int(seed) ^ int(row)) & 0xFFFFFFFFFFFFFFFF


def _restart_rng(seed):
    """Separate stream for restarts so the per-generation draws stay aligned."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, RESTART_STREAM])


def _collapsed(pop):
    """True once every individual sits within a few ulps of the others.

    From there on mutants only re-sample the few floats already present, so
    the remaining generations are spent without measurable progress.
    Works row-wise on a 2-D population.
    """
    pop = np.atleast_2d(pop)
    spread = pop.max(axis=1) - pop.min(axis=1)
    return spread <= COLLAPSE_ULPS * np.spacing(np.abs(pop).max(axis=1))


def _donors(u):
    """Donor indices and crossover draws from uniform blocks ``(..., P, P)``.

    Columns ``0..P-2`` of row ``i`` rank the other individuals; the first
    three in that order are the donors ``a, b, c`` for individual ``i`` (all
    distinct and different from ``i``). The last column is the crossover draw.
    """
    P = u.shape[-1]
    abc = np.argsort(u[..., : P - 1], axis=-1, kind="stable")[..., :3]
    abc += abc >= np.arange(P)[:, None]
    return abc, u[..., P - 1]


def de_optimize(objective, target, cfg=DEConfig()):
    """Run differential evolution on a scalar ``objective``.

    Parameters
    ----------
    objective : callable
        ``float -> float``; must be defined on ``[cfg.lb, cfg.ub]``.
    target : float
        Value the objective should reach.
    cfg : DEConfig

    Returns
    -------
    DEResult
        Best individual, its absolute error, objective evaluations spent and
        generations run. Stops early once the best error is within
        ``cfg.epsilon``, once the population has collapsed to float
        resolution with the best error at most ``cfg.restart_tol * |target|``,
        or after ``cfg.stall_generations`` generations without improvement;
        all are checked between generations. A collapse with a larger error
        triggers a restart instead of a stop.
    """
    rng = np.random.default_rng(cfg.seed)
    pop = rng.uniform(cfg.lb, cfg.ub, cfg.pop_size)
    fit = np.array([abs(objective(float(v)) - target) for v in pop])
    evals = cfg.pop_size
    b = int(np.argmin(fit))
    best, best_err = float(pop[b]), float(fit[b])

    restart_at = None if cfg.restart_tol is None else cfg.restart_tol * abs(target)
    restarts = None
    gen = last_gain = 0
    while gen < cfg.max_iter and not best_err <= cfg.epsilon:
        if _collapsed(pop)[0]:
            if restart_at is None or best_err <= restart_at:
                break
            # Premature convergence: scatter the population again, keep the best.
            restarts = restarts or _restart_rng(cfg.seed)
            pop = restarts.uniform(cfg.lb, cfg.ub, cfg.pop_size)
            pop[0] = best
            fit = np.array([abs(objective(float(v)) - target) for v in pop])
            evals += cfg.pop_size
        if cfg.stall_generations is not None and gen - last_gain >= cfg.stall_generations:
            break
        gen += 1
        abc, crand = _donors(rng.random((cfg.pop_size, cfg.pop_size)))
        for i in range(cfg.pop_size):
            a, bb, c = pop[abc[i]]
            mut = min(max(a + cfg.f_weight * (bb - c), cfg.lb), cfg.ub)
            trial = mut if crand[i] < cfg.cr else pop[i]
            err = abs(objective(float(trial)) - target)
            evals += 1
            if err < fit[i]:
                pop[i] = trial
                fit[i] = err
                if err < best_err:
                    best, best_err = float(trial), float(err)
                    last_gain = gen
    return DEResult(best, best_err, evals, gen)


def de_optimize_batch(objective, targets, cfg=DEConfig(), seeds=None, chunk=16):
    """Independent DE runs for ``R`` problems, vectorized across problems.

    ``objective(x, rows)`` receives trial values ``x`` for the problem
    indices ``rows`` (both length ``k``) and returns ``k`` objective values.
    ``seeds[r]`` seeds problem ``r``; by default ``row_seed(cfg.seed, r)``.
    Random draws are taken ``chunk`` generations at a time per problem, which
    consumes each stream in the same order as the scalar loop.
    Returns arrays ``(best, best_error, evals, generations)``.
    """
    targets = np.asarray(targets, dtype=np.float64)
    R, P = targets.size, cfg.pop_size
    if seeds is None:
        seeds = [row_seed(cfg.seed, r) for r in range(R)]
    rngs = [np.random.default_rng(s) for s in seeds]

    pop = np.empty((R, P))
    for r, rng in enumerate(rngs):
        pop[r] = rng.uniform(cfg.lb, cfg.ub, P)
    allrows = np.arange(R)
    fit = np.empty((R, P))
    for j in range(P):
        fit[:, j] = np.abs(objective(pop[:, j], allrows) - targets)
    b = np.argmin(fit, axis=1)
    best = pop[allrows, b]
    best_err = fit[allrows, b]
    evals = np.full(R, P, dtype=np.int64)
    gens = np.zeros(R, dtype=np.int64)
    last_gain = np.zeros(R, dtype=np.int64)
    stall = cfg.stall_generations

    restart_at = None if cfg.restart_tol is None else cfg.restart_tol * np.abs(targets)
    restart_rngs = {}

    def restart(rows):
        for r in rows:
            if r not in restart_rngs:
                restart_rngs[r] = _restart_rng(seeds[r])
            pop[r] = restart_rngs[r].uniform(cfg.lb, cfg.ub, P)
            pop[r, 0] = best[r]
        for j in range(P):
            fit[rows, j] = np.abs(objective(pop[rows, j], rows) - targets[rows])
        evals[rows] += P

    def still_running(rows):
        collapsed = _collapsed(pop[rows])
        if restart_at is not None:
            again = collapsed & (best_err[rows] > restart_at[rows]) & (best_err[rows] > cfg.epsilon)
            again &= gens[rows] < cfg.max_iter
            if again.any():
                restart(rows[again])
                collapsed &= ~again
        done = (best_err[rows] <= cfg.epsilon) | collapsed
        if stall is not None:
            done |= gens[rows] - last_gain[rows] >= stall
        return rows[~done]

    active = still_running(allrows)
    buf = np.empty((R, chunk, P, P))
    while active.size and gens[active[0]] < cfg.max_iter:
        step = int(gens[active[0]] % chunk)
        if step == 0:
            for r in active:
                buf[r] = rngs[r].random((chunk, P, P))
        abc, crand = _donors(buf[active, step])
        sub = pop[active]
        sfit = fit[active]
        tgt = targets[active]
        k = np.arange(active.size)
        for i in range(P):
            a = sub[k, abc[:, i, 0]]
            bb = sub[k, abc[:, i, 1]]
            c = sub[k, abc[:, i, 2]]
            mut = np.minimum(np.maximum(a + cfg.f_weight * (bb - c), cfg.lb), cfg.ub)
            trial = np.where(crand[:, i] < cfg.cr, mut, sub[:, i])
            err = np.abs(objective(trial, active) - tgt)
            better = err < sfit[:, i]
            sub[better, i] = trial[better]
            sfit[better, i] = err[better]
        pop[active] = sub
        fit[active] = sfit
        evals[active] += P
        gens[active] += 1
        # The generation's best, first index on ties, is the one the sequential
        # strictly-better update keeps.
        j = np.argmin(sfit, axis=1)
        gain = sfit[k, j] < best_err[active]
        won = active[gain]
        best_err[won] = sfit[k, j][gain]
        best[won] = sub[k, j][gain]
        last_gain[won] = gens[won]
        active = still_running(active)
    return best, best_err, evals, gens
