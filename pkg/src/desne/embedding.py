"""Low-dimensional t-SNE embedding by momentum gradient descent.

The embedding kernel is a Student-t with one degree of freedom,
``w_ij = 1 / (1 + ||y_i - y_j||^2)``, normalized over all ordered pairs to
give ``q_ij``. The loss is ``KL(P || Q)`` and its gradient with respect to
``y_i`` is ``4 sum_j (p_ij - q_ij) w_ij (y_i - y_j)``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .distance import pairwise_sq_dist

__all__ = [
    "TsneConfig",
    "Embedding",
    "LowDimAffinity",
    "LossTrace",
    "EmbeddingError",
    "low_dim_affinities",
    "kl_divergence",
    "kl_gradient",
    "run_tsne",
]

log = logging.getLogger(__name__)

P_SKIP = 1e-12


class EmbeddingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TsneConfig:
    d: int = 2
    iterations: int = 1000
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    momentum_switch_iter: int = 250
    early_exaggeration_factor: float = 4.0
    early_exaggeration_iters: int = 100
    init_std: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        for m in (self.momentum_early, self.momentum_late):
            if not 0.0 <= m < 1.0:
                raise ValueError("momentum must lie in [0, 1)")
        if self.d < 1:
            raise ValueError("output dimension must be >= 1")

    def digest(self):
        text = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class Embedding:
    y: np.ndarray
    config_hash: str = ""
    seed: int = 0

    @property
    def n(self):
        return self.y.shape[0]


@dataclass(frozen=True, eq=False)
class LowDimAffinity:
    q: np.ndarray
    w: np.ndarray
    z: float


@dataclass(eq=False)
class LossTrace:
    kl_per_iteration: list = field(default_factory=list)
    iterations: int = 0
    exaggeration_end: int = 0

    @property
    def final_kl(self):
        return self.kl_per_iteration[-1]

    @property
    def post_exaggeration_kl(self):
        """KL recorded at the last exaggerated iteration."""
        k = min(self.exaggeration_end, len(self.kl_per_iteration)) - 1
        return self.kl_per_iteration[max(k, 0)]


def _coords(y):
    return np.asarray(getattr(y, "y", y), dtype=np.float64)


def low_dim_affinities(y):
    y = _coords(y)
    w = 1.0 / (1.0 + pairwise_sq_dist(y).d2)
    np.fill_diagonal(w, 0.0)
    z = float(w.sum())
    return LowDimAffinity(w / z, w, z)


def _p(p):
    return np.asarray(getattr(p, "p", p), dtype=np.float64)


def kl_divergence(p, q):
    """``sum_{i != j} p log(p / q)``, skipping entries with ``p <= 1e-12``."""
    p = _p(p)
    q = np.asarray(getattr(q, "q", q), dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: P {p.shape} vs Q {q.shape}")
    mask = p > P_SKIP
    np.fill_diagonal(mask, False)
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_gradient(p, qc, y):
    p = _p(p)
    y = _coords(y)
    # (p - q) * w, with zero diagonal since w_ii = 0.
    m = (p - qc.q) * qc.w
    return 4.0 * (m.sum(axis=1)[:, None] * y - m @ y)


def run_tsne(p, cfg=TsneConfig()):
    """Minimize ``KL(P || Q)`` from a small Gaussian initialization.

    The first ``early_exaggeration_iters`` steps use ``factor * P`` in the
    gradient; the logged KL always uses the true ``P``. Coordinates are
    re-centered after every update.

    Returns ``(Embedding, LossTrace)``.
    """
    p = _p(p)
    n = p.shape[0]
    rng = np.random.default_rng(cfg.seed)
    y = rng.normal(0.0, cfg.init_std, size=(n, cfg.d))
    y -= y.mean(axis=0)
    step = np.zeros_like(y)
    trace = LossTrace(exaggeration_end=min(cfg.early_exaggeration_iters, cfg.iterations))

    def record(it, qc):
        kl = kl_divergence(p, qc)
        if not np.isfinite(kl) or not np.all(np.isfinite(y)):
            raise EmbeddingError(f"non-finite state after iteration {it}: KL={kl}")
        trace.kl_per_iteration.append(kl)
        if it % 100 == 0:
            log.debug("iter %d KL %.6f", it, kl)

    for it in range(cfg.iterations):
        qc = low_dim_affinities(y)
        if it:
            # KL of the previous update's result, sharing this Q.
            record(it - 1, qc)
        exaggerate = it < cfg.early_exaggeration_iters
        momentum = cfg.momentum_early if it < cfg.momentum_switch_iter else cfg.momentum_late
        grad = kl_gradient(p * cfg.early_exaggeration_factor if exaggerate else p, qc, y)
        step = momentum * step - cfg.learning_rate * grad
        y = y + step
        y -= y.mean(axis=0)
    record(cfg.iterations - 1, low_dim_affinities(y))
    trace.iterations = cfg.iterations
    return Embedding(y, cfg.digest(), cfg.seed), trace
