"""End-to-end DE-SNE sampling: distances, bandwidths, embedding, grid draw."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataio import CoresetSelection, target_count
from .de import DEConfig
from .distance import pairwise_sq_dist
from .embedding import TsneConfig, run_tsne
from .grid import GridSpec, allocate_quotas, draw_cells, grid_partition, largest_remainder
from .kernels import get_backend
from .perplexity import REFERENCE, _masked_rows, _perplexity_rows, conditional_matrix, \
    joint_affinities, solve_sigmas

__all__ = ["EmbedResult", "embed_matrix", "select", "select_per_class", "reference_error"]

log = logging.getLogger(__name__)


@dataclass(eq=False)
class EmbedResult:
    sigmas: object  # SigmaVector
    affinity: object  # AffinityMatrix
    embedding: object  # Embedding
    trace: object  # LossTrace


def reference_error(d2, sigma, target):
    """Per-row |perplexity - target| recomputed with the float64 backend."""
    d2 = getattr(d2, "d2", d2)
    rows = np.arange(d2.shape[0])
    return np.abs(_perplexity_rows(_masked_rows(d2, rows), np.asarray(sigma), REFERENCE) - target)


def embed_matrix(x, target=15.0, optimizer="de", de_cfg=DEConfig(), tsne_cfg=TsneConfig(),
                 backend="reference", bs_iters=64, threads=1):
    """Bandwidths, joint affinities and a t-SNE embedding for rows of ``x``."""
    be = get_backend(backend)
    d2 = pairwise_sq_dist(x)
    sig = solve_sigmas(d2, target, optimizer, de_cfg=de_cfg, bs_iters=bs_iters,
                       seed=de_cfg.seed, threads=threads, backend=be)
    log.info("sigmas solved: mean |error| %.3e", sig.mean_error)
    p = joint_affinities(conditional_matrix(d2, sig.sigma, be))
    emb, trace = run_tsne(p, tsne_cfg)
    log.info("embedding done: KL %.4f", trace.final_kl)
    return EmbedResult(sig, p, emb, trace), d2


def select(y, keeping_ratio, seed, cells=32, source_id="", labels=None):
    """Grid selection over one embedding; returns (selection, assignment)."""
    assign = grid_partition(y, GridSpec(cells))
    quotas = allocate_quotas(assign, keeping_ratio)
    idx = draw_cells(assign, quotas, seed, np.asarray(y))
    return _wrap(idx, assign.cell_of, keeping_ratio, seed, source_id, labels), assign


def select_per_class(ys, members, keeping_ratio, seed, n, cells=32, source_id="", labels=None):
    """Grid selection run separately inside each class.

    ``ys[k]`` is the embedding of the rows ``members[k]`` of the full
    dataset. Class totals are split from ``round(KR * N)`` by largest
    remainder over class sizes, so the overall count stays exact. Each
    class draws from its own seed streams keyed by its position.
    """
    total = target_count(keeping_ratio, n)
    shares = largest_remainder([len(m) for m in members], keeping_ratio, total)
    cell_of = np.full(n, -1, dtype=np.int64)
    picked = []
    for k, (y, rows, share) in enumerate(zip(ys, members, shares)):
        assign = grid_partition(y, GridSpec(cells))
        cell_of[rows] = assign.cell_of
        if share == 0:
            continue
        quotas = allocate_quotas(assign, keeping_ratio, total=share)
        picked.append(np.asarray(rows)[draw_cells(assign, quotas, seed, np.asarray(y), (k,))])
    idx = np.sort(np.concatenate(picked)) if picked else np.empty(0, dtype=np.int64)
    return _wrap(idx, cell_of, keeping_ratio, seed, source_id, labels, n)


def _wrap(idx, cell_of, keeping_ratio, seed, source_id, labels, n=None):
    return CoresetSelection(
        indices=idx,
        keeping_ratio=keeping_ratio,
        cell_of={int(i): int(cell_of[i]) for i in idx},
        seed=seed,
        source_id=source_id,
        labels={} if labels is None else {int(i): int(labels[i]) for i in idx},
        n=len(cell_of) if n is None else n,
    )
