"""Squared Euclidean distance matrices.

The fast path expands ``||a - b||^2 = ||a||^2 + ||b||^2 - 2 a.b`` into two
row-norm terms and a tiled Gram matrix. ``pairwise_sq_dist_naive`` is the
per-pair reference used to check it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DistanceMatrix",
    "InvariantError",
    "row_norms",
    "gram",
    "pairwise_sq_dist",
    "pairwise_sq_dist_naive",
    "DEFAULT_TILE",
]

DEFAULT_TILE = 64
# Round-off below this is clamped silently; anything more negative means the
# expansion cancelled catastrophically.
NEGATIVE_TOLERANCE = -1e-6


class InvariantError(RuntimeError):
    """An internal numerical consistency check failed."""


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    d2: np.ndarray

    @property
    def n(self):
        return self.d2.shape[0]


def _as_matrix(m):
    x = getattr(m, "data", m)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return x


def row_norms(m):
    x = _as_matrix(m)
    return np.einsum("ij,ij->i", x, x)


def gram(m, tile=DEFAULT_TILE):
    """``m @ m.T`` assembled from ``tile x tile`` output blocks.

    Each block is an independent product, so blocks could be farmed out to
    workers without changing the result.
    """
    if tile < 1:
        raise ValueError("tile must be >= 1")
    x = _as_matrix(m)
    n = x.shape[0]
    out = np.empty((n, n))
    for i0 in range(0, n, tile):
        xi = x[i0 : i0 + tile]
        for j0 in range(i0, n, tile):
            block = xi @ x[j0 : j0 + tile].T
            out[i0 : i0 + tile, j0 : j0 + tile] = block
            if j0 != i0:
                out[j0 : j0 + tile, i0 : i0 + tile] = block.T
    # Diagonal blocks are symmetric only up to round-off.
    return np.triu(out) + np.triu(out, 1).T


def _finish(d2):
    most_negative = d2.min() if d2.size else 0.0
    if most_negative < NEGATIVE_TOLERANCE:
        raise InvariantError(
            f"squared distance {most_negative:.3e} is too negative to be round-off"
        )
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return DistanceMatrix(d2)


def pairwise_sq_dist(m, tile=DEFAULT_TILE):
    x = _as_matrix(m)
    norms = row_norms(x)
    d2 = norms[:, None] + norms[None, :] - 2.0 * gram(x, tile)
    return _finish(d2)


def pairwise_sq_dist_naive(m):
    x = _as_matrix(m)
    n = x.shape[0]
    d2 = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            diff = x[i] - x[j]
            d2[i, j] = d2[j, i] = float(np.dot(diff, diff))
    return DistanceMatrix(d2)
