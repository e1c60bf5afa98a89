"""Uniform-grid coreset sampling over a 2-D embedding.

The bounding box of the embedding is split into ``G x G`` cells. Each cell
receives a quota proportional to its occupancy (largest-remainder rounding
so the quotas add up to exactly ``round(KR * N)``), and members are drawn
per cell with a seeded partial Fisher-Yates shuffle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dataio import CoresetSelection, target_count

__all__ = [
    "GridSpec",
    "CellAssignment",
    "SamplingError",
    "grid_partition",
    "allocate_quotas",
    "largest_remainder",
    "sample_cells",
    "draw_cells",
    "grid_sample",
]

DEFAULT_CELLS = 32


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    cells_per_axis: int = DEFAULT_CELLS
    bounds: tuple | None = None

    def __post_init__(self):
        if self.cells_per_axis < 1:
            raise ValueError("cells_per_axis must be >= 1")

    @classmethod
    def covering(cls, y, cells_per_axis=DEFAULT_CELLS):
        y = np.asarray(getattr(y, "y", y))
        bounds = []
        for lo, hi in zip(y.min(axis=0), y.max(axis=0)):
            lo, hi = float(lo), float(hi)
            if hi <= lo:
                lo, hi = lo - 0.5, hi + 0.5
            bounds.append((lo, hi))
        return cls(cells_per_axis, tuple(bounds))


@dataclass(frozen=True, eq=False)
class CellAssignment:
    cell_of: np.ndarray
    cells_per_axis: int

    @property
    def n(self):
        return self.cell_of.size

    @property
    def occupancy(self):
        """Cell id -> ascending member indices, for non-empty cells only."""
        order = np.argsort(self.cell_of, kind="stable")
        ids, starts = np.unique(self.cell_of[order], return_index=True)
        groups = np.split(order, starts[1:])
        return {int(c): g for c, g in zip(ids, groups)}


def grid_partition(y, spec=None):
    y = np.asarray(getattr(y, "y", y), dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValueError(f"grid partition needs an N x 2 embedding, got {y.shape}")
    if spec is None or spec.bounds is None:
        spec = GridSpec.covering(y, DEFAULT_CELLS if spec is None else spec.cells_per_axis)
    g = spec.cells_per_axis
    idx = []
    for axis, (lo, hi) in enumerate(spec.bounds):
        k = np.floor((y[:, axis] - lo) / (hi - lo) * g)
        idx.append(np.clip(k, 0, g - 1).astype(np.int64))
    return CellAssignment(idx[0] + idx[1] * g, g)


def largest_remainder(weights, ratio, total):
    """Integer shares ``floor(ratio * w)`` topped up to ``total``.

    Leftover units go to the largest fractional remainders, lower position
    first on ties. ``ratio`` is taken as its exact decimal value.
    """
    kr = Fraction(repr(float(ratio)))
    exact = [kr * int(w) for w in weights]
    shares = [int(e // 1) for e in exact]
    left = total - sum(shares)
    if left < 0 or left > len(shares):
        raise SamplingError(f"cannot distribute {total} units over {len(shares)} groups")
    order = sorted(range(len(shares)), key=lambda k: (-(exact[k] - shares[k]), k))
    for k in order[:left]:
        shares[k] += 1
    return shares


def allocate_quotas(assign, keeping_ratio, total=None):
    """Per-cell sample counts summing to ``total`` (default ``round(KR * N)``)."""
    if not 0.0 < keeping_ratio <= 1.0:
        raise ValueError("keeping_ratio must lie in (0, 1]")
    if total is None:
        total = target_count(keeping_ratio, assign.n)
    if total < 1:
        raise SamplingError(f"keeping ratio {keeping_ratio} of N={assign.n} selects nothing")
    occ = assign.occupancy
    cells = sorted(occ)
    shares = largest_remainder([len(occ[c]) for c in cells], keeping_ratio, total)
    return {c: q for c, q in zip(cells, shares)}


def _cell_rng(seed, cell, stream=()):
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in stream), int(cell)]
    return np.random.default_rng(key)


def _canonical(members, y):
    """Order members by coordinates so the draw ignores input order."""
    if y is None:
        return members
    pts = y[members]
    return members[np.lexsort((members, pts[:, 1], pts[:, 0]))]


def draw_cells(assign, quotas, seed, y=None, stream=()):
    """Draw ``quotas[c]`` members from every cell; returns sorted indices.

    With coordinates ``y`` given, each cell's members are put in coordinate
    order before shuffling, so the chosen points do not depend on how the
    input rows were ordered. ``stream`` adds extra integers to every cell's
    seed key (per-class sampling uses the class label).
    """
    occ = assign.occupancy
    chosen = []
    for c in sorted(quotas):
        q = quotas[c]
        members = _canonical(occ.get(c, np.empty(0, dtype=np.int64)), y)
        if q > members.size:
            raise SamplingError(f"cell {c}: quota {q} exceeds occupancy {members.size}")
        if q == 0:
            continue
        rng = _cell_rng(seed, c, stream)
        pool = members.copy()
        # Partial Fisher-Yates: the first q slots end up a uniform q-subset.
        for k in range(q):
            j = int(rng.integers(k, pool.size))
            pool[k], pool[j] = pool[j], pool[k]
        chosen.append(pool[:q])
    return np.sort(np.concatenate(chosen)) if chosen else np.empty(0, dtype=np.int64)


def sample_cells(assign, quotas, seed, y=None, keeping_ratio=None, source_id="", labels=None):
    """Draw per-cell quotas and wrap the result as a ``CoresetSelection``."""
    idx = draw_cells(assign, quotas, seed, y)
    if keeping_ratio is None:
        keeping_ratio = idx.size / assign.n
    cell_of = {int(i): int(assign.cell_of[i]) for i in idx}
    lab = {} if labels is None else {int(i): int(labels[i]) for i in idx}
    return CoresetSelection(
        indices=idx,
        keeping_ratio=keeping_ratio,
        cell_of=cell_of,
        seed=seed,
        source_id=source_id,
        labels=lab,
        n=assign.n,
    )


def grid_sample(y, keeping_ratio, seed, spec=None, source_id="", labels=None):
    """Partition, allocate and draw in one call."""
    y = np.asarray(getattr(y, "y", y), dtype=np.float64)
    assign = grid_partition(y, spec)
    quotas = allocate_quotas(assign, keeping_ratio)
    return sample_cells(assign, quotas, seed, y, keeping_ratio, source_id, labels)
