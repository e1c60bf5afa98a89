"""Seeded Gaussian-mixture datasets for demos and tests."""

from __future__ import annotations

import numpy as np

from .dataio import DatasetMatrix

__all__ = ["gaussian_blobs"]


def gaussian_blobs(n, d, k=3, separation=8.0, std=1.0, seed=0):
    """``n`` points in ``d`` dimensions from ``k`` isotropic Gaussians.

    Centers are random directions scaled to ``separation``; class sizes
    differ by at most one. Labels are the component ids.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(k, d))
    centers *= separation / np.linalg.norm(centers, axis=1, keepdims=True)
    labels = np.arange(n) % k
    x = centers[labels] + rng.normal(0.0, std, size=(n, d))
    return DatasetMatrix(x, labels, (d,), f"blobs-n{n}-d{d}-k{k}-s{seed}")
