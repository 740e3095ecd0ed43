"""Synthetic point clouds used by the experiments."""
from __future__ import annotations

import numpy as np

from .core import DiscreteMeasure, InvalidInputError

EXAMPLE1_SOURCE = np.array([[0.0, float(i)] for i in range(1, 6)])
EXAMPLE1_TARGET = np.array([[1.0, float(i)] for i in range(1, 6)])
# the mini-batch pair {(0,1),(0,2),(0,3)} x {(1,3),(1,4),(1,5)}
EXAMPLE1_BATCH = (np.array([0, 1, 2]), np.array([2, 3, 4]))


def example1():
    """Two aligned columns of five points, as uniform measures."""
    return DiscreteMeasure.uniform(EXAMPLE1_SOURCE), DiscreteMeasure.uniform(EXAMPLE1_TARGET)


def bimodal_pair(n: int = 10, seed: int = 0):
    """Two-cluster source near x=0 and sheared two-cluster target near x=10.

    Each point picks one of the two modes (y=0 or y=20) with probability 1/2.
    """
    rng = np.random.default_rng(seed)
    top_s = rng.random(n) < 0.5
    top_t = rng.random(n) < 0.5
    src = rng.standard_normal((n, 2)) + np.where(top_s[:, None], [0.0, 20.0], [0.0, 0.0])
    cov = np.array([[1.0, -0.8], [-0.8, 1.0]])
    tgt = rng.multivariate_normal([0.0, 0.0], cov, size=n) + np.where(top_t[:, None], [10.0, 20.0], [10.0, 0.0])
    return DiscreteMeasure.uniform(src), DiscreteMeasure.uniform(tgt)


def s_curve(n: int = 1000, seed: int = 0, noise: float = 0.05) -> DiscreteMeasure:
    """Planar S: two stacked half circles traced by t in [-3pi/2, 3pi/2]."""
    rng = np.random.default_rng(seed)
    t = 3 * np.pi * (rng.random(n) - 0.5)
    pts = np.column_stack([np.sin(t), np.sign(t) * (np.cos(t) - 1.0)])
    pts += noise * rng.standard_normal((n, 2))
    return DiscreteMeasure.uniform(pts)


def gaussian_blob(n: int, seed: int = 0, center=(0.0, 0.0), scale: float = 1.0) -> DiscreteMeasure:
    rng = np.random.default_rng(seed)
    return DiscreteMeasure.uniform(np.asarray(center, float) + scale * rng.standard_normal((n, len(center))))


def flow_pair(n: int = 1000, seed: int = 0):
    """Initial cloud (a Gaussian blob left of the S) and the S-shaped target."""
    init = gaussian_blob(n, seed=seed + 1, center=(-3.0, 0.0), scale=0.5)
    return init, s_curve(n, seed=seed)


def make_pair(distribution: str, n: int, seed: int = 0):
    """Source/target pair by name: ``gaussian``, ``bimodal``, ``example1`` or ``s_curve``."""
    if distribution == "gaussian":
        return gaussian_blob(n, seed=seed), gaussian_blob(n, seed=seed + 1, center=(2.0, 0.0))
    if distribution == "bimodal":
        return bimodal_pair(n, seed)
    if distribution == "example1":
        return example1()
    if distribution == "s_curve":
        return flow_pair(n, seed)
    raise InvalidInputError(f"unknown distribution {distribution!r}")
