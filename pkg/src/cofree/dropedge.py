"""DropEdge-K: K precomputed edge-keep masks per part, one picked per iteration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_K = 10
DEFAULT_RATIO = 0.5


@dataclass(frozen=True)
class DropEdgeMaskSet:
    k: int
    ratio: float
    seed: int
    masks: np.ndarray  # (K, num_edges) uint8

    @property
    def keep_count(self):
        return self.masks.shape[1] and int(self.masks[0].sum())


def keep_count(num_edges, ratio):
    return math.ceil((1.0 - ratio) * num_edges)


def precompute_masks(num_edges, k=DEFAULT_K, ratio=DEFAULT_RATIO, seed=0):
    """K masks, each keeping exactly ``ceil((1 - ratio) * num_edges)`` edges.

    Mask ``i`` depends only on ``(seed, i)``.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError("drop ratio must lie in [0, 1)")
    if k < 1:
        raise ValueError("K must be >= 1")
    keep = keep_count(num_edges, ratio)
    masks = np.zeros((k, num_edges), dtype=np.uint8)
    for i in range(k):
        rng = np.random.default_rng([seed, i])
        masks[i, rng.choice(num_edges, size=keep, replace=False)] = 1
    masks.setflags(write=False)
    return DropEdgeMaskSet(k, ratio, seed, masks)


def select_mask(mask_set, rng):
    """Uniform mask index drawn from the caller's generator."""
    if mask_set.k == 1:
        return 0
    return int(rng.integers(mask_set.k))


def masks_to_json(mask_set):
    return {
        "K": mask_set.k,
        "ratio": mask_set.ratio,
        "seed": mask_set.seed,
        "kept_edges": [np.flatnonzero(m).tolist() for m in mask_set.masks],
    }
