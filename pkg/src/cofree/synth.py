"""Seeded synthetic graphs: homophilic SBM with node features, Chung-Lu power law."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cofree.graph import Graph


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class SbmSpec:
    num_nodes: int
    num_classes: int
    p_in: float
    p_out: float
    feature_dim: int | None = None
    feature_noise: float = 1.0
    seed: int = 0

    def validate(self):
        if self.num_classes < 1:
            raise SpecError("num_classes must be >= 1")
        if self.num_nodes < self.num_classes:
            raise SpecError(f"num_nodes ({self.num_nodes}) < num_classes ({self.num_classes})")
        for name in ("p_in", "p_out"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SpecError(f"{name} must lie in [0, 1]")
        if self.feature_noise < 0:
            raise SpecError("feature_noise must be non-negative")
        if self.feature_dim is not None and self.feature_dim < self.num_classes:
            raise SpecError("feature_dim must be >= num_classes (one-hot centroids)")


@dataclass(frozen=True)
class PowerLawSpec:
    num_nodes: int
    exponent: float = 2.5
    min_degree: int = 2
    seed: int = 0

    def validate(self):
        if self.exponent <= 1:
            raise SpecError("exponent must be > 1")
        if self.min_degree < 1:
            raise SpecError("min_degree must be >= 1")
        if self.num_nodes <= self.min_degree:
            raise SpecError("infeasible weight sequence: num_nodes must exceed min_degree")


def split_masks(n, rng, fractions=(0.6, 0.2, 0.2)):
    perm = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    masks = {s: np.zeros(n, dtype=bool) for s in ("train", "val", "test")}
    masks["train"][perm[:n_train]] = True
    masks["val"][perm[n_train:n_train + n_val]] = True
    masks["test"][perm[n_train + n_val:]] = True
    return masks


def gen_homophilic_sbm(spec: SbmSpec) -> Graph:
    """Stochastic block model with one-hot-centroid features and a 60/20/20 split.

    Class sizes are balanced (node ``i`` gets class ``i mod C`` before a seeded
    shuffle). Any node left isolated is wired to one random same-class node, or
    to a random node when its class is a singleton.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, c = spec.num_nodes, spec.num_classes
    labels = rng.permutation(np.arange(n) % c)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], spec.p_in, spec.p_out)
    keep = rng.random(len(iu)) < prob
    edges = [np.stack([iu[keep], ju[keep]], axis=1)]

    deg = np.bincount(edges[0].ravel(), minlength=n)
    extra = []
    for v in np.flatnonzero(deg == 0):
        if deg[v]:
            continue
        same = np.flatnonzero((labels == labels[v]) & (np.arange(n) != v))
        pool = same if len(same) else np.flatnonzero(np.arange(n) != v)
        if not len(pool):
            break
        u = int(rng.choice(pool))
        extra.append((min(u, v), max(u, v)))
        deg[u] += 1
        deg[v] += 1
    if extra:
        edges.append(np.array(extra, dtype=np.int64))
    pairs = np.concatenate(edges)

    d = spec.feature_dim or c
    features = np.zeros((n, d))
    features[np.arange(n), labels] = 1.0
    if spec.feature_noise > 0:
        features += spec.feature_noise * rng.standard_normal((n, d))
    masks = split_masks(n, rng)
    graph, _ = Graph.from_edges(n, pairs, features=features, labels=labels, masks=masks)
    return graph


def gen_power_law(spec: PowerLawSpec) -> Graph:
    """Chung-Lu graph with expected degrees following a power law.

    Expected-degree weights are ``min_degree * (n / (i + 1)) ** (1 / (exponent - 1))``
    capped at ``sqrt(sum(w))``; ``sum(w) / 2`` endpoint pairs are drawn in
    proportion to the weights, then self-loops and duplicates are removed.
    Isolated nodes are attached to a weight-proportional partner.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.num_nodes
    ranks = np.arange(n)
    w = spec.min_degree * (n / (ranks + 1.0)) ** (1.0 / (spec.exponent - 1.0))
    w = np.minimum(w, np.sqrt(w.sum()))
    prob = w / w.sum()
    m = int(round(w.sum() / 2))
    if m < 1:
        raise SpecError("infeasible weight sequence: no edges expected")
    u = rng.choice(n, size=m, p=prob)
    v = rng.choice(n, size=m, p=prob)
    pairs = np.stack([u, v], axis=1)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]

    deg = np.zeros(n, dtype=np.int64)
    canon = np.unique(np.sort(pairs, axis=1), axis=0)
    np.add.at(deg, canon.ravel(), 1)
    extra = []
    for iso in np.flatnonzero(deg == 0):
        while True:
            t = int(rng.choice(n, p=prob))
            if t != iso:
                break
        extra.append((iso, t))
    if extra:
        pairs = np.concatenate([pairs, np.array(extra, dtype=np.int64)])
    graph, _ = Graph.from_edges(n, pairs)
    return graph


def fit_power_law_exponent(degrees, xmin):
    """Discrete power-law MLE (continuous approximation with the 1/2 shift)."""
    d = np.asarray(degrees, dtype=np.float64)
    tail = d[d >= xmin]
    if len(tail) < 2:
        raise ValueError("too few samples in tail")
    return 1.0 + len(tail) / np.sum(np.log(tail / (xmin - 0.5)))
