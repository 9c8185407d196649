"""Per-replica loss weights for vertex-cut partitions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cofree.partition import PartitionError

SCHEMES = ("dar", "vanilla_inv", "none")


@dataclass
class NodeWeights:
    scheme: str
    values: list  # values[i][k] = weight of local node k in part i

    def totals(self, part):
        """Sum of weights per global node across all parts."""
        tot = np.zeros(part.num_nodes)
        for q, w in zip(part.parts, self.values):
            np.add.at(tot, q.nodes, w)
        return tot


def dar_weights(graph, part):
    """Degree-aware weights: local degree over global degree.

    Nodes without any edge (placed by the round-robin rule) get weight 1.
    """
    if graph.num_nodes != part.num_nodes:
        raise PartitionError("partition does not match graph")
    values = []
    for q in part.parts:
        gdeg = graph.degrees[q.nodes].astype(np.float64)
        if np.any((gdeg == 0) & (q.local_degrees > 0)):
            raise RuntimeError("node with local edges has global degree 0")
        w = np.ones(q.num_nodes)
        nz = gdeg > 0
        w[nz] = q.local_degrees[nz] / gdeg[nz]
        values.append(w)
    return NodeWeights("dar", values)


def vanilla_inv_weights(part):
    """Every replica of node ``j`` weighted ``1 / RF(v_j)``."""
    rf = np.zeros(part.num_nodes, dtype=np.int64)
    for q in part.parts:
        rf[q.nodes] += 1
    return NodeWeights("vanilla_inv", [1.0 / rf[q.nodes] for q in part.parts])


def unit_weights(part):
    return NodeWeights("none", [np.ones(q.num_nodes) for q in part.parts])


def compute_weights(scheme, graph, part):
    scheme = scheme.replace("-", "_")
    if scheme == "dar":
        return dar_weights(graph, part)
    if scheme == "vanilla_inv":
        return vanilla_inv_weights(part)
    if scheme == "none":
        return unit_weights(part)
    raise ValueError(f"unknown reweighting scheme {scheme!r}; expected one of {SCHEMES}")
