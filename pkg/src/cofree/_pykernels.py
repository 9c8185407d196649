"""Pure numpy implementations of the graph kernels.

Used when the compiled extension is unavailable or ``CF_KERNELS=python``.
Every function here must agree with its counterpart in ``_ckernels.pyx``.
"""

import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def neighbor_sum(indptr, indices, edge_ids, keep, x):
    n = len(indptr) - 1
    out = np.zeros((n, x.shape[1]), dtype=x.dtype)
    if len(indices) == 0:
        return out
    rows = np.repeat(np.arange(n), np.diff(indptr))
    cols = indices
    if keep is not None:
        sel = keep[edge_ids].astype(bool)
        rows = rows[sel]
        cols = cols[sel]
    np.add.at(out, rows, x[cols])
    return out


def masked_degree(indptr, edge_ids, keep):
    deg = np.diff(indptr).astype(np.int64)
    if keep is None:
        return deg
    n = len(indptr) - 1
    rows = np.repeat(np.arange(n), deg)
    return np.bincount(rows, weights=keep[edge_ids].astype(np.int64), minlength=n).astype(np.int64)


def replica_counts(src, dst, assignment, num_nodes, num_parts):
    keys = np.concatenate([src * num_parts + assignment, dst * num_parts + assignment])
    keys = np.unique(keys)
    return np.bincount(keys // num_parts, minlength=num_nodes).astype(np.int64)


def mix64(keys, seed):
    with np.errstate(over="ignore"):
        z = (np.asarray(keys, dtype=np.uint64) ^ np.uint64(seed)) + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return (z ^ (z >> np.uint64(31))) & _MASK64


def distinct_per_row(draws, num_values):
    if draws.shape[1] == 0:
        return np.zeros(draws.shape[0], dtype=np.int64)
    s = np.sort(draws, axis=1)
    return (1 + np.count_nonzero(np.diff(s, axis=1), axis=1)).astype(np.int64)
