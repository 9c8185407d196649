"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``CF_KERNELS=python`` to force the fallback.
"""

import os

import numpy as np

from cofree import _pykernels

if os.environ.get("CF_KERNELS", "").lower() == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from cofree import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels
        BACKEND = "python"


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _keep(keep):
    if keep is None:
        return None
    return np.ascontiguousarray(keep, dtype=np.uint8)


def neighbor_sum(indptr, indices, edge_ids, keep, x, impl=None):
    """Row ``v`` of the result is the sum of ``x[u]`` over kept neighbors ``u`` of ``v``."""
    impl = impl or _impl
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    return impl.neighbor_sum(_i64(indptr), _i64(indices), _i64(edge_ids), _keep(keep),
                             np.ascontiguousarray(x))


def masked_degree(indptr, edge_ids, keep, impl=None):
    impl = impl or _impl
    return impl.masked_degree(_i64(indptr), _i64(edge_ids), _keep(keep))


def replica_counts(src, dst, assignment, num_nodes, num_parts, impl=None):
    impl = impl or _impl
    return impl.replica_counts(_i64(src), _i64(dst), _i64(assignment), int(num_nodes), int(num_parts))


def mix64(keys, seed, impl=None):
    impl = impl or _impl
    seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return impl.mix64(np.ascontiguousarray(keys, dtype=np.uint64), seed)


def distinct_per_row(draws, num_values, impl=None):
    impl = impl or _impl
    return impl.distinct_per_row(np.ascontiguousarray(draws, dtype=np.int64), int(num_values))
