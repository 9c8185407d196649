"""GraphSAGE (mean aggregator) with hand-written reverse mode, losses and Adam.

Layer ``l`` computes::

    z    = h W^T                         (per node)
    mean = mean over neighbors u of relu(z_u)   (zero when no kept neighbor)
    h'   = [mean, h] U^T

and a linear head maps the last embedding to class logits. There are no bias
terms and no nonlinearity on ``U``'s output.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cofree import kernels

CKPT_MAGIC = b"CFCK"


class ShapeError(ValueError):
    pass


class StaleCacheError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Adjacency:
    """CSR view of an undirected (sub)graph; ``edge_ids`` index edge masks."""

    indptr: np.ndarray
    indices: np.ndarray
    edge_ids: np.ndarray

    @property
    def num_nodes(self):
        return len(self.indptr) - 1

    @classmethod
    def of(cls, obj):
        """From a :class:`~cofree.graph.Graph` or a partition :class:`~cofree.partition.Part`."""
        if hasattr(obj, "csr"):
            return cls(*obj.csr)
        return cls(obj.indptr, obj.indices, obj.edge_ids)

    def same_as(self, other):
        if self is other:
            return True
        return all(np.array_equal(a, b) for a, b in
                   zip((self.indptr, self.indices, self.edge_ids), (other.indptr, other.indices, other.edge_ids)))


def glorot(rng, rows, cols, dtype=np.float64):
    a = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-a, a, size=(rows, cols)).astype(dtype)


class SageModel:
    """Parameters ``[(W0, U0), (W1, U1), ...]`` plus ``head``.

    ``version`` increases on every in-place parameter update so forward caches
    can be checked for staleness.
    """

    def __init__(self, layers, head):
        self.layers = [(np.asarray(w), np.asarray(u)) for w, u in layers]
        self.head = np.asarray(head)
        self.version = 0
        self._check()

    @classmethod
    def init(cls, in_dim, hidden_dims, num_classes, rng, dtype=np.float64):
        layers = []
        d = in_dim
        for hdim in hidden_dims:
            w = glorot(rng, hdim, d, dtype)
            u = glorot(rng, hdim, hdim + d, dtype)
            layers.append((w, u))
            d = hdim
        return cls(layers, glorot(rng, num_classes, d, dtype))

    def _check(self):
        d = None
        for l, (w, u) in enumerate(self.layers):
            if d is not None and w.shape[1] != d:
                raise ShapeError(f"layer {l}: W expects input dim {w.shape[1]}, previous layer gives {d}")
            if u.shape[1] != w.shape[0] + w.shape[1]:
                raise ShapeError(f"layer {l}: U must have {w.shape[0] + w.shape[1]} columns")
            d = u.shape[0]
        if d is not None and self.head.shape[1] != d:
            raise ShapeError("head input dim does not match last layer")
        for a in self.params():
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite parameter")

    @property
    def in_dim(self):
        return self.layers[0][0].shape[1] if self.layers else self.head.shape[1]

    @property
    def num_classes(self):
        return self.head.shape[0]

    @property
    def num_layers(self):
        return len(self.layers)

    def params(self):
        out = []
        for w, u in self.layers:
            out += [w, u]
        out.append(self.head)
        return out

    @property
    def num_params(self):
        return int(sum(a.size for a in self.params()))

    def copy(self):
        m = SageModel([(w.copy(), u.copy()) for w, u in self.layers], self.head.copy())
        m.version = self.version
        return m

    def load_params(self, arrays):
        """Overwrite parameters in place (canonical order) and bump ``version``."""
        for dst, src in zip(self.params(), arrays):
            if dst.shape != src.shape:
                raise ShapeError("parameter shape mismatch")
            dst[...] = src
        self.version += 1


@dataclass
class ParamGrads:
    arrays: list

    @classmethod
    def zeros_like(cls, model):
        return cls([np.zeros_like(a) for a in model.params()])

    @property
    def size(self):
        return int(sum(a.size for a in self.arrays))

    def flat(self):
        return np.concatenate([a.ravel() for a in self.arrays]) if self.arrays else np.zeros(0)

    def shapes(self):
        return [a.shape for a in self.arrays]


@dataclass
class ForwardCache:
    model_id: int
    version: int
    adjacency: Adjacency
    keep: np.ndarray | None
    degree: np.ndarray
    inputs: list = field(default_factory=list)  # h^(l-1) per layer
    pre: list = field(default_factory=list)  # W h pre-activations
    concat: list = field(default_factory=list)  # [mean, h] per layer
    means: list = field(default_factory=list)
    final: np.ndarray | None = None


def sage_forward(model, adj, features, mask=None):
    """Logits for every node of ``adj`` and the cache needed by :func:`sage_backward`.

    ``mask`` is an optional keep-vector over edge ids; the mean divides by the
    number of kept incident edges.
    """
    x = np.asarray(features)
    if x.ndim != 2 or x.shape[0] != adj.num_nodes:
        raise ShapeError(f"features must be ({adj.num_nodes}, d), got {x.shape}")
    if x.shape[1] != model.in_dim:
        raise ShapeError(f"feature dim {x.shape[1]} != model input dim {model.in_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input features")
    dtype = model.head.dtype
    h = x.astype(dtype, copy=False)
    keep = None
    if mask is not None:
        keep = np.asarray(mask)
        if len(adj.edge_ids) and adj.edge_ids.max() >= len(keep):
            raise ShapeError("edge mask shorter than the edge id range")
    deg = kernels.masked_degree(adj.indptr, adj.edge_ids, keep)
    inv = np.zeros(len(deg), dtype=dtype)
    np.divide(1.0, deg, out=inv, where=deg > 0)
    cache = ForwardCache(id(model), model.version, adj, keep, deg)
    for w, u in model.layers:
        z = h @ w.T
        s = kernels.neighbor_sum(adj.indptr, adj.indices, adj.edge_ids, keep, np.maximum(z, 0))
        mean = s * inv[:, None]
        c = np.concatenate([mean, h], axis=1)
        cache.inputs.append(h)
        cache.pre.append(z)
        cache.means.append(mean)
        cache.concat.append(c)
        h = c @ u.T
    cache.final = h
    return h @ model.head.T, cache


def sage_backward(model, cache, adj, loss_grad):
    """Exact gradients of ``sum_j <loss_grad_j, logits_j>`` for every parameter."""
    if cache.model_id != id(model) or cache.version != model.version:
        raise StaleCacheError("forward cache does not belong to the current model state")
    if not cache.adjacency.same_as(adj):
        raise StaleCacheError("forward cache was built on a different adjacency")
    g = np.asarray(loss_grad, dtype=model.head.dtype)
    if g.shape != (adj.num_nodes, model.num_classes):
        raise ShapeError(f"loss_grad must be ({adj.num_nodes}, {model.num_classes})")
    deg = cache.degree
    inv = np.zeros(len(deg), dtype=g.dtype)
    np.divide(1.0, deg, out=inv, where=deg > 0)

    grads = [None] * (2 * model.num_layers + 1)
    grads[-1] = g.T @ cache.final
    dh = g @ model.head
    for l in range(model.num_layers - 1, -1, -1):
        w, u = model.layers[l]
        hid = w.shape[0]
        grads[2 * l + 1] = dh.T @ cache.concat[l]
        dc = dh @ u
        # adjacency is symmetric, so the transpose of neighbor_sum is neighbor_sum
        da = kernels.neighbor_sum(adj.indptr, adj.indices, adj.edge_ids, cache.keep,
                                  np.ascontiguousarray(dc[:, :hid] * inv[:, None]))
        dz = da * (cache.pre[l] > 0)
        grads[2 * l] = dz.T @ cache.inputs[l]
        dh = dc[:, hid:] + dz @ w
    return ParamGrads(grads)


# -- losses --------------------------------------------------------------------

def one_hot(labels, num_classes):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def _sigmoid(z):
    return np.exp(_log_sigmoid(z))


def loss_and_grad(logits, labels, node_weights, kind="softmax_ce", normalizer=1.0):
    """Weighted loss ``sum_j w_j * l(logits_j, y_j) / normalizer`` and its logit gradient.

    ``bce`` sums binary cross-entropy over the C outputs of a node and takes a
    0/1 label matrix (integer class ids are one-hot encoded). ``softmax_ce``
    takes integer class ids.
    """
    z = np.asarray(logits)
    w = np.asarray(node_weights, dtype=z.dtype)
    n, c = z.shape
    if w.shape != (n,):
        raise ShapeError(f"node_weights must have length {n}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("node weights must be finite and non-negative")
    if normalizer <= 0:
        raise ValueError("normalizer must be positive")
    y = np.asarray(labels)
    if kind == "bce":
        if y.ndim == 1:
            if len(y) and (y.min() < 0 or y.max() >= c):
                raise ValueError("label out of range")
            y = one_hot(y, c)
        if y.shape != z.shape or not np.isin(y, (0, 1)).all():
            raise ValueError("bce labels must be a 0/1 matrix shaped like logits")
        per_node = np.sum(-y * _log_sigmoid(z) - (1 - y) * _log_sigmoid(-z), axis=1)
        dz = _sigmoid(z) - y
    elif kind == "softmax_ce":
        if y.ndim != 1 or y.shape[0] != n:
            raise ValueError("softmax_ce labels must be a vector of class ids")
        if n and (y.min() < 0 or y.max() >= c):
            raise ValueError("label out of range")
        lse = np.logaddexp.reduce(z, axis=1)
        per_node = lse - z[np.arange(n), y]
        dz = np.exp(z - lse[:, None])
        dz[np.arange(n), y] -= 1.0
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    loss = float(np.sum(w * per_node) / normalizer)
    return loss, dz * (w / normalizer)[:, None]


# -- optimizer -------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list | None = None
    v: list | None = None


def adam_step(model, grads, state):
    """One bias-corrected Adam update, applied in place. Returns ``(model, state)``."""
    params = model.params()
    if [a.shape for a in params] != grads.shapes():
        raise ShapeError("gradient shapes do not match the model")
    for g in grads.arrays:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient")
    if state.m is None:
        state.m = [np.zeros_like(a) for a in params]
        state.v = [np.zeros_like(a) for a in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads.arrays, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    model.version += 1
    return model, state


# -- checkpoints -------------------------------------------------------------------

def save_checkpoint(model, path):
    """``CFCK`` | uint64 layer count | per matrix: uint64 rows, uint64 cols, float64 data.

    Matrices are written as W0, U0, W1, U1, ..., head; all little-endian.
    """
    buf = [CKPT_MAGIC, struct.pack("<Q", model.num_layers)]
    for a in model.params():
        buf.append(struct.pack("<QQ", *a.shape))
        buf.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(buf))


def load_checkpoint(path):
    raw = Path(path).read_bytes()
    if raw[:4] != CKPT_MAGIC:
        raise ValueError("not a CFCK checkpoint")
    (num_layers,) = struct.unpack_from("<Q", raw, 4)
    off = 12
    mats = []
    for _ in range(2 * num_layers + 1):
        rows, cols = struct.unpack_from("<QQ", raw, off)
        off += 16
        nbytes = rows * cols * 8
        if off + nbytes > len(raw):
            raise ValueError("truncated checkpoint")
        mats.append(np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=off).reshape(rows, cols).copy())
        off += nbytes
    if off != len(raw):
        raise ValueError("trailing bytes in checkpoint")
    layers = [(mats[2 * i], mats[2 * i + 1]) for i in range(num_layers)]
    return SageModel(layers, mats[-1])
