"""Full-graph oracle trainer and simulated communication-free data-parallel trainer.

Workers run in-process, one per partition. Each holds a private model replica
and sees only its own part (features, labels, weights, edges). The only values
leaving a worker are its parameter gradients, which pass through a
:class:`GradientChannel` that counts every float. Gradients are summed in
ascending partition order, then a single Adam step updates the canonical
parameters and the replicas are refreshed.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from cofree.dropedge import precompute_masks, select_mask
from cofree.nn import (
    Adjacency,
    AdamState,
    ParamGrads,
    SageModel,
    ShapeError,
    adam_step,
    loss_and_grad,
    sage_backward,
    sage_forward,
)
from cofree.reweight import compute_weights

logger = logging.getLogger(__name__)

# named sub-streams of the single user seed
STREAMS = {"partition": 0, "init": 1, "dropedge": 2, "selection": 3}


def stream_rng(seed, name, *extra):
    return np.random.default_rng([int(seed), STREAMS[name], *map(int, extra)])


def stream_seed(seed, name, *extra):
    return int(np.random.SeedSequence([int(seed), STREAMS[name], *map(int, extra)]).generate_state(1)[0])


@dataclass
class TrainConfig:
    layers: int = 2
    hidden: int = 64
    epochs: int = 200
    lr: float = 0.01
    loss: str = "softmax_ce"
    reweight: str = "dar"
    use_dropedge: bool = False
    dropedge_k: int = 10
    drop_ratio: float = 0.5
    seed: int = 0
    precision: str = "float64"
    workers: int = 1
    eval_every: int = 1

    def __post_init__(self):
        if self.layers < 0 or self.hidden < 1 or self.epochs < 0:
            raise ValueError("layers >= 0, hidden >= 1 and epochs >= 0 required")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.precision not in ("float64", "float32"):
            raise ValueError("precision must be float64 or float32")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.reweight = self.reweight.replace("-", "_")

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_metric: float | None = None
    val_metric: float | None = None
    test_metric: float | None = None
    grad_norm: float = 0.0
    comm_floats_this_iter: int = 0
    metric: str = "accuracy"

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class CommReport:
    mode: str
    floats_per_iteration: int
    breakdown: dict = field(default_factory=dict)


def _require_payload(graph):
    if graph.features is None or graph.labels is None:
        raise ValueError("graph needs features and labels for training")
    if "train" not in graph.masks or not graph.masks["train"].any():
        raise ValueError("graph needs a non-empty train mask")


def _loss_kind(graph, config):
    return "bce" if graph.multilabel else config.loss


def init_model(graph, config):
    rng = stream_rng(config.seed, "init")
    return SageModel.init(graph.features.shape[1], [config.hidden] * config.layers,
                          graph.num_classes, rng, config.dtype)


# -- evaluation -------------------------------------------------------------------

def metric_from_logits(logits, labels, mask):
    """Accuracy for class-id labels, micro-F1 (logit > 0) for 0/1 label matrices."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty evaluation mask")
    z = logits[mask]
    y = np.asarray(labels)[mask]
    if y.ndim == 2:
        pred = z > 0
        truth = y.astype(bool)
        tp = np.sum(pred & truth)
        fp = np.sum(pred & ~truth)
        fn = np.sum(~pred & truth)
        denom = 2 * tp + fp + fn
        return float(2 * tp / denom) if denom else 1.0
    return float(np.mean(np.argmax(z, axis=1) == y))


def evaluate(model, graph, split="test", logits=None):
    """Full-graph inference in one process, scored on ``split``."""
    if split not in graph.masks:
        raise ValueError(f"graph has no {split!r} mask")
    if logits is None:
        logits, _ = sage_forward(model, Adjacency.of(graph), graph.features)
    return metric_from_logits(logits, graph.labels, graph.masks[split])


def _epoch_metrics(model, graph, epoch, loss, grads, comm, config):
    name = "micro_f1" if graph.multilabel else "accuracy"
    m = EpochMetrics(epoch, float(loss), grad_norm=float(np.linalg.norm(grads.flat())),
                     comm_floats_this_iter=int(comm), metric=name)
    if config.eval_every and (epoch + 1) % config.eval_every == 0:
        logits, _ = sage_forward(model, Adjacency.of(graph), graph.features)
        vals = {s: metric_from_logits(logits, graph.labels, graph.masks[s])
                for s in ("train", "val", "test") if s in graph.masks and graph.masks[s].any()}
        m.train_metric = vals.get("train")
        m.val_metric = vals.get("val")
        m.test_metric = vals.get("test")
    return m


# -- full graph oracle ------------------------------------------------------------------

def train_full_graph(graph, config, callback=None):
    """Full-batch Adam on the whole graph. Returns ``(model, metrics)``."""
    _require_payload(graph)
    model = init_model(graph, config)
    state = AdamState(lr=config.lr)
    adj = Adjacency.of(graph)
    x = graph.features.astype(config.dtype)
    train = graph.masks["train"]
    weights = train.astype(np.float64)
    norm = float(train.sum())
    kind = _loss_kind(graph, config)
    history = []
    for epoch in range(config.epochs):
        logits, cache = sage_forward(model, adj, x)
        loss, dz = loss_and_grad(logits, graph.labels, weights, kind, norm)
        grads = sage_backward(model, cache, adj, dz)
        adam_step(model, grads, state)
        m = _epoch_metrics(model, graph, epoch, loss, grads, 0, config)
        history.append(m)
        if callback:
            callback(m)
    return model, history


# -- communication-free training ---------------------------------------------------------

class CommunicationViolation(RuntimeError):
    pass


class GradientChannel:
    """The only path out of a worker. Counts every float that crosses it."""

    def __init__(self, num_workers):
        self.num_workers = num_workers
        self._slots = [None] * num_workers
        self.floats_sent = 0
        self.embedding_floats_sent = 0
        self.messages = 0

    def send(self, worker, payload):
        if not isinstance(payload, ParamGrads):
            raise CommunicationViolation(f"worker {worker} tried to send {type(payload).__name__}")
        if self._slots[worker] is not None:
            raise CommunicationViolation(f"worker {worker} sent twice in one iteration")
        self._slots[worker] = payload
        self.floats_sent += payload.size
        self.messages += 1

    def collect(self):
        """Barrier: return all payloads in worker order and reset the slots."""
        if any(s is None for s in self._slots):
            raise CommunicationViolation("gather before every worker reported")
        out, self._slots = self._slots, [None] * self.num_workers
        return out


def gather_gradients(per_partition):
    """Elementwise sum in ascending partition order."""
    if not per_partition:
        raise ValueError("nothing to gather")
    shapes = per_partition[0].shapes()
    acc = [a.copy() for a in per_partition[0].arrays]
    for g in per_partition[1:]:
        if g.shapes() != shapes:
            raise ShapeError("gradient shapes differ between partitions")
        for a, b in zip(acc, g.arrays):
            a += b
    return ParamGrads(acc)


class PartitionWorker:
    """Holds one part's private data and model replica."""

    def __init__(self, index, part, graph, weights, config, kind, normalizer):
        self.index = index
        self.adj = Adjacency.of(part)
        self.x = graph.features[part.nodes].astype(config.dtype)
        self.labels = graph.labels[part.nodes]
        self.weights = weights * graph.masks["train"][part.nodes]
        self.kind = kind
        self.normalizer = normalizer
        self.seed = config.seed
        self.masks = None
        if config.use_dropedge:
            self.masks = precompute_masks(part.num_edges, config.dropedge_k, config.drop_ratio,
                                          stream_seed(config.seed, "dropedge", index))
        self.model = None

    def step(self, iteration, channel):
        mask = None
        if self.masks is not None:
            rng = stream_rng(self.seed, "selection", self.index, iteration)
            mask = self.masks.masks[select_mask(self.masks, rng)]
        logits, cache = sage_forward(self.model, self.adj, self.x, mask)
        loss, dz = loss_and_grad(logits, self.labels, self.weights, self.kind, self.normalizer)
        grads = sage_backward(self.model, cache, self.adj, dz)
        channel.send(self.index, grads)
        return loss


def comm_volume(model, num_parts, mode="cofree", halo_nodes=0, hidden_dim=None):
    """Floats exchanged per iteration.

    ``cofree``: every worker ships its parameter gradients, ``p * |theta|``.
    ``halo_sync_model``: additionally, halo embeddings are synchronised once
    forward and once backward per layer, ``2 * L * H * hidden``.
    """
    grads = num_parts * model.num_params
    if mode == "cofree":
        return CommReport(mode, grads, {"parameter_gradients": grads, "node_embeddings": 0})
    if mode == "halo_sync_model":
        if hidden_dim is None:
            hidden_dim = model.layers[0][0].shape[0] if model.layers else 0
        emb = 2 * model.num_layers * int(halo_nodes) * int(hidden_dim)
        return CommReport(mode, grads + emb, {"parameter_gradients": grads, "node_embeddings": emb})
    raise ValueError(f"unknown comm mode {mode!r}")


def train_cofree(graph, part, config, callback=None, weights=None):
    """Simulated data-parallel training over the parts of a vertex cut.

    Returns ``(model, metrics)``. The loss of an iteration is the sum of the
    per-worker reweighted losses, each divided by the global train-node count.
    """
    _require_payload(graph)
    if part.num_nodes != graph.num_nodes or len(part.edge_assignment) != graph.num_edges:
        raise ValueError("partition does not match graph")
    if weights is None:
        weights = compute_weights(config.reweight, graph, part)
    elif weights.scheme != config.reweight or len(weights.values) != part.num_parts:
        raise ValueError("weights do not match the configured scheme or partition")
    model = init_model(graph, config)
    state = AdamState(lr=config.lr)
    kind = _loss_kind(graph, config)
    norm = float(graph.masks["train"].sum())
    workers = [PartitionWorker(i, q, graph, weights.values[i], config, kind, norm)
               for i, q in enumerate(part.parts)]
    for w in workers:
        w.model = model.copy()
    channel = GradientChannel(len(workers))
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    expected = comm_volume(model, part.num_parts).floats_per_iteration
    history = []
    try:
        for epoch in range(config.epochs):
            before = channel.floats_sent
            if pool is None:
                losses = [w.step(epoch, channel) for w in workers]
            else:
                losses = list(pool.map(lambda w: w.step(epoch, channel), workers))
            grads = gather_gradients(channel.collect())
            sent = channel.floats_sent - before
            if sent != expected or channel.embedding_floats_sent:
                raise CommunicationViolation(f"iteration {epoch}: {sent} floats exchanged, expected {expected}")
            adam_step(model, grads, state)
            for w in workers:
                w.model.load_params(model.params())
            loss = 0.0
            for v in losses:
                loss += v
            m = _epoch_metrics(model, graph, epoch, loss, grads, sent, config)
            history.append(m)
            if callback:
                callback(m)
    finally:
        if pool is not None:
            pool.shutdown()
    return model, history
