"""Independent checks: gradient equivalence of reweighted partition training,
Monte Carlo replication factors, and the edge-cut conversion audit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cofree import kernels
from cofree.nn import Adjacency, loss_and_grad, one_hot, sage_backward, sage_forward
from cofree.partition import (
    edge_cut_to_vertex_cut,
    expected_rf_random,
    partition_edge_cut_greedy,
    replication_stats,
)
from cofree.reweight import compute_weights
from cofree.synth import SbmSpec, gen_homophilic_sbm
from cofree.trainer import gather_gradients


@dataclass
class GradEquivReport:
    scheme: str
    aggregate_error: float
    per_param_error: list
    homophily: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "aggregate_error": self.aggregate_error,
            "per_param_error": self.per_param_error,
            "homophily": self.homophily,
            **self.extra,
        }


def _rel(a, b):
    na = np.linalg.norm(a)
    return float(np.linalg.norm(a - b) / na) if na > 0 else float(np.linalg.norm(b))


def _bce_targets(graph, model):
    y = graph.labels
    return y if y.ndim == 2 else one_hot(y, model.num_classes)


def full_graph_gradient(graph, model, loss="bce"):
    """Gradient of the loss summed over every node, divided by ``n``."""
    adj = Adjacency.of(graph)
    logits, cache = sage_forward(model, adj, graph.features)
    y = _bce_targets(graph, model) if loss == "bce" else graph.labels
    value, dz = loss_and_grad(logits, y, np.ones(graph.num_nodes), loss, graph.num_nodes)
    return value, sage_backward(model, cache, adj, dz)


def partition_gradient(graph, part, model, weights, loss="bce"):
    """Gathered gradient of the reweighted per-part losses (same normaliser ``n``)."""
    y_all = _bce_targets(graph, model) if loss == "bce" else graph.labels
    total = 0.0
    grads = []
    for q, w in zip(part.parts, weights.values):
        adj = Adjacency.of(q)
        logits, cache = sage_forward(model, adj, graph.features[q.nodes])
        value, dz = loss_and_grad(logits, y_all[q.nodes], w, loss, graph.num_nodes)
        total += value
        grads.append(sage_backward(model, cache, adj, dz))
    return total, gather_gradients(grads)


def grad_equivalence(graph, part, model, scheme, loss="bce"):
    """Relative Frobenius distance between the full-graph gradient and the
    gathered reweighted partition gradient at one parameter state."""
    weights = compute_weights(scheme, graph, part)
    full_loss, g_full = full_graph_gradient(graph, model, loss)
    part_loss, g_part = partition_gradient(graph, part, model, weights, loss)
    per = [_rel(a, b) for a, b in zip(g_full.arrays, g_part.arrays)]
    agg = _rel(g_full.flat(), g_part.flat())
    hom = graph.homophily() if graph.labels is not None and graph.labels.ndim == 1 else None
    return GradEquivReport(weights.scheme, agg, per, hom,
                           {"full_loss": full_loss, "partition_loss": part_loss,
                            "loss_gap": abs(full_loss - part_loss)})


def sbm_with_ratio(num_nodes, num_classes, ratio, mean_degree, seed, **kw):
    """SBM whose p_in/p_out equals ``ratio`` at a fixed expected degree."""
    per_class = num_nodes / num_classes
    intra = per_class - 1
    inter = num_nodes - per_class
    p_in = mean_degree / (intra + inter / ratio)
    return gen_homophilic_sbm(SbmSpec(num_nodes, num_classes, min(p_in, 1.0), min(p_in / ratio, 1.0),
                                      seed=seed, **kw))


# -- replication Monte Carlo -------------------------------------------------------

def rf_variance_random(p, d):
    """Variance of the replica count of a degree-``d`` node under uniform placement."""
    q1 = (1.0 - 1.0 / p) ** d
    q2 = (1.0 - 2.0 / p) ** d
    return max(0.0, p * (p - 1) * q2 + p * q1 - (p * q1) ** 2)


def mc_replication_check(p, degrees, trials=100_000, seed=0, chunk=20_000):
    """Simulate uniform edge placement for a node of each degree and z-score the
    empirical mean replica count against the closed form."""
    if trials < 2:
        raise ValueError("need at least 2 trials")
    rows = []
    for d in degrees:
        rng = np.random.default_rng([seed, p, d])
        counts = []
        done = 0
        while done < trials:
            t = min(chunk, trials - done)
            draws = rng.integers(0, p, size=(t, d))
            counts.append(kernels.distinct_per_row(draws, p))
            done += t
        rf = np.concatenate(counts).astype(np.float64)
        expected = expected_rf_random(p, d)
        mean = float(rf.mean())
        se = float(rf.std(ddof=1) / np.sqrt(trials))
        if se == 0.0:
            # near-certain outcomes give a degenerate sample; use the model variance
            se = float(np.sqrt(rf_variance_random(p, d) / trials))
        if se == 0.0:
            z = 0.0 if np.isclose(mean, expected, rtol=1e-12, atol=0.0) else float("inf")
        else:
            z = (mean - expected) / se
        rows.append({"p": p, "degree": d, "trials": trials, "mean_rf": mean, "expected_rf": expected,
                     "std_error": se, "z": z, "rel_error": abs(mean - expected) / expected if expected else 0.0})
    return rows


def degree_rf_profile(graph, p, seeds, partitioner):
    """Trial-averaged replica count per distinct degree."""
    deg = graph.degrees
    acc = np.zeros(graph.num_nodes)
    for s in seeds:
        acc += replication_stats(partitioner(graph, p, s), graph).per_node_rf
    acc /= len(seeds)
    out = {}
    for d in np.unique(deg[deg > 0]):
        out[int(d)] = float(acc[deg == d].mean())
    return out


# -- edge cut conversion audit -----------------------------------------------------------

def conversion_audit(graph, p, seeds):
    """For each seed: greedy edge cut, convert, and compare duplicates with halo count."""
    if p < 2:
        raise ValueError("audit needs p >= 2")
    rows = []
    for s in seeds:
        ec = partition_edge_cut_greedy(graph, p, s)
        vc = edge_cut_to_vertex_cut(ec, s)
        dup = replication_stats(vc, graph).duplicated_nodes
        h = ec.num_halo
        ok = dup < h if h > 0 else dup == 0
        rows.append({"seed": s, "halo_nodes": h, "duplicated_nodes": dup, "pass": bool(ok)})
    return rows


def audit_conversion(graph, ec, seed):
    vc = edge_cut_to_vertex_cut(ec, seed)
    dup = replication_stats(vc, graph).duplicated_nodes
    h = ec.num_halo
    return {"seed": seed, "halo_nodes": h, "duplicated_nodes": dup,
            "pass": bool(dup < h if h > 0 else dup == 0)}
