"""Vertex-cut and edge-cut partitioners, the edge-cut to vertex-cut conversion,
and replication statistics.

A vertex cut assigns every edge to exactly one part; a node appears in every
part holding one of its edges. Nodes with no edges at all are placed
round-robin (k-th isolated node goes to part ``k % p``) so each node belongs
to at least one part.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from cofree import kernels
from cofree.graph import build_csr


class PartitionError(ValueError):
    pass


def _check_p(p):
    if int(p) != p or p < 1:
        raise PartitionError(f"number of parts must be a positive integer, got {p}")
    return int(p)


@dataclass
class Part:
    """One vertex-cut part: ``nodes`` are sorted global ids, local id = position."""

    index: int
    nodes: np.ndarray
    edge_ids: np.ndarray
    edges: np.ndarray
    local_degrees: np.ndarray
    _csr: tuple | None = field(default=None, repr=False)

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_edges(self):
        return len(self.edge_ids)

    def to_local(self, global_ids):
        global_ids = np.asarray(global_ids, dtype=np.int64)
        loc = np.searchsorted(self.nodes, global_ids)
        ok = (loc < len(self.nodes)) & (self.nodes[np.minimum(loc, len(self.nodes) - 1)] == global_ids)
        if not np.all(ok):
            raise KeyError(f"nodes not in part {self.index}: {global_ids[~ok][:5].tolist()}")
        return loc

    def to_global(self, local_ids):
        return self.nodes[np.asarray(local_ids, dtype=np.int64)]

    @property
    def csr(self):
        if self._csr is None:
            self._csr = build_csr(self.num_nodes, self.edges)
        return self._csr


@dataclass
class VertexCutPartition:
    num_parts: int
    num_nodes: int
    edge_assignment: np.ndarray
    parts: list
    algorithm: str = "custom"
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_assignment(cls, num_nodes, edges, assignment, num_parts, algorithm="custom", meta=None):
        p = _check_p(num_parts)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        assignment = np.asarray(assignment, dtype=np.int64)
        if assignment.shape != (len(edges),):
            raise PartitionError("assignment length must equal the number of edges")
        if len(assignment) and (assignment.min() < 0 or assignment.max() >= p):
            raise PartitionError("part id out of range")
        deg = np.bincount(edges.ravel(), minlength=num_nodes)
        isolated = np.flatnonzero(deg == 0)
        order = np.argsort(assignment, kind="stable")
        bounds = np.searchsorted(assignment[order], np.arange(p + 1))
        parts = []
        for i in range(p):
            eids = order[bounds[i]:bounds[i + 1]]
            sub = edges[eids]
            extra = isolated[i::p]
            nodes = np.union1d(sub.ravel(), extra).astype(np.int64)
            local = np.searchsorted(nodes, sub).reshape(-1, 2) if len(sub) else np.zeros((0, 2), np.int64)
            ldeg = np.bincount(local.ravel(), minlength=len(nodes)).astype(np.int64)
            parts.append(Part(i, nodes, eids.astype(np.int64), local.astype(np.int64), ldeg))
        assignment.setflags(write=False)
        return cls(p, int(num_nodes), assignment, parts, algorithm, dict(meta or {}))

    def validate(self, graph):
        """Raise :class:`PartitionError` unless every vertex-cut invariant holds."""
        if graph.num_nodes != self.num_nodes or graph.num_edges != len(self.edge_assignment):
            raise PartitionError("partition does not match graph")
        seen = np.zeros(graph.num_edges, dtype=np.int64)
        deg_sum = np.zeros(graph.num_nodes, dtype=np.int64)
        for part in self.parts:
            seen[part.edge_ids] += 1
            if np.any(self.edge_assignment[part.edge_ids] != part.index):
                raise PartitionError(f"part {part.index}: edge list disagrees with assignment")
            if not np.array_equal(part.to_global(part.edges), graph.edges[part.edge_ids]):
                raise PartitionError(f"part {part.index}: local edges do not map to global edges")
            endpoints = np.unique(graph.edges[part.edge_ids].ravel())
            extra = np.setdiff1d(part.nodes, endpoints)
            if np.any(graph.degrees[extra] != 0):
                raise PartitionError(f"part {part.index}: node set is not closed over its edges")
            np.add.at(deg_sum, part.nodes, part.local_degrees)
        if np.any(seen != 1):
            raise PartitionError("edge sets are not a disjoint cover of E")
        if not np.array_equal(deg_sum, graph.degrees):
            raise PartitionError("local degrees do not sum to global degrees")

    def to_json(self, weights=None):
        data = {
            "num_parts": self.num_parts,
            "num_nodes": self.num_nodes,
            "algorithm": self.algorithm,
            "edge_assignment": self.edge_assignment.tolist(),
            "parts": [p.nodes.tolist() for p in self.parts],
        }
        if self.meta:
            data["meta"] = self.meta
        if weights is not None:
            data["weights"] = {"scheme": weights.scheme, "values": [w.tolist() for w in weights.values]}
        return data

    @classmethod
    def from_json(cls, data, graph):
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        part = cls.from_assignment(graph.num_nodes, graph.edges, data["edge_assignment"], data["num_parts"],
                                   data.get("algorithm", "custom"), data.get("meta"))
        for p, nodes in zip(part.parts, data["parts"]):
            if not np.array_equal(p.nodes, np.asarray(nodes, dtype=np.int64)):
                raise PartitionError(f"part {p.index}: stored node set disagrees with edge assignment")
        return part


@dataclass
class ReplicationStats:
    rf: float
    per_node_rf: np.ndarray
    edge_balance: float
    node_balance: float
    duplicated_nodes: int

    def summary(self):
        return {
            "rf": self.rf,
            "edge_balance": self.edge_balance,
            "node_balance": self.node_balance,
            "duplicated_nodes": self.duplicated_nodes,
            "max_node_rf": int(self.per_node_rf.max()) if len(self.per_node_rf) else 0,
        }


def replication_stats(part, graph):
    if graph.num_nodes != part.num_nodes or graph.num_edges != len(part.edge_assignment):
        raise PartitionError("partition does not match graph")
    n, m, p = graph.num_nodes, graph.num_edges, part.num_parts
    per_node = kernels.replica_counts(graph.edges[:, 0], graph.edges[:, 1], part.edge_assignment, n, p)
    per_node[graph.degrees == 0] = 1
    total = int(sum(q.num_nodes for q in part.parts))
    sizes_e = [q.num_edges for q in part.parts]
    sizes_v = [q.num_nodes for q in part.parts]
    return ReplicationStats(
        rf=total / n if n else 1.0,
        per_node_rf=per_node,
        edge_balance=max(sizes_e) / (m / p) if m else 1.0,
        node_balance=max(sizes_v) / (n / p) if n else 1.0,
        duplicated_nodes=total - n,
    )


# -- vertex-cut algorithms ---------------------------------------------------

def partition_random(graph, p, seed=0):
    """Each edge goes to a uniformly random part, independently."""
    p = _check_p(p)
    rng = np.random.default_rng(seed)
    assign = rng.integers(0, p, size=graph.num_edges)
    return VertexCutPartition.from_assignment(graph.num_nodes, graph.edges, assign, p, "random", {"seed": seed})


def partition_dbh(graph, p, seed=0):
    """Degree-based hashing: edge goes to ``hash(lower-degree endpoint) mod p``.

    Degree ties pick the smaller node id. The hash is a 64-bit mix of
    ``node_id ^ seed``.
    """
    p = _check_p(p)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    du, dv = graph.degrees[u], graph.degrees[v]
    # u < v for canonical edges, so ties resolve to u
    key = np.where(du <= dv, u, v)
    h = kernels.mix64(key.astype(np.uint64), seed)
    assign = (h % np.uint64(p)).astype(np.int64)
    return VertexCutPartition.from_assignment(graph.num_nodes, graph.edges, assign, p, "dbh", {"seed": seed})


def partition_ne(graph, p, seed=0, balance_slack=1.1):
    """Greedy neighbor expansion.

    Parts ``0..p-2`` are grown one at a time. Expansion starts from the
    lowest-id node that still has unassigned edges; at each step the boundary
    node with the fewest unassigned edges leading outside the boundary is
    moved to the core and all its unassigned edges join the part. A part stops
    once it holds ``ceil(|E|/p)`` edges; the last part takes the remainder.
    Parts exceeding ``balance_slack * ceil(|E|/p)`` (possible only through the
    final expansion step) are listed in ``meta["overshoot"]``.

    ``seed`` is recorded but does not influence the result.
    """
    p = _check_p(p)
    if balance_slack < 1.0:
        raise PartitionError("balance_slack must be >= 1.0")
    n, m = graph.num_nodes, graph.num_edges
    indptr = graph.indptr.tolist()
    indices = graph.indices.tolist()
    eids = graph.edge_ids.tolist()
    assign = [-1] * m
    free = graph.degrees.tolist()  # unassigned incident edges per node
    cap = math.ceil(m / p) if m else 0
    overshoot = []
    next_seed = 0
    remaining = m

    for i in range(p - 1):
        if not remaining:
            break
        in_s = [False] * n
        in_core = [False] * n
        ext = [0] * n
        heap = []
        count = 0

        def add_to_boundary(y):
            in_s[y] = True
            e = 0
            for k in range(indptr[y], indptr[y + 1]):
                if assign[eids[k]] != -1:
                    continue
                z = indices[k]
                if in_s[z]:
                    if not in_core[z]:
                        ext[z] -= 1
                        heapq.heappush(heap, (ext[z], z))
                else:
                    e += 1
            ext[y] = e
            heapq.heappush(heap, (e, y))

        while count < cap:
            while heap and (in_core[heap[0][1]] or ext[heap[0][1]] != heap[0][0]):
                heapq.heappop(heap)
            if not heap:
                while next_seed < n and free[next_seed] == 0:
                    next_seed += 1
                if next_seed >= n:
                    break
                add_to_boundary(next_seed)
                continue
            _, x = heapq.heappop(heap)
            in_core[x] = True
            for k in range(indptr[x], indptr[x + 1]):
                e = eids[k]
                if assign[e] != -1:
                    continue
                y = indices[k]
                assign[e] = i
                count += 1
                free[x] -= 1
                free[y] -= 1
                if not in_s[y]:
                    add_to_boundary(y)
        remaining -= count
        if count > balance_slack * cap:
            overshoot.append({"part": i, "edges": count, "cap": cap})

    assign = np.asarray(assign, dtype=np.int64)
    assign[assign == -1] = p - 1
    meta = {"seed": seed, "balance_slack": balance_slack, "overshoot": overshoot}
    return VertexCutPartition.from_assignment(n, graph.edges, assign, p, "ne", meta)


# -- edge cut ------------------------------------------------------------------

@dataclass
class EdgeCutPartition:
    num_parts: int
    num_nodes: int
    edges: np.ndarray
    node_assignment: np.ndarray
    kept_edges: list
    cut_edges: np.ndarray
    halo_sets: list
    algorithm: str = "greedy edge cut"

    @property
    def num_halo(self):
        """``H``: total halo nodes, summed over parts."""
        return int(sum(len(h) for h in self.halo_sets))


def edge_cut_from_assignment(graph, node_assignment, p, algorithm="greedy edge cut"):
    p = _check_p(p)
    owner = np.asarray(node_assignment, dtype=np.int64)
    if owner.shape != (graph.num_nodes,) or (len(owner) and (owner.min() < 0 or owner.max() >= p)):
        raise PartitionError("node assignment must give a part in [0, p) for every node")
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    pu, pv = owner[u], owner[v]
    same = pu == pv
    kept = [np.flatnonzero(same & (pu == i)) for i in range(p)]
    cut = np.flatnonzero(~same)
    halo = []
    for i in range(p):
        foreign = np.concatenate([v[cut][pu[cut] == i], u[cut][pv[cut] == i]])
        halo.append(np.unique(foreign))
    return EdgeCutPartition(p, graph.num_nodes, graph.edges, owner, kept, cut, halo, algorithm)


def partition_edge_cut_greedy(graph, p, seed=0):
    """Seeded BFS region growing to balanced node counts.

    Part sizes are ``n // p``, with the first ``n % p`` parts one larger. Each
    region starts at the first unassigned node in a seeded permutation and
    restarts there whenever its BFS frontier runs dry.
    """
    p = _check_p(p)
    n = graph.num_nodes
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    sizes = [n // p + (1 if i < n % p else 0) for i in range(p)]
    owner = np.full(n, -1, dtype=np.int64)
    cursor = 0
    for i, size in enumerate(sizes):
        got = 0
        queue = []
        head = 0
        while got < size:
            if head == len(queue):
                while owner[order[cursor]] != -1:
                    cursor += 1
                start = order[cursor]
                owner[start] = i
                got += 1
                queue.append(start)
                continue
            x = queue[head]
            head += 1
            for y in graph.neighbors(x):
                if got >= size:
                    break
                if owner[y] == -1:
                    owner[y] = i
                    got += 1
                    queue.append(y)
    return edge_cut_from_assignment(graph, owner, p)


def edge_cut_to_vertex_cut(ec, seed=0):
    """Turn an edge cut into a vertex cut with fewer than ``H`` duplicated nodes.

    Kept edges stay in their part. Each cut edge ``(u, v)`` goes to the part of
    one endpoint by a seeded coin flip, duplicating the other endpoint there.
    One seeded halo copy ``(x, part j)`` is always eliminated: every cut edge
    between ``x`` and part ``j`` is sent to ``x``'s own part. Coin flips alone
    can realize every halo copy (e.g. an alternating 4-cycle across two parts),
    so this pin is what makes ``duplicated < H`` hold unconditionally.
    """
    p = ec.num_parts
    owner = ec.node_assignment
    assign = owner[ec.edges[:, 0]].copy()
    cut = ec.cut_edges
    if len(cut):
        rng = np.random.default_rng(seed)
        u, v = ec.edges[cut, 0], ec.edges[cut, 1]
        flip = rng.integers(0, 2, size=len(cut)).astype(bool)
        assign[cut] = np.where(flip, owner[v], owner[u])
        k = int(rng.integers(len(cut)))
        side = int(rng.integers(2))
        x = int((u, v)[side][k])
        j = int(owner[(v, u)[side][k]])
        touch = ((u == x) & (owner[v] == j)) | ((v == x) & (owner[u] == j))
        assign[cut[touch]] = owner[x]
    meta = {"seed": seed, "source": ec.algorithm, "halo_nodes": ec.num_halo}
    return VertexCutPartition.from_assignment(ec.num_nodes, ec.edges, assign, p, "edge_cut_to_vertex_cut", meta)


# -- closed forms ----------------------------------------------------------------

def expected_rf_random(p, d):
    """Expected replica count of a degree-``d`` node under uniform random edge placement."""
    if p < 1 or d < 0:
        raise PartitionError("need p >= 1 and d >= 0")
    return p * (1.0 - (1.0 - 1.0 / p) ** d)


def imbalance_lower_bound(p, max_d, min_d):
    """Ratio of expected replica counts between the max- and min-degree nodes."""
    if min_d < 1:
        raise PartitionError("min degree must be >= 1 (no isolated nodes)")
    if p < 1 or max_d < min_d:
        raise PartitionError("need p >= 1 and max_d >= min_d")
    if p == 1:
        return 1.0
    q = 1.0 - 1.0 / p
    return (1.0 - q ** max_d) / (1.0 - q ** min_d)


ALGORITHMS = {
    "random": partition_random,
    "dbh": partition_dbh,
    "ne": partition_ne,
}


def vertex_cut(graph, algo, p, seed=0, **kw):
    """Dispatch by name; ``edge_cut`` builds the greedy edge cut and converts it."""
    if algo == "edge_cut":
        return edge_cut_to_vertex_cut(partition_edge_cut_greedy(graph, p, seed), seed)
    try:
        fn = ALGORITHMS[algo]
    except KeyError:
        raise PartitionError(f"unknown partition algorithm {algo!r}") from None
    return fn(graph, p, seed, **kw)
