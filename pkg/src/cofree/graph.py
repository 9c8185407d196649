"""Undirected simple graphs in CSR form, plus the text/binary file formats.

File formats
------------
edge list
    UTF-8 text, one ``u v`` pair per line, ``#`` starts a comment line.
features
    CSV (one row per node) or the ``CFM1`` binary matrix: magic, rows and cols
    as little-endian uint64, then rows*cols little-endian float32, row-major.
labels
    one line per node: an integer class id, or a comma-separated 0/1 vector.
masks
    lines ``train|val|test <node_id>``.
"""

from __future__ import annotations

import logging
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
CFM_MAGIC = b"CFM1"
_HEADER = re.compile(r"#\s*nodes\s+(\d+)")


class GraphFormatError(ValueError):
    """Malformed input file."""


class GraphValidationError(ValueError):
    """Structurally invalid graph data."""


@dataclass
class ValidationReport:
    dropped_self_loops: int = 0
    merged_duplicate_edges: int = 0
    isolated_nodes: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass
class LoaderOptions:
    num_nodes: int | None = None
    strict: bool = False


def build_csr(num_nodes, edges):
    """CSR adjacency of an undirected edge array.

    Returns ``(indptr, indices, edge_ids)``; ``edge_ids[k]`` is the row of
    ``edges`` that produced adjacency slot ``k``. Neighbor order is
    deterministic (stable sort by source, then edge index).
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = len(edges)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    eid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.argsort(src, kind="stable")
    counts = np.bincount(src, minlength=num_nodes)
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, dst[order].astype(np.int64), eid[order].astype(np.int64)


class Graph:
    """Immutable undirected simple graph.

    ``edges`` is an ``(m, 2)`` array with ``u < v`` in each row; the row index
    is the stable edge id. Optional payloads: ``features`` (n x d float),
    ``labels`` (n ints, or n x C 0/1 for multi-label) and ``masks`` (dict of
    boolean vectors keyed by split name).
    """

    def __init__(self, num_nodes, edges, features=None, labels=None, masks=None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.num_nodes = int(num_nodes)
        self.edges = edges
        self.indptr, self.indices, self.edge_ids = build_csr(self.num_nodes, edges)
        self.degrees = np.diff(self.indptr)
        self.features = None if features is None else np.asarray(features)
        self.labels = None if labels is None else np.asarray(labels)
        self.masks = {} if masks is None else {k: np.asarray(v, dtype=bool) for k, v in masks.items()}
        for arr in (self.edges, self.indptr, self.indices, self.edge_ids, self.degrees):
            arr.setflags(write=False)
        for arr in (self.features, self.labels, *self.masks.values()):
            if arr is not None:
                arr.setflags(write=False)
        self._check()

    @classmethod
    def from_edges(cls, num_nodes, pairs, **payload):
        """Validate raw pairs and build a graph.

        Self-loops are dropped and duplicate undirected edges merged; both are
        counted in the returned :class:`ValidationReport`. Edge ids follow
        first appearance.
        """
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        report = ValidationReport()
        if len(pairs) and pairs.min() < 0:
            raise GraphValidationError("negative node id")
        if len(pairs) and pairs.max() >= num_nodes:
            raise GraphValidationError(f"node id {int(pairs.max())} >= num_nodes {num_nodes}")
        loops = pairs[:, 0] == pairs[:, 1]
        report.dropped_self_loops = int(loops.sum())
        pairs = pairs[~loops]
        canon = np.sort(pairs, axis=1)
        _, first = np.unique(canon, axis=0, return_index=True)
        first.sort()
        report.merged_duplicate_edges = len(canon) - len(first)
        g = cls(num_nodes, canon[first], **payload)
        report.isolated_nodes = np.flatnonzero(g.degrees == 0).tolist()
        if report.dropped_self_loops:
            report.warnings.append(f"dropped {report.dropped_self_loops} self-loop(s)")
        if report.merged_duplicate_edges:
            report.warnings.append(f"merged {report.merged_duplicate_edges} duplicate edge(s)")
        return g, report

    def _check(self):
        e = self.edges
        if len(e):
            if e.min() < 0 or e.max() >= self.num_nodes:
                raise GraphValidationError("edge endpoint out of range")
            if np.any(e[:, 0] >= e[:, 1]):
                raise GraphValidationError("edges must be canonical (u < v), no self-loops")
            if len(np.unique(e, axis=0)) != len(e):
                raise GraphValidationError("duplicate edges")
        n = self.num_nodes
        if self.features is not None and self.features.shape[0] != n:
            raise GraphValidationError(f"features have {self.features.shape[0]} rows, expected {n}")
        if self.labels is not None and self.labels.shape[0] != n:
            raise GraphValidationError(f"labels have {self.labels.shape[0]} rows, expected {n}")
        seen = np.zeros(n, dtype=bool)
        for name, m in self.masks.items():
            if name not in SPLITS:
                raise GraphValidationError(f"unknown split {name!r}")
            if m.shape != (n,):
                raise GraphValidationError(f"mask {name!r} has wrong length")
            if np.any(seen & m):
                raise GraphValidationError("split masks overlap")
            seen |= m

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def multilabel(self):
        return self.labels is not None and self.labels.ndim == 2

    @property
    def num_classes(self):
        if self.labels is None:
            return 0
        if self.multilabel:
            return self.labels.shape[1]
        return int(self.labels.max()) + 1

    def neighbors(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def with_payload(self, **payload):
        """Copy with features/labels/masks replaced."""
        kw = dict(features=self.features, labels=self.labels, masks=self.masks)
        kw.update(payload)
        return Graph(self.num_nodes, self.edges, **kw)

    def homophily(self):
        """Fraction of edges whose endpoints share a class (multi-class labels)."""
        if self.labels is None or self.multilabel:
            raise GraphValidationError("homophily needs multi-class labels")
        if not self.num_edges:
            return 1.0
        y = self.labels
        return float(np.mean(y[self.edges[:, 0]] == y[self.edges[:, 1]]))


def degree_extremes(graph):
    """``(min degree over non-isolated nodes, max degree)``."""
    if graph.num_edges == 0:
        raise GraphValidationError("graph has no edges")
    d = graph.degrees
    return int(d[d > 0].min()), int(d.max())


# -- edge lists --------------------------------------------------------------

def parse_edge_list(text):
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.split()
        if len(tok) < 2:
            raise GraphFormatError(f"line {lineno}: expected two node ids, got {s!r}")
        try:
            u, v = int(tok[0]), int(tok[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer node id in {s!r}") from None
        if u < 0 or v < 0:
            raise GraphValidationError(f"line {lineno}: negative node id")
        pairs.append((u, v))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def load_graph(edge_list_path, options=None):
    """Read an edge list file into a validated :class:`Graph`.

    Node count is ``1 + max id`` unless ``options.num_nodes`` is given. In
    strict mode, ids that never appear are an error rather than isolated nodes.
    """
    options = options or LoaderOptions()
    text = Path(edge_list_path).read_text(encoding="utf-8")
    pairs = parse_edge_list(text)
    n = options.num_nodes
    if n is None:
        # header written by save_edge_list keeps trailing isolated nodes
        m = _HEADER.match(text)
        n = int(pairs.max()) + 1 if len(pairs) else 0
        if m:
            n = max(n, int(m.group(1)))
    graph, report = Graph.from_edges(n, pairs)
    if options.strict:
        present = np.zeros(n, dtype=bool)
        present[pairs.ravel()] = True
        if not present.all():
            missing = np.flatnonzero(~present)
            raise GraphValidationError(f"strict mode: node ids absent from edge list: {missing[:10].tolist()}")
    elif report.isolated_nodes:
        report.warnings.append(f"{len(report.isolated_nodes)} isolated node(s)")
    for w in report.warnings:
        logger.warning("%s: %s", edge_list_path, w)
    return graph, report


def save_edge_list(graph, path):
    lines = [f"# nodes {graph.num_nodes} edges {graph.num_edges}"]
    lines += [f"{u} {v}" for u, v in graph.edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- features ----------------------------------------------------------------

def _check_finite(mat):
    bad = np.argwhere(~np.isfinite(mat))
    if len(bad):
        r, c = bad[0]
        raise GraphFormatError(f"non-finite value at row {r}, col {c}")


def load_features(path, expected_nodes):
    """Load a CSV or CFM1 feature matrix and check it has ``expected_nodes`` rows."""
    raw = Path(path).read_bytes()
    if raw[:4] == CFM_MAGIC:
        if len(raw) < 20:
            raise GraphFormatError("truncated CFM1 header")
        rows, cols = struct.unpack_from("<QQ", raw, 4)
        body = raw[20:]
        if len(body) != rows * cols * 4:
            raise GraphFormatError(f"CFM1 body has {len(body)} bytes, expected {rows * cols * 4}")
        mat = np.frombuffer(body, dtype="<f4").reshape(rows, cols).astype(np.float64)
    else:
        rows_ = []
        width = None
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            toks = line.split(",")
            if width is None:
                width = len(toks)
            elif len(toks) != width:
                raise GraphFormatError(f"ragged row {lineno}: {len(toks)} values, expected {width}")
            try:
                rows_.append([float(t) for t in toks])
            except ValueError:
                raise GraphFormatError(f"row {lineno}: unparseable value") from None
        mat = np.array(rows_, dtype=np.float64).reshape(len(rows_), width or 0)
    _check_finite(mat)
    if mat.shape[0] != expected_nodes:
        raise GraphFormatError(f"feature rows {mat.shape[0]} != expected {expected_nodes}")
    return mat


def save_features(features, path, fmt="cfm"):
    features = np.asarray(features)
    if fmt == "csv":
        lines = [",".join(repr(float(x)) for x in row) for row in features]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        return
    rows, cols = features.shape
    body = np.ascontiguousarray(features, dtype="<f4").tobytes()
    Path(path).write_bytes(CFM_MAGIC + struct.pack("<QQ", rows, cols) + body)


# -- labels and masks --------------------------------------------------------

def load_labels(path, expected_nodes):
    lines = [s.strip() for s in Path(path).read_text(encoding="utf-8").splitlines() if s.strip()]
    if len(lines) != expected_nodes:
        raise GraphFormatError(f"{len(lines)} label lines, expected {expected_nodes}")
    if any("," in s for s in lines):
        try:
            mat = np.array([[int(t) for t in s.split(",")] for s in lines], dtype=np.int64)
        except ValueError:
            raise GraphFormatError("ragged or non-integer multi-label rows") from None
        if not np.isin(mat, (0, 1)).all():
            raise GraphFormatError("multi-label entries must be 0/1")
        return mat
    labels = np.array([int(s) for s in lines], dtype=np.int64)
    if labels.min() < 0:
        raise GraphFormatError("negative class id")
    return labels


def save_labels(labels, path):
    labels = np.asarray(labels)
    if labels.ndim == 2:
        lines = [",".join(str(int(x)) for x in row) for row in labels]
    else:
        lines = [str(int(x)) for x in labels]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_masks(path, num_nodes):
    masks = {s: np.zeros(num_nodes, dtype=bool) for s in SPLITS}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.split()
        if len(tok) != 2 or tok[0] not in masks:
            raise GraphFormatError(f"line {lineno}: expected 'train|val|test <id>'")
        v = int(tok[1])
        if not 0 <= v < num_nodes:
            raise GraphValidationError(f"line {lineno}: node id {v} out of range")
        masks[tok[0]][v] = True
    return masks


def save_masks(masks, path):
    lines = []
    for split in SPLITS:
        if split in masks:
            lines += [f"{split} {v}" for v in np.flatnonzero(masks[split]).tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(directory, options=None):
    """Load ``edges.txt`` plus whatever of features/labels/masks exists in a directory."""
    d = Path(directory)
    graph, report = load_graph(d / "edges.txt", options)
    payload = {}
    for name in ("features.cfm", "features.csv"):
        if (d / name).exists():
            payload["features"] = load_features(d / name, graph.num_nodes)
            break
    if (d / "labels.txt").exists():
        payload["labels"] = load_labels(d / "labels.txt", graph.num_nodes)
    if (d / "masks.txt").exists():
        payload["masks"] = load_masks(d / "masks.txt", graph.num_nodes)
    return graph.with_payload(**payload), report


def save_dataset(graph, directory):
    """Write edges/features/labels/masks; returns the list of written paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = [d / "edges.txt"]
    save_edge_list(graph, written[0])
    if graph.features is not None:
        written.append(d / "features.cfm")
        save_features(graph.features, written[-1])
    if graph.labels is not None:
        written.append(d / "labels.txt")
        save_labels(graph.labels, written[-1])
    if graph.masks:
        written.append(d / "masks.txt")
        save_masks(graph.masks, written[-1])
    return written
