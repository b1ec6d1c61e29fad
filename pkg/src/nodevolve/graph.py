"""Immutable undirected graphs and the structural metrics computed on them.

Graphs are stored as a compressed adjacency (CSR-style index arrays) over
dense node ids 0..V-1 with string labels kept alongside.  All metric
functions are deterministic and permutation-equivariant: relabeling the
nodes of a graph permutes every output vector identically, bit for bit.
Floating-point aggregations therefore always sum values in a canonical
(value-sorted) order, and shortest-path accumulation uses exact rationals.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph


class EdgeListParseError(ValueError):
    """Raised when an edge-list text cannot be parsed; carries the line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DismantleError(ValueError):
    """Raised for operations that are undefined on the given graph."""


def _sorted_total(values: np.ndarray) -> float:
    # Canonical float sum: ascending value order is invariant under node relabeling.
    return float(np.sum(np.sort(values, kind="stable")))


def sorted_segment_sum(values: np.ndarray, segments: np.ndarray, n: int) -> np.ndarray:
    """Per-segment float sums with a canonical within-segment order.

    Sorting each segment's values before reduction makes the result exactly
    independent of the order edges are stored in, which is what makes the
    metric vectors bit-exact under node relabeling.
    """
    out = np.zeros(n, dtype=np.float64)
    if values.size == 0:
        return out
    order = np.lexsort((values, segments))
    v = values[order]
    s = segments[order]
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    out[s[starts]] = np.add.reduceat(v, starts)
    return out


class Graph:
    """Undirected simple graph over dense node ids with string labels.

    Instances are immutable: the index arrays are marked read-only and no
    method mutates state.  Parallel edges and self-loops are rejected.
    """

    def __init__(self, indptr: np.ndarray, indices: np.ndarray, labels: tuple[str, ...], validate: bool = True):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.labels = tuple(labels)
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        if validate:
            self._check()

    def _check(self) -> None:
        v = self.node_count
        if len(self.indptr) != v + 1 or self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise ValueError("malformed index arrays")
        if len(set(self.labels)) != v:
            raise ValueError("labels must be unique")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= v):
            raise ValueError("neighbor id out of range")
        for u in range(v):
            row = self.indices[self.indptr[u]:self.indptr[u + 1]]
            if np.any(row[1:] <= row[:-1]):
                raise ValueError(f"row {u} not strictly sorted (duplicate or unsorted edge)")
            if np.any(row == u):
                raise ValueError(f"self-loop at node {u}")
        # symmetry: every arc must have its reverse
        esrc, edst = self.edge_arrays()
        fwd = set(zip(esrc.tolist(), edst.tolist()))
        if any((b, a) not in fwd for a, b in fwd):
            raise ValueError("adjacency not symmetric")

    @property
    def node_count(self) -> int:
        return len(self.labels)

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat (source, target) arrays with every undirected edge in both directions."""
        try:
            return self._edge_arrays
        except AttributeError:
            esrc = np.repeat(np.arange(self.node_count, dtype=np.int64), np.diff(self.indptr))
            esrc.setflags(write=False)
            self._edge_arrays = (esrc, self.indices)
            return self._edge_arrays

    def adjacency_lists(self) -> list[list[int]]:
        try:
            return self._adj
        except AttributeError:
            self._adj = [self.indices[self.indptr[u]:self.indptr[u + 1]].tolist() for u in range(self.node_count)]
            return self._adj

    def csr(self) -> sp.csr_matrix:
        try:
            return self._csr
        except AttributeError:
            v = self.node_count
            data = np.ones(len(self.indices), dtype=np.int64)
            self._csr = sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(v, v))
            return self._csr

    def label_of(self, v: int) -> str:
        return self.labels[v]

    def index_of(self, label: str) -> int:
        try:
            lookup = self._label_index
        except AttributeError:
            lookup = self._label_index = {s: i for i, s in enumerate(self.labels)}
        return lookup[label]

    def __repr__(self) -> str:
        return f"Graph(nodes={self.node_count}, edges={self.edge_count})"

    @staticmethod
    def from_edges(edges, labels: tuple[str, ...] | None = None, node_count: int | None = None) -> "Graph":
        """Build a graph from (u, v) integer pairs; duplicates and loops are rejected."""
        pairs = set()
        top = -1
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop ({u}, {v})")
            if u < 0 or v < 0:
                raise ValueError("negative node id")
            pairs.add((min(u, v), max(u, v)))
            top = max(top, u, v)
        n = node_count if node_count is not None else top + 1
        if labels is not None and len(labels) != n:
            raise ValueError("label count does not match node count")
        if top >= n:
            raise ValueError("node id out of range")
        if pairs:
            e = np.array(sorted(pairs), dtype=np.int64)
            esrc = np.concatenate([e[:, 0], e[:, 1]])
            edst = np.concatenate([e[:, 1], e[:, 0]])
            order = np.lexsort((edst, esrc))
            indices = edst[order]
            counts = np.bincount(esrc, minlength=n)
        else:
            indices = np.zeros(0, dtype=np.int64)
            counts = np.zeros(n, dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        if labels is None:
            labels = tuple(str(i) for i in range(n))
        return Graph(indptr, indices, labels, validate=False)

    @staticmethod
    def from_adjacency(a) -> "Graph":
        """Build a graph from a dense or sparse 0/1 symmetric adjacency matrix."""
        if sp.issparse(a):
            a = a.toarray()
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        vals = np.unique(a)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency diagonal must be zero")
        us, vs = np.nonzero(np.triu(a, 1))
        return Graph.from_edges(zip(us.tolist(), vs.tolist()), node_count=a.shape[0])


def load_edge_list(text: str | bytes) -> Graph:
    """Parse whitespace-separated edge-list text into a Graph.

    Lines starting with '#' or '%' and blank lines are skipped, tokens past
    the first two are ignored, duplicate edges are merged, and self-loops are
    dropped (their labels still count as nodes).  Labels get dense ids in
    order of first appearance.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    label_ids: dict[str, int] = {}
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("%"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise EdgeListParseError(lineno, f"expected at least two tokens, got {len(parts)}")
        u, v = parts[0], parts[1]
        iu = label_ids.setdefault(u, len(label_ids))
        iv = label_ids.setdefault(v, len(label_ids))
        if iu != iv:
            edges.append((iu, iv))
    labels = tuple(label_ids)
    return Graph.from_edges(edges, labels=labels, node_count=len(labels))


def read_edge_list(path: str | Path) -> Graph:
    return load_edge_list(Path(path).read_bytes())


def write_edge_list(g: Graph, path: str | Path, header: str | None = None) -> None:
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    esrc, edst = g.edge_arrays()
    keep = esrc < edst
    for u, v in zip(esrc[keep].tolist(), edst[keep].tolist()):
        lines.append(f"{g.labels[u]} {g.labels[v]}")
    Path(path).write_text("\n".join(lines) + "\n")


def generate_ba(n: int, m: int, seed: int) -> Graph:
    """Preferential-attachment graph: star seed on m+1 nodes, then each new
    node attaches to m distinct existing nodes sampled proportionally to degree.

    Deterministic for a given seed.  Emits exactly m * (n - m) edges.
    """
    import random

    if m < 1 or n <= m:
        raise ValueError("need n > m >= 1")
    rng = random.Random(seed)
    edges = [(0, i) for i in range(1, m + 1)]
    # one entry per edge endpoint: sampling from this list is degree-proportional
    repeated: list[int] = []
    for u, v in edges:
        repeated.append(u)
        repeated.append(v)
    for new in range(m + 1, n):
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(rng.choice(repeated))
        for t in sorted(chosen):
            edges.append((t, new))
            repeated.append(t)
            repeated.append(new)
    return Graph.from_edges(edges, node_count=n)


def new_mask(g: Graph) -> np.ndarray:
    """Fresh all-False removal mask (True marks a removed node)."""
    return np.zeros(g.node_count, dtype=bool)


@dataclass
class ComponentPartition:
    """Connected components of the surviving subgraph.

    component_id holds one id in 0..num_components-1 per surviving node and
    -1 for removed nodes; sizes[i] is the node count of component i.
    """

    component_id: np.ndarray
    sizes: np.ndarray

    @property
    def num_components(self) -> int:
        return len(self.sizes)


def connected_components(g: Graph, mask: np.ndarray | None = None) -> ComponentPartition:
    v = g.node_count
    if mask is None:
        if v == 0:
            return ComponentPartition(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
        ncomp, lab = csgraph.connected_components(g.csr(), directed=False)
        return ComponentPartition(lab.astype(np.int64), np.bincount(lab, minlength=ncomp).astype(np.int64))
    alive = np.flatnonzero(~mask)
    comp = np.full(v, -1, dtype=np.int64)
    if alive.size == 0:
        return ComponentPartition(comp, np.zeros(0, dtype=np.int64))
    sub = g.csr()[alive][:, alive]
    ncomp, lab = csgraph.connected_components(sub, directed=False)
    comp[alive] = lab
    return ComponentPartition(comp, np.bincount(lab, minlength=ncomp).astype(np.int64))


def pairwise_connectivity(g: Graph, mask: np.ndarray | None = None) -> int:
    """Number of unordered surviving node pairs that are connected by a path."""
    sizes = connected_components(g, mask).sizes
    return int(sum(int(s) * (int(s) - 1) // 2 for s in sizes))


def degrees(g: Graph, mask: np.ndarray | None = None) -> np.ndarray:
    """Surviving-degree vector over all nodes; removed nodes report 0."""
    if mask is None:
        return np.diff(g.indptr)
    esrc, edst = g.edge_arrays()
    alive = ~mask
    live_edge = alive[esrc] & alive[edst]
    return np.bincount(esrc[live_edge], minlength=g.node_count).astype(np.int64)


def core_decomposition(g: Graph, mask: np.ndarray | None = None) -> np.ndarray:
    """Coreness of every node in the surviving subgraph (removed nodes get 0).

    Standard peeling: repeatedly delete minimum-degree nodes; a node's
    coreness is the largest k such that it survives in the k-core.
    """
    v = g.node_count
    core = np.zeros(v, dtype=np.int64)
    deg = degrees(g, mask).astype(np.int64).copy()
    alive = np.ones(v, dtype=bool) if mask is None else ~mask
    nodes = np.flatnonzero(alive)
    if nodes.size == 0:
        return core
    adj = g.adjacency_lists()
    maxdeg = int(deg[nodes].max())
    # bucket-sorted peel: vert holds alive nodes ordered by current degree
    bin_start = np.zeros(maxdeg + 2, dtype=np.int64)
    counts = np.bincount(deg[nodes], minlength=maxdeg + 1)
    bin_start[1:] = np.cumsum(counts)
    start = bin_start[:-1].copy()
    vert = np.zeros(nodes.size, dtype=np.int64)
    pos = np.zeros(v, dtype=np.int64)
    fill = start.copy()
    for u in nodes:
        d = deg[u]
        vert[fill[d]] = u
        pos[u] = fill[d]
        fill[d] += 1
    d = deg.copy()
    for i in range(nodes.size):
        u = vert[i]
        core[u] = d[u]
        for w in adj[u]:
            if alive[w] and d[w] > d[u] and pos[w] > i:
                dw = d[w]
                pw = pos[w]
                ps = start[dw]
                s = vert[ps]
                if s != w:
                    vert[ps], vert[pw] = w, s
                    pos[w], pos[s] = ps, pw
                start[dw] += 1
                d[w] -= 1
    return core


def betweenness(g: Graph) -> np.ndarray:
    """Unnormalized shortest-path betweenness, each unordered pair counted once.

    Path counts and dependency accumulation use exact rational arithmetic, so
    the float vector returned is bit-exactly permutation-equivariant.
    """
    v = g.node_count
    adj = g.adjacency_lists()
    acc = [Fraction(0)] * v
    zero = Fraction(0)
    one = Fraction(1)
    for s in range(v):
        dist = [-1] * v
        sigma = [0] * v
        preds: list[list[int]] = [[] for _ in range(v)]
        order: list[int] = []
        dist[s] = 0
        sigma[s] = 1
        q = deque([s])
        while q:
            u = q.popleft()
            order.append(u)
            du1 = dist[u] + 1
            su = sigma[u]
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = du1
                    q.append(w)
                if dist[w] == du1:
                    sigma[w] += su
                    preds[w].append(u)
        delta = [zero] * v
        for w in reversed(order):
            dw = delta[w]
            if w != s:
                acc[w] += dw
            coeff = (one + dw) / sigma[w]
            for p in preds[w]:
                delta[p] += sigma[p] * coeff
    return np.array([float(a) for a in acc], dtype=np.float64) * 0.5


def harmonic_closeness(g: Graph) -> np.ndarray:
    """Sum of inverse shortest-path distances to every reachable node."""
    v = g.node_count
    adj = g.adjacency_lists()
    out = np.zeros(v, dtype=np.float64)
    dist = np.full(v, -1, dtype=np.int64)
    for s in range(v):
        dist[:] = -1
        dist[s] = 0
        frontier = [s]
        level_counts: list[int] = []
        d = 0
        while frontier:
            d += 1
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if dist[w] < 0:
                        dist[w] = d
                        nxt.append(w)
            if nxt:
                level_counts.append(len(nxt))
            frontier = nxt
        # ascending-distance accumulation keeps the float sum canonical
        total = 0.0
        for d, c in enumerate(level_counts, start=1):
            total += c / d
        out[s] = total
    return out


def pagerank(g: Graph, damping: float = 0.85, tol: float = 1e-9, max_iter: int = 100) -> np.ndarray:
    """Power-iteration PageRank with uniform teleport and uniform dangling mass."""
    v = g.node_count
    if v == 0:
        return np.zeros(0, dtype=np.float64)
    esrc, edst = g.edge_arrays()
    deg = np.diff(g.indptr).astype(np.float64)
    dangling = deg == 0
    r = np.full(v, 1.0 / v, dtype=np.float64)
    base = (1.0 - damping) / v
    for _ in range(max_iter):
        share = np.where(dangling, 0.0, r / np.where(dangling, 1.0, deg))
        inflow = sorted_segment_sum(share[edst], esrc, v)
        lost = _sorted_total(r[dangling]) if dangling.any() else 0.0
        nxt = base + damping * (inflow + lost / v)
        delta = _sorted_total(np.abs(nxt - r))
        r = nxt
        if delta < tol:
            break
    return r


def eigenvector_centrality(g: Graph, tol: float = 1e-9, max_iter: int = 100) -> np.ndarray:
    """Power iteration for the principal adjacency eigenvector, uniform start.

    Iterates (A + I) x, which has the same eigenvectors as A but a strictly
    shifted spectrum, so the sign oscillation that plain A-iteration exhibits
    on bipartite graphs cannot occur.  Each iterate is L2-normalized; on an
    edgeless graph the uniform start is already a fixed point.  Returns the
    last iterate after convergence or max_iter.
    """
    v = g.node_count
    if v == 0:
        return np.zeros(0, dtype=np.float64)
    esrc, edst = g.edge_arrays()
    x = np.full(v, 1.0 / np.sqrt(v), dtype=np.float64)
    for _ in range(max_iter):
        y = sorted_segment_sum(x[edst], esrc, v) + x
        norm = np.sqrt(_sorted_total(y * y))
        if norm == 0.0:
            break
        y /= norm
        delta = np.sqrt(_sorted_total((y - x) ** 2))
        x = y
        if delta < tol:
            break
    return x


def khop_counts(g: Graph, k: int) -> np.ndarray:
    """Number of distinct nodes within shortest-path distance k (1 <= k <= 4)."""
    if not 1 <= k <= 4:
        raise ValueError("k must be in 1..4")
    v = g.node_count
    if v == 0:
        return np.zeros(0, dtype=np.int64)
    reach = g.csr() + sp.identity(v, dtype=np.int64, format="csr")
    reach.data[:] = 1
    step = reach
    for _ in range(k - 1):
        reach = reach @ step
        reach.data[:] = 1
    # row support minus the node itself
    return (np.diff(reach.indptr) - 1).astype(np.int64)


def clustering_coefficients(g: Graph) -> np.ndarray:
    """Fraction of a node's neighbor pairs that are themselves adjacent."""
    v = g.node_count
    if v == 0:
        return np.zeros(0, dtype=np.float64)
    a = g.csr()
    closed = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel()  # 2 * triangles at each node
    d = np.diff(g.indptr).astype(np.float64)
    denom = d * (d - 1.0)
    return np.where(denom > 0, closed / np.where(denom > 0, denom, 1.0), 0.0)
