"""Brute-force reference implementations used to pin expected values.

Everything here is written independently of the package internals: dense
boolean matrices, pair enumeration, and repeated stripping, so the fast
implementations are checked against a second route.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np

from nodevolve.graph import Graph


def random_graph(rng: random.Random, max_nodes: int = 12) -> Graph:
    n = rng.randint(1, max_nodes)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < rng.choice((0.15, 0.3, 0.5)):
                edges.append((u, v))
    return Graph.from_edges(edges, node_count=n)


def dense_adjacency(g: Graph) -> np.ndarray:
    n = g.node_count
    a = np.zeros((n, n), dtype=bool)
    for u in range(n):
        a[u, g.neighbors(u)] = True
    return a


def reachability_oracle(g: Graph, mask: np.ndarray | None = None) -> np.ndarray:
    """Transitive closure by repeated boolean squaring on the dense adjacency."""
    n = g.node_count
    a = dense_adjacency(g)
    alive = np.ones(n, dtype=bool) if mask is None else ~np.asarray(mask)
    a[~alive, :] = False
    a[:, ~alive] = False
    reach = a | np.diag(alive)
    for _ in range(max(1, n)):
        nxt = reach | (reach @ reach)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    return reach


def components_oracle(g: Graph, mask: np.ndarray | None = None) -> list[set[int]]:
    n = g.node_count
    alive = np.ones(n, dtype=bool) if mask is None else ~np.asarray(mask)
    reach = reachability_oracle(g, mask)
    seen: set[int] = set()
    comps = []
    for v in range(n):
        if alive[v] and v not in seen:
            comp = set(np.flatnonzero(reach[v]).tolist())
            comps.append(comp)
            seen |= comp
    return comps


def sigma_oracle(g: Graph, mask: np.ndarray | None = None) -> int:
    return sum(len(c) * (len(c) - 1) // 2 for c in components_oracle(g, mask))


def distances_oracle(g: Graph) -> np.ndarray:
    """All-pairs shortest-path lengths via dense relaxation; -1 if unreachable."""
    n = g.node_count
    a = dense_adjacency(g)
    dist = np.full((n, n), -1, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    frontier = a.copy()
    d = 0
    while frontier.any():
        d += 1
        newly = frontier & (dist < 0)
        dist[newly] = d
        # expand one more step from everything reached so far
        reached = dist >= 0
        frontier = (reached @ a) & ~reached
    return dist


def coreness_oracle(g: Graph, mask: np.ndarray | None = None) -> np.ndarray:
    n = g.node_count
    alive = np.ones(n, dtype=bool) if mask is None else ~np.asarray(mask)
    a = dense_adjacency(g)
    core = np.zeros(n, dtype=np.int64)
    present = alive.copy()
    k = 0
    while present.any():
        k += 1
        while True:
            deg = (a & present[None, :]).sum(axis=1)
            strip = present & (deg < k)
            if not strip.any():
                break
            core[strip] = k - 1
            present &= ~strip
        core[present] = k
    return core


def betweenness_oracle(g: Graph) -> np.ndarray:
    """Pair-by-pair geodesic counting with exact rationals."""
    n = g.node_count
    dist = distances_oracle(g)
    # sigma[s][t]: number of shortest s-t paths, by dynamic programming over distance
    sigma = np.zeros((n, n), dtype=object)
    a = dense_adjacency(g)
    for s in range(n):
        sigma[s, s] = 1
        order = sorted((v for v in range(n) if dist[s, v] > 0), key=lambda v: dist[s, v])
        for v in order:
            total = 0
            for u in range(n):
                if a[u, v] and dist[s, u] == dist[s, v] - 1:
                    total += sigma[s, u]
            sigma[s, v] = total
    acc = [Fraction(0)] * n
    for s, t in itertools.combinations(range(n), 2):
        if dist[s, t] <= 0:
            continue
        for v in range(n):
            if v in (s, t) or dist[s, v] < 0 or dist[v, t] < 0:
                continue
            if dist[s, v] + dist[v, t] == dist[s, t]:
                acc[v] += Fraction(int(sigma[s, v]) * int(sigma[v, t]), int(sigma[s, t]))
    return np.array([float(x) for x in acc], dtype=np.float64)


def harmonic_closeness_oracle(g: Graph) -> np.ndarray:
    dist = distances_oracle(g)
    n = g.node_count
    out = np.zeros(n, dtype=np.float64)
    for v in range(n):
        total = Fraction(0)
        for u in range(n):
            if u != v and dist[v, u] > 0:
                total += Fraction(1, int(dist[v, u]))
        out[v] = float(total)
    return out


def khop_oracle(g: Graph, k: int) -> np.ndarray:
    dist = distances_oracle(g)
    return ((dist > 0) & (dist <= k)).sum(axis=1).astype(np.int64)


def clustering_oracle(g: Graph) -> np.ndarray:
    n = g.node_count
    a = dense_adjacency(g)
    out = np.zeros(n, dtype=np.float64)
    for v in range(n):
        nbrs = np.flatnonzero(a[v])
        d = len(nbrs)
        if d < 2:
            continue
        links = sum(1 for u, w in itertools.combinations(nbrs, 2) if a[u, w])
        out[v] = 2.0 * links / (d * (d - 1))
    return out


def anc_oracle(g: Graph, removal: list[int], denominator: str = "removal") -> float:
    """Recount connectivity from scratch after each prefix removal."""
    n = g.node_count
    sigma0 = sigma_oracle(g)
    mask = np.zeros(n, dtype=bool)
    ratios = []
    for v in removal:
        mask[v] = True
        ratios.append(Fraction(sigma_oracle(g, mask), sigma0))
    total = sum(ratios, Fraction(0))
    if denominator == "removal":
        return float(total / len(removal))
    return float(total / n)


def permute_graph(g: Graph, perm: list[int]) -> Graph:
    """Relabel node v as perm[v]; labels move with the nodes."""
    n = g.node_count
    esrc, edst = g.edge_arrays()
    keep = esrc < edst
    edges = [(perm[int(u)], perm[int(v)]) for u, v in zip(esrc[keep], edst[keep])]
    labels: list[str] = [""] * n
    for v in range(n):
        labels[perm[v]] = g.labels[v]
    return Graph.from_edges(edges, labels=tuple(labels), node_count=n)
