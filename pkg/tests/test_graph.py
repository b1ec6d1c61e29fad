from __future__ import annotations

import random

import numpy as np
import pytest

from helpers import (
    anc_oracle,
    betweenness_oracle,
    clustering_oracle,
    components_oracle,
    coreness_oracle,
    harmonic_closeness_oracle,
    khop_oracle,
    permute_graph,
    random_graph,
    sigma_oracle,
)
from nodevolve.graph import (
    EdgeListParseError,
    Graph,
    betweenness,
    clustering_coefficients,
    connected_components,
    core_decomposition,
    degrees,
    eigenvector_centrality,
    generate_ba,
    harmonic_closeness,
    khop_counts,
    load_edge_list,
    new_mask,
    pagerank,
    pairwise_connectivity,
    read_edge_list,
    write_edge_list,
)


def star(n: int) -> Graph:
    return Graph.from_edges([(0, i) for i in range(1, n)], node_count=n)


def path(n: int) -> Graph:
    return Graph.from_edges([(i, i + 1) for i in range(n - 1)], node_count=n)


def complete(n: int) -> Graph:
    return Graph.from_edges([(i, j) for i in range(n) for j in range(i + 1, n)], node_count=n)


class TestEdgeList:
    def test_basic_parse(self):
        g = load_edge_list("a b\nb c\n")
        assert g.node_count == 3
        assert g.edge_count == 2
        assert g.labels == ("a", "b", "c")

    def test_duplicate_and_reverse_merged(self):
        g = load_edge_list("a b\nb a\na b")
        assert g.node_count == 2
        assert g.edge_count == 1

    def test_self_loop_dropped_but_label_counted(self):
        g = load_edge_list("a b\nb a\na a")
        assert g.node_count == 2
        assert g.edge_count == 1
        g2 = load_edge_list("a b\nc c")
        assert g2.node_count == 3
        assert g2.edge_count == 1
        assert degrees(g2).tolist() == [1, 1, 0]

    def test_comments_blanks_and_extra_tokens(self):
        g = load_edge_list("# header\n% style comment\n\na b 0.7 extra\nb c 1\n")
        assert g.node_count == 3
        assert g.edge_count == 2

    def test_parse_error_carries_line_number(self):
        with pytest.raises(EdgeListParseError) as err:
            load_edge_list("a b\nonly_one_token\n")
        assert err.value.lineno == 2
        assert "line 2" in str(err.value)

    def test_labels_by_first_appearance(self):
        g = load_edge_list("x y\nz x")
        assert g.labels == ("x", "y", "z")
        assert g.index_of("z") == 2

    def test_bytes_input(self):
        g = load_edge_list(b"1 2\n2 3\n")
        assert g.node_count == 3

    def test_write_read_round_trip(self, tmp_path):
        g = generate_ba(30, 2, seed=5)
        p = tmp_path / "g.txt"
        write_edge_list(g, p, header="n=30")
        h = read_edge_list(p)
        assert h.node_count == g.node_count
        assert h.edge_count == g.edge_count
        # ids are reassigned by first appearance; compare degrees per label
        dg, dh = degrees(g), degrees(h)
        for v in range(g.node_count):
            assert dh[h.index_of(g.labels[v])] == dg[v]


class TestGraphType:
    def test_arrays_read_only(self):
        g = path(4)
        with pytest.raises(ValueError):
            g.indices[0] = 3
        with pytest.raises(ValueError):
            g.indptr[0] = 1

    def test_from_edges_rejects_loops(self):
        with pytest.raises(ValueError):
            Graph.from_edges([(0, 0)])

    def test_from_adjacency(self):
        a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        g = Graph.from_adjacency(a)
        assert g.edge_count == 2
        with pytest.raises(ValueError):
            Graph.from_adjacency(np.array([[0, 1], [0, 0]]))
        with pytest.raises(ValueError):
            Graph.from_adjacency(np.array([[1, 1], [1, 0]]))
        with pytest.raises(ValueError):
            Graph.from_adjacency(np.array([[0, 2], [2, 0]]))

    def test_neighbors_sorted(self):
        g = load_edge_list("c a\nc b\nc d")
        assert g.neighbors(0).tolist() == sorted(g.neighbors(0).tolist())


class TestGenerateBa:
    def test_edge_count_formula(self):
        # star seed on m+1 nodes plus m attachments per remaining node
        assert generate_ba(4, 3, seed=0).edge_count == 3
        assert generate_ba(10, 2, seed=1).edge_count == 2 * 8
        assert generate_ba(200, 3, seed=7).edge_count == 3 * 197

    def test_thousand_node_edge_count(self):
        g = generate_ba(1000, 3, seed=0)
        assert g.node_count == 1000
        assert g.edge_count == 2991

    def test_deterministic_per_seed(self):
        a = generate_ba(60, 3, seed=9)
        b = generate_ba(60, 3, seed=9)
        c = generate_ba(60, 3, seed=10)
        assert np.array_equal(a.indices, b.indices)
        assert not np.array_equal(a.indices, c.indices)

    def test_connected_and_min_degree(self):
        g = generate_ba(100, 3, seed=3)
        assert connected_components(g).num_components == 1
        assert degrees(g).min() >= 3

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            generate_ba(3, 3, seed=0)
        with pytest.raises(ValueError):
            generate_ba(5, 0, seed=0)


class TestComponents:
    def test_star_sigma(self):
        assert pairwise_connectivity(star(5)) == 10

    def test_two_components(self):
        g = load_edge_list("a b\nc d")
        part = connected_components(g)
        assert part.num_components == 2
        assert sorted(part.sizes.tolist()) == [2, 2]
        assert pairwise_connectivity(g) == 2

    def test_mask_removes_hub(self):
        g = star(5)
        mask = new_mask(g)
        mask[0] = True
        part = connected_components(g, mask)
        assert part.num_components == 4
        assert part.component_id[0] == -1
        assert pairwise_connectivity(g, mask) == 0

    def test_component_ids_dense(self):
        g = load_edge_list("a b\nc d\ne f")
        part = connected_components(g)
        assert sorted(set(part.component_id.tolist())) == [0, 1, 2]

    def test_matches_oracle_on_random_graphs(self):
        rng = random.Random(101)
        for _ in range(60):
            g = random_graph(rng)
            mask = np.array([rng.random() < 0.3 for _ in range(g.node_count)])
            part = connected_components(g, mask)
            expected = components_oracle(g, mask)
            got = {}
            for v, c in enumerate(part.component_id.tolist()):
                if c >= 0:
                    got.setdefault(c, set()).add(v)
            assert sorted(map(frozenset, got.values()), key=sorted) == sorted(
                map(frozenset, expected), key=sorted
            )
            sizes = sorted(part.sizes.tolist())
            assert sizes == sorted(len(c) for c in expected)
            assert pairwise_connectivity(g, mask) == sigma_oracle(g, mask)

    def test_empty_and_fully_masked(self):
        g = path(3)
        mask = np.ones(3, dtype=bool)
        part = connected_components(g, mask)
        assert part.num_components == 0
        assert pairwise_connectivity(g, mask) == 0


class TestDegreesAndCores:
    def test_degrees_basic(self):
        assert degrees(star(5)).tolist() == [4, 1, 1, 1, 1]

    def test_degrees_masked(self):
        g = star(5)
        mask = new_mask(g)
        mask[1] = True
        assert degrees(g, mask).tolist() == [3, 0, 1, 1, 1]

    def test_core_examples(self):
        assert core_decomposition(complete(4)).tolist() == [3, 3, 3, 3]
        assert core_decomposition(path(5)).tolist() == [1, 1, 1, 1, 1]
        tri_tail = load_edge_list("a b\nb c\nc a\nc d")
        assert core_decomposition(tri_tail).tolist() == [2, 2, 2, 1]

    def test_core_matches_oracle(self):
        rng = random.Random(55)
        for _ in range(60):
            g = random_graph(rng)
            assert np.array_equal(core_decomposition(g), coreness_oracle(g))
            mask = np.array([rng.random() < 0.25 for _ in range(g.node_count)])
            assert np.array_equal(core_decomposition(g, mask), coreness_oracle(g, mask))


class TestCentralities:
    def test_betweenness_path(self):
        assert betweenness(path(3)).tolist() == [0.0, 1.0, 0.0]

    def test_betweenness_complete_zero(self):
        assert betweenness(complete(4)).tolist() == [0.0] * 4

    def test_betweenness_matches_oracle(self):
        rng = random.Random(77)
        for _ in range(30):
            g = random_graph(rng, max_nodes=10)
            assert np.allclose(betweenness(g), betweenness_oracle(g), rtol=0, atol=1e-12)

    def test_closeness_two_disconnected_edges(self):
        g = load_edge_list("a b\nc d")
        assert harmonic_closeness(g).tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_closeness_matches_oracle(self):
        rng = random.Random(78)
        for _ in range(30):
            g = random_graph(rng, max_nodes=10)
            assert np.allclose(harmonic_closeness(g), harmonic_closeness_oracle(g), atol=1e-12)

    def test_pagerank_sums_to_one(self):
        rng = random.Random(79)
        for _ in range(20):
            g = random_graph(rng)
            r = pagerank(g)
            assert abs(r.sum() - 1.0) < 1e-6
            assert (r >= 0).all()

    def test_pagerank_uniform_on_symmetric_graphs(self):
        r = pagerank(complete(5))
        assert np.allclose(r, 0.2, atol=1e-9)

    def test_pagerank_matches_linear_system(self):
        rng = random.Random(80)
        for _ in range(20):
            g = random_graph(rng, max_nodes=9)
            n = g.node_count
            d = 0.85
            t = np.zeros((n, n))
            deg = degrees(g)
            for v in range(n):
                if deg[v] == 0:
                    t[:, v] = 1.0 / n
                else:
                    t[g.neighbors(v), v] = 1.0 / deg[v]
            expected = np.linalg.solve(np.eye(n) - d * t, np.full(n, (1 - d) / n))
            assert np.allclose(pagerank(g), expected, atol=1e-6)

    def test_pagerank_isolated_plus_edge(self):
        g = load_edge_list("a b\nc c")
        r = pagerank(g)
        assert abs(r.sum() - 1.0) < 1e-6
        assert r[0] == r[1]
        assert r[2] < r[0]

    def test_eigenvector_star(self):
        x = eigenvector_centrality(star(5))
        assert x[0] > x[1]
        assert np.all(x[1:] == x[1])
        assert (x >= 0).all()

    def test_eigenvector_uniform_on_complete(self):
        x = eigenvector_centrality(complete(4))
        assert np.allclose(x, 0.5, atol=1e-9)

    def test_eigenvector_edgeless_uniform(self):
        g = Graph.from_edges([], node_count=4)
        assert np.allclose(eigenvector_centrality(g), 0.5)


class TestKhopAndClustering:
    def test_khop_path(self):
        g = path(5)
        assert khop_counts(g, 1).tolist() == [1, 2, 2, 2, 1]
        assert khop_counts(g, 2).tolist() == [2, 3, 4, 3, 2]
        assert khop_counts(g, 4).tolist() == [4, 4, 4, 4, 4]

    def test_khop_bounds(self):
        g = path(3)
        for bad in (0, 5, -1):
            with pytest.raises(ValueError):
                khop_counts(g, bad)

    def test_khop_matches_oracle(self):
        rng = random.Random(88)
        for _ in range(40):
            g = random_graph(rng)
            for k in (1, 2, 3, 4):
                assert np.array_equal(khop_counts(g, k), khop_oracle(g, k))

    def test_clustering_triangle_and_path(self):
        tri = complete(3)
        assert clustering_coefficients(tri).tolist() == [1.0, 1.0, 1.0]
        assert clustering_coefficients(path(4)).tolist() == [0.0] * 4

    def test_clustering_matches_oracle(self):
        rng = random.Random(89)
        for _ in range(40):
            g = random_graph(rng)
            assert np.allclose(clustering_coefficients(g), clustering_oracle(g), atol=1e-12)


class TestPermutationEquivariance:
    # all metric vectors must relabel bit-exactly with the nodes

    METRICS = [
        lambda g: degrees(g).astype(float),
        lambda g: core_decomposition(g).astype(float),
        betweenness,
        harmonic_closeness,
        pagerank,
        eigenvector_centrality,
        lambda g: khop_counts(g, 2).astype(float),
        lambda g: khop_counts(g, 3).astype(float),
        clustering_coefficients,
    ]

    def test_exact_equivariance(self):
        rng = random.Random(90)
        for _ in range(25):
            g = random_graph(rng, max_nodes=10)
            perm = list(range(g.node_count))
            rng.shuffle(perm)
            h = permute_graph(g, perm)
            for fn in self.METRICS:
                orig = fn(g)
                moved = fn(h)
                relabeled = np.empty_like(orig)
                for v in range(g.node_count):
                    relabeled[perm[v]] = orig[v]
                assert np.array_equal(relabeled, moved), fn


class TestAncOracleHelper:
    def test_oracle_sanity_on_star(self):
        g = star(5)
        # removing the hub drops connectivity to zero immediately
        assert anc_oracle(g, [0]) == 0.0
        assert anc_oracle(g, [1]) == pytest.approx((6 / 10))
