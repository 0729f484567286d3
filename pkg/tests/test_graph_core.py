import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppgsl import graph_core as gc
from ppgsl.graph_core import Graph, GraphFormatError
from ppgsl.seeding import stream


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def graph_equal(a: Graph, b: Graph):
    return (a.n == b.n and (a.adjacency != b.adjacency).nnz == 0
            and np.array_equal(a.features, b.features)
            and (a.labels is None) == (b.labels is None)
            and (a.labels is None or np.array_equal(a.labels, b.labels)))


@st.composite
def random_graphs(draw, max_n=12):
    n = draw(st.integers(2, max_n))
    m = n * (n - 1) // 2
    mask = draw(st.lists(st.booleans(), min_size=m, max_size=m))
    weights = draw(st.lists(st.sampled_from([1.0, 0.25, 0.5, 1 / 3, 0.1]),
                            min_size=m, max_size=m))
    i, j = np.triu_indices(n, k=1)
    keep = np.array(mask, dtype=bool)
    return Graph.from_edges(n, np.stack([i, j], 1)[keep], np.array(weights)[keep])


# ---------------------------------------------------------------- Graph


def test_graph_invariants():
    g = Graph.from_edges(4, [[2, 0], [0, 2], [1, 3]], [0.5, 0.5, 1.0])
    a = g.adjacency.toarray()
    assert np.array_equal(a, a.T) and np.all(np.diag(a) == 0)
    assert g.num_edges == 2 and a[0, 2] == 0.5
    with pytest.raises(ValueError):
        Graph.from_edges(3, [[1, 1]])
    with pytest.raises(ValueError):
        Graph.from_edges(3, [[0, 3]])
    with pytest.raises(ValueError):
        Graph.from_edges(3, [[0, 1]], [1.5])
    with pytest.raises(ValueError):
        Graph.from_edges(3, [[0, 1]], features=np.zeros((2, 1)))


# ---------------------------------------------------------------- load / save


def test_load_simple(tmp_path):
    g = gc.load_graph(write(tmp_path, "e.tsv", "0\t1\t1.0\n1\t2\t1.0\n"))
    assert g.n == 3 and g.num_edges == 2


def test_load_whitespace_and_default_weight(tmp_path):
    g = gc.load_graph(write(tmp_path, "e.tsv", "# comment\n0 1 1.0\n1 2\n"))
    assert g.num_edges == 2 and g.adjacency[1, 2] == 1.0


def test_load_rejects_self_loop(tmp_path):
    with pytest.raises(GraphFormatError, match=r":1: self-loop"):
        gc.load_graph(write(tmp_path, "e.tsv", "0\t0\t1.0\n"))


def test_load_merges_reversed_lines(tmp_path):
    g = gc.load_graph(write(tmp_path, "e.tsv", "0\t1\t0.5\n1\t0\t0.5\n"))
    assert g.num_edges == 1 and g.adjacency[0, 1] == 0.5


def test_load_errors_report_line(tmp_path):
    with pytest.raises(GraphFormatError, match=r":2:"):
        gc.load_graph(write(tmp_path, "a.tsv", "0\t1\n0\tx\n"))
    with pytest.raises(GraphFormatError, match=r":2: inconsistent"):
        gc.load_graph(write(tmp_path, "b.tsv", "0\t1\t0.5\n1\t0\t0.7\n"))
    with pytest.raises(GraphFormatError, match="out of range"):
        gc.load_graph(write(tmp_path, "c.tsv", "# nodes 2\n0\t5\n"))
    with pytest.raises(GraphFormatError, match=r":1: weight"):
        gc.load_graph(write(tmp_path, "d.tsv", "0\t1\t2.0\n"))


def test_load_feature_row_mismatch(tmp_path):
    e = write(tmp_path, "e.tsv", "0\t1\n1\t2\n")
    f = write(tmp_path, "f.csv", "1,0\n0,1\n")
    with pytest.raises(GraphFormatError, match="feature rows"):
        gc.load_graph(e, feature_path=f)


def test_load_with_id_map(tmp_path):
    e = write(tmp_path, "e.tsv", "paperA\tpaperC\n")
    ids = write(tmp_path, "ids.txt", "paperA\npaperB\npaperC\n")
    g = gc.load_graph(e, id_map_path=ids)
    assert g.n == 3 and g.adjacency[0, 2] == 1.0


def test_save_empty_graph(tmp_path):
    g = Graph.from_edges(5, np.zeros((0, 2)))
    p = tmp_path / "g.tsv"
    gc.save_graph(g, p)
    h = gc.load_graph(p)
    assert h.n == 5 and h.num_edges == 0


def test_save_round_trip_weights_and_sidecars(tmp_path):
    g = Graph.from_edges(4, [[0, 1], [2, 3]], [0.25, 1 / 3],
                         features=np.array([[0.1], [2.0], [-3.5], [1e-17]]),
                         labels=[0, 1, 1, 0])
    p = tmp_path / "g.tsv"
    gc.save_graph(g, p)
    assert graph_equal(gc.load_graph_with_sidecars(p), g)


@settings(max_examples=40, deadline=None)
@given(random_graphs())
def test_round_trip_property(tmp_path_factory, g):
    p = tmp_path_factory.mktemp("rt") / "g.tsv"
    gc.save_graph(g, p)
    assert graph_equal(gc.load_graph(p), g)


def test_splits_round_trip(tmp_path):
    g = gc.generate_sbm([20, 20], 0.3, 0.05, seed=1)
    vis, s = gc.prepare_experiment(g, seed=2)
    p = tmp_path / "s.txt"
    gc.save_splits(s, p)
    r = gc.load_splits(p, g.n)
    for name in ("sensitive", "eval_negatives", "util_test_pos", "util_test_neg",
                 "train_nodes", "test_nodes"):
        assert np.array_equal(getattr(r, name), getattr(s, name)), name


def test_splits_bad_section(tmp_path):
    with pytest.raises(GraphFormatError, match="unknown section"):
        gc.load_splits(write(tmp_path, "s.txt", "[oops]\n0\t1\n"), 3)


# ---------------------------------------------------------------- generators


def test_er_forced_edge():
    g = gc.generate_erdos_renyi(2, 1, seed=0)
    assert g.num_edges == 1 and g.features.shape == (2, 0)


def test_er_edge_count_statistics():
    n, d = 1000, 10
    m = n * (n - 1) // 2
    p = d / (n - 1)
    counts = [gc.generate_erdos_renyi(n, d, seed=s).num_edges for s in range(30)]
    sigma = math.sqrt(m * p * (1 - p))
    # the mean of 30 draws has standard error sigma / sqrt(30)
    assert abs(np.mean(counts) - m * p) < 3 * sigma / math.sqrt(30)


def test_er_invalid():
    with pytest.raises(ValueError):
        gc.generate_erdos_renyi(10, 0, seed=0)
    with pytest.raises(ValueError):
        gc.generate_erdos_renyi(1, 0.5, seed=0)


def test_sbm_forced_triangles():
    g = gc.generate_sbm([3, 3], 1.0, 0.0, seed=0)
    want = {(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)}
    assert {tuple(e) for e in g.edges()[0].tolist()} == want
    assert g.labels.tolist() == [0, 0, 0, 1, 1, 1]


def test_sbm_intra_count_statistics():
    m_in = 2 * (100 * 99 // 2)
    counts = []
    for s in range(30):
        g = gc.generate_sbm([100, 100], 0.1, 0.01, seed=s)
        pairs, _ = g.edges()
        counts.append(int(np.sum(g.labels[pairs[:, 0]] == g.labels[pairs[:, 1]])))
    sigma = math.sqrt(m_in * 0.1 * 0.9)
    assert abs(np.mean(counts) - 990) < 3 * sigma / math.sqrt(30)


def test_sbm_block_features_and_errors():
    g = gc.generate_sbm([2, 3], 0.5, 0.5, seed=0, with_features=True)
    assert g.features.shape == (5, 2)
    assert np.array_equal(g.features.argmax(1), g.labels)
    with pytest.raises(ValueError):
        gc.generate_sbm([3, 3], 2.0, 0.0, seed=0)


def test_generators_deterministic():
    assert graph_equal(gc.generate_sbm([30, 30], 0.2, 0.02, 5), gc.generate_sbm([30, 30], 0.2, 0.02, 5))
    assert graph_equal(gc.generate_erdos_renyi(300, 4, 5), gc.generate_erdos_renyi(300, 4, 5))


def test_triu_decode_matches_numpy():
    for n in (2, 3, 7, 50, 1001):
        i, j = np.triu_indices(n, k=1)
        di, dj = gc.triu_decode(np.arange(len(i)), n)
        assert np.array_equal(di, i) and np.array_equal(dj, j)


# ---------------------------------------------------------------- masking and sampling


def test_mask_ten_edges():
    g = gc.generate_erdos_renyi(30, 0.7, seed=0)
    pairs, _ = g.edges()
    g = g.with_edges(pairs[:10])
    vis, s = gc.mask_sensitive(g, 0.1, seed=3)
    assert len(s.sensitive) == 1 and vis.num_edges == 9


def test_mask_complete_graph_errors():
    i, j = np.triu_indices(4, k=1)
    k4 = Graph.from_edges(4, np.stack([i, j], 1))
    with pytest.raises(ValueError, match="non-adjacent"):
        gc.mask_sensitive(k4, 0.1, seed=0)


def test_mask_deterministic_and_fraction_checked():
    g = gc.generate_sbm([30, 30], 0.3, 0.05, seed=0)
    a = gc.mask_sensitive(g, 0.1, seed=9)[1]
    b = gc.mask_sensitive(g, 0.1, seed=9)[1]
    assert np.array_equal(a.sensitive, b.sensitive)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            gc.mask_sensitive(g, bad, seed=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.05, 0.5))
def test_mask_invariants(seed, frac):
    g = gc.generate_sbm([15, 15], 0.4, 0.1, seed=seed % 7)
    vis, s = gc.mask_sensitive(g, frac, seed)
    assert len(s.sensitive) == math.floor(frac * g.num_edges)
    assert len(s.eval_negatives) == len(s.sensitive)
    assert not vis.has_edges(s.sensitive).any()
    assert g.has_edges(s.sensitive).all()
    assert not g.has_edges(s.eval_negatives).any()
    s.validate(vis)


def test_utility_splits_invariants():
    g = gc.generate_sbm([50, 50], 0.2, 0.02, seed=4)
    vis, s = gc.prepare_experiment(g, seed=4)
    s.validate(vis)
    n_vis_before = g.num_edges - len(s.sensitive)
    assert len(s.util_test_pos) == math.floor(0.1 * g.num_edges)
    assert vis.num_edges == n_vis_before - len(s.util_test_pos)
    # test positives are real edges hidden from the released input; negatives never were edges
    assert g.has_edges(s.util_test_pos).all() and not vis.has_edges(s.util_test_pos).any()
    assert not g.has_edges(s.util_test_neg).any()
    assert len(s.train_nodes) == 30 and len(s.train_nodes) + len(s.test_nodes) == g.n


def test_sample_negative_path_graph():
    g = Graph.from_edges(3, [[0, 1], [1, 2]])
    assert gc.sample_negative_pairs(g, 1, seed=0).tolist() == [[0, 2]]
    with pytest.raises(ValueError):
        gc.sample_negative_pairs(g, 2, seed=0)


def test_sample_negative_excludes_and_is_deterministic():
    g = gc.generate_erdos_renyi(40, 5, seed=1)
    ex = gc.sample_negative_pairs(g, 50, seed=1)
    got = gc.sample_negative_pairs(g, 100, exclude=[ex], seed=2)
    assert np.array_equal(got, gc.sample_negative_pairs(g, 100, exclude=[ex], seed=2))
    keys = gc.pair_keys(got, g.n)
    assert len(np.unique(keys)) == 100
    assert not g.has_edges(got).any()
    assert not np.isin(keys, gc.pair_keys(ex, g.n)).any()


def test_sample_pairs_rejection_path():
    """Above the enumeration threshold the rejection sampler is used."""
    n = 3000
    forbidden = np.sort(np.array([0 * n + 1, 5 * n + 9], dtype=np.int64))
    got = gc.sample_pairs_excluding(n, 5000, forbidden, stream(0, "t"))
    keys = gc.pair_keys(got, n)
    assert len(np.unique(keys)) == 5000 and not np.isin(keys, forbidden).any()
    assert (got[:, 0] < got[:, 1]).all()


# ---------------------------------------------------------------- normalization


def test_normalize_single_edge():
    a = gc.normalize_adjacency(Graph.from_edges(2, [[0, 1]]))
    np.testing.assert_allclose(a, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_normalize_isolated_and_triangle():
    g = Graph.from_edges(4, [[0, 1], [1, 2], [0, 2]])
    a = gc.normalize_adjacency(g)
    np.testing.assert_allclose(a[:3, :3], np.full((3, 3), 1 / 3), atol=1e-15)
    assert a[3, 3] == 1.0


def test_normalize_regular_rows_sum_to_one():
    n = 10
    ring = Graph.from_edges(n, [[i, (i + 1) % n] for i in range(n)])
    np.testing.assert_allclose(gc.normalize_adjacency(ring).sum(1), 1.0, atol=1e-14)


def test_normalize_negative_rejected():
    with pytest.raises(ValueError):
        gc.normalize_adjacency(np.array([[0.0, -1.0], [-1.0, 0.0]]))


@settings(max_examples=30, deadline=None)
@given(random_graphs(max_n=9))
def test_sparse_propagation_matches_dense(g):
    wp = gc.as_weighted_pairs(g)
    a_hat, _ = gc.gcn_propagation(g.n, wp.pairs, wp.weights)
    dense = gc.normalize_adjacency(g)
    np.testing.assert_allclose(a_hat.toarray(), dense, atol=1e-14)
    np.testing.assert_allclose(dense, dense.T, atol=0)


def test_node_features_fallbacks():
    g = gc.generate_erdos_renyi(50, 3, seed=0)
    x = gc.node_features(g)
    assert x.shape == (50, 50) and (x != gc.sp.identity(50)).nnz == 0
    big = gc.generate_erdos_renyi(gc.IDENTITY_FEATURE_MAX_N + 1, 2, seed=0)
    xb = gc.node_features(big)
    assert xb.shape == (big.n, gc.DEGREE_BUCKETS)
    np.testing.assert_array_equal(xb.sum(1), 1.0)
    with_f = gc.generate_sbm([3, 3], 1, 0, 0, with_features=True)
    assert gc.node_features(with_f) is with_f.features
