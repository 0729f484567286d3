import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppgsl import graph_core as gc
from ppgsl import graph_learner as gl
from ppgsl import numkit as nk
from ppgsl import surrogate_attack as sa
from ppgsl.graph_core import DataSplits, Graph


def setup(n=30, seed=0, blocks=None):
    g = gc.generate_sbm(blocks or [n // 2, n - n // 2], 0.4, 0.05, seed=seed)
    return gc.mask_sensitive(g, 0.1, seed)


def splits_with(sensitive, n=None):
    sensitive = np.asarray(sensitive, dtype=np.int64).reshape(-1, 2)
    return DataSplits(sensitive, sensitive.copy())


# ---------------------------------------------------------------- candidates


def test_k_zero_means_deletions_only():
    g, s = setup()
    p = gl.init_learner(g, s, k=0.0)
    assert len(p.candidates.pairs) == g.num_edges
    assert g.has_edges(p.candidates.pairs).all()


def test_k_one_doubles_candidates():
    g = gc.generate_erdos_renyi(60, 100 * 2 / 60 + 1, seed=1)
    pairs, _ = g.edges()
    g = g.with_edges(pairs[:100])
    p = gl.init_learner(g, splits_with(np.zeros((0, 2))), k=1.0, seed=3)
    assert len(p.candidates.pairs) == 200
    keys = gc.pair_keys(p.candidates.pairs, g.n)
    assert len(np.unique(keys)) == 200


def test_k_too_large():
    g = Graph.from_edges(4, [[0, 1], [1, 2]])
    with pytest.raises(ValueError, match="candidate"):
        gl.init_learner(g, splits_with([[0, 3]]), k=10.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.sampled_from([0.0, 0.5, 1.0, 2.0]))
def test_candidates_exclude_sensitive(seed, k):
    g, s = setup(seed=seed % 5)
    p = gl.init_learner(g, s, k=k, seed=seed)
    c = p.candidates.pairs
    assert (c[:, 0] < c[:, 1]).all()
    assert not np.isin(gc.pair_keys(c, g.n), gc.pair_keys(s.sensitive, g.n)).any()
    # every visible edge is a candidate exactly once
    edge_keys = g.edge_keys
    cand_keys = gc.pair_keys(c, g.n)
    assert np.isin(edge_keys, cand_keys).all() and len(np.unique(cand_keys)) == len(cand_keys)


def test_fgp_candidates_are_all_non_sensitive_pairs():
    g, s = setup(n=12)
    p = gl.init_learner(g, s, mode="fgp")
    assert len(p.candidates.pairs) == 12 * 11 // 2 - len(s.sensitive)
    assert p.theta.shape == (12, 12)


# ---------------------------------------------------------------- materialize


def fgp_params(theta):
    theta = np.asarray(theta, dtype=np.float64)
    n = theta.shape[0]
    i, j = np.triu_indices(n, k=1)
    cand = gl.CandidateEdgeSet("fgp", n, np.stack([i, j], 1))
    return gl.LearnerParams(theta, cand, np.zeros(len(i)))


def test_materialize_examples():
    a = gl.materialize(fgp_params([[0, 1.4], [0.0, 0]]))
    assert a[0, 1] == pytest.approx(0.7) and a[1, 0] == pytest.approx(0.7)
    a = gl.materialize(fgp_params([[0, -0.5], [0.1, 0]]))
    assert a[0, 1] == 0.0
    th = np.array([[0, 0.3, 0.9], [0.3, 0, 0.0], [0.9, 0.0, 0]])
    assert np.array_equal(gl.materialize(fgp_params(th)), th)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**31))
def test_materialize_invariants(n, seed):
    rng = np.random.default_rng(seed)
    pool = np.array([1e6, -1e6, 0.0, 1.0])
    th = rng.normal(scale=3, size=(n, n))
    mask = rng.random((n, n)) < 0.3
    th[mask] = rng.choice(pool, size=mask.sum())
    a = gl.materialize(fgp_params(th))
    assert np.array_equal(a, a.T) and np.all(np.diag(a) == 0)
    assert a.min() >= 0 and a.max() <= 1


def test_warm_start_reproduces_input():
    g, s = setup()
    for mode in gl.MODES:
        p = gl.init_learner(g, s, mode=mode, k=1.0)
        a = gl.materialize(p)
        dense = a.toarray() if hasattr(a, "toarray") else a
        assert np.array_equal(dense, g.dense())


# ---------------------------------------------------------------- losses


def zero_ip(d):
    m = sa.init_model(d, (4, 3), "inner_product", np.random.default_rng(0))
    m.encoder.W2[:] = 0
    return m


def test_privacy_loss_half_predictions():
    g = Graph.from_edges(4, [[0, 1], [2, 3]])
    assert gl.privacy_loss(zero_ip(4), g, None, [[0, 2], [1, 3]]) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        gl.privacy_loss(zero_ip(4), g, None, np.zeros((0, 2)))


def test_privacy_loss_vanishes_for_confident_nonedges():
    g = Graph.from_edges(3, [[0, 1]])
    m = sa.init_model(3, (3, 2), "inner_product", np.random.default_rng(0))
    # make z_0 and z_2 large and anti-aligned
    m.encoder.W1 = np.eye(3)
    m.encoder.W2 = np.array([[30.0, 0], [0, 0], [-30.0, 0]])
    assert gl.privacy_loss(m, g, None, [[0, 2]]) < 1e-6


def test_utility_loss_examples():
    a = np.array([[0, 1.0], [1.0, 0]])
    assert gl.utility_loss(a, a) == 0
    assert gl.utility_loss(a, np.zeros((2, 2))) == 2.0
    b = np.zeros((3, 3))
    c = b.copy()
    c[0, 2] = c[2, 0] = 0.5
    assert gl.utility_loss(b, c) == 0.5
    assert gl.utility_loss(gc.sp.csr_matrix(b), gc.sp.csr_matrix(c)) == 0.5
    with pytest.raises(ValueError):
        gl.utility_loss(np.zeros((2, 2)), np.zeros((3, 3)))


def test_learner_loss_combination():
    g = Graph.from_edges(4, [[0, 1], [2, 3]])
    a = g.dense()
    a_prime = a.copy()
    a_prime[0, 1] = a_prime[1, 0] = 0.0
    m = zero_ip(4)
    # the privacy term is ln 2 regardless of the graph for this model
    got = gl.learner_loss(m, a, a_prime, None, [[0, 2]], 0.005)
    assert got == pytest.approx(math.log(2) + 0.005 * 2)
    assert got == pytest.approx(0.703147, abs=1e-6)
    assert gl.learner_loss(m, a, a_prime, None, [[0, 2]], 0.0) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        gl.learner_loss(m, a, a, None, [[0, 2]], -1.0)


# ---------------------------------------------------------------- gradients


def interior_params(mode, seed=0, n=10):
    g = gc.generate_sbm([n // 2, n - n // 2], 0.6, 0.2, seed=seed)
    g, s = gc.mask_sensitive(g, 0.2, seed)
    p = gl.init_learner(g, s, mode=mode, k=1.0, seed=seed)
    rng = np.random.default_rng(seed)
    # strictly inside (0, 1) after symmetrization so the clip is inactive
    p.theta = rng.uniform(0.25, 0.75, size=p.theta.shape)
    if mode == "fgp":
        np.fill_diagonal(p.theta, 0)
    return g, s, p


@pytest.mark.parametrize("mode", gl.MODES)
@pytest.mark.parametrize("head", sa.HEADS)
def test_learner_grad_matches_finite_differences(mode, head):
    g, s, p = interior_params(mode, seed=2)
    x = np.random.default_rng(1).normal(size=(g.n, 4))
    m = sa.init_model(4, (5, 3), head, np.random.default_rng(4))
    alpha = 0.3
    grad, _ = gl.learner_grad(m, p, x, s.sensitive, alpha)
    orig = p.theta.copy()

    def f(th):
        p.theta = th
        a_prime = gl.materialize(p)
        return gl.learner_loss(m, g.dense(), a_prime, x, s.sensitive, alpha)

    fd = nk.finite_diff_grad(f, orig.copy())
    p.theta = orig
    if mode == "fgp":
        # the diagonal and the sensitive entries are not candidates
        mask = np.zeros_like(orig, dtype=bool)
        c = p.candidates.pairs
        mask[c[:, 0], c[:, 1]] = mask[c[:, 1], c[:, 0]] = True
        assert np.all(fd[~mask] == 0) and np.all(grad[~mask] == 0)
    assert nk.max_rel_error(grad, fd) < 1e-4


def test_learner_grad_loss_parts_agree_with_losses():
    g, s, p = interior_params("sparse", seed=5)
    m = sa.init_model(g.n, (5, 3), "cosine", np.random.default_rng(0))
    _, parts = gl.learner_grad(m, p, None, s.sensitive, 0.1)
    a_prime = gl.materialize(p)
    assert parts.privacy == pytest.approx(gl.privacy_loss(m, a_prime, None, s.sensitive), rel=1e-12)
    assert parts.utility == pytest.approx(gl.utility_loss(g.dense(), a_prime.toarray()), rel=1e-12)


def test_pure_utility_gradient():
    g, s, p = interior_params("fgp", seed=3)
    m = sa.init_model(g.n, (4, 3), "cosine", np.random.default_rng(0))
    alpha = 0.02
    grad, _ = gl.learner_grad(m, p, None, s.sensitive, alpha, privacy_weight=0.0)
    a_prime = gl.materialize(p)
    c = p.candidates.pairs
    want = 2 * alpha * (a_prime - g.dense())
    np.testing.assert_allclose(grad[c[:, 0], c[:, 1]], want[c[:, 0], c[:, 1]], atol=1e-15)
    # sparse mode moves the whole pair weight, which appears twice in the distortion
    g, s, p = interior_params("sparse", seed=3)
    grad, _ = gl.learner_grad(m, p, None, s.sensitive, alpha, privacy_weight=0.0)
    np.testing.assert_allclose(grad, 4 * alpha * (gl.candidate_weights(p) - p.original), atol=1e-15)


def test_grad_zero_at_unreachable_candidates():
    # component {3, 4} is unreachable from the sensitive pair (0, 2)
    g = Graph.from_edges(5, [[0, 1], [1, 2], [3, 4]])
    s = splits_with([[0, 2]])
    p = gl.init_learner(g, s, k=0.0)
    m = sa.init_model(5, (4, 3), "cosine", np.random.default_rng(1))
    grad, _ = gl.learner_grad(m, p, None, s.sensitive, 0.0)
    idx = int(np.flatnonzero((p.candidates.pairs == [3, 4]).all(1))[0])
    assert grad[idx] == 0
    assert np.abs(grad).max() > 0


def test_negative_alpha_rejected():
    g, s, p = interior_params("sparse")
    m = sa.init_model(g.n, (4, 3), "cosine", np.random.default_rng(0))
    with pytest.raises(ValueError):
        gl.learner_grad(m, p, None, s.sensitive, -0.1)


# ---------------------------------------------------------------- discretize


def test_discretize_extremes():
    g, _ = setup()
    assert (gl.discretize(g.dense(), 3).graph.adjacency != g.adjacency).nnz == 0
    assert gl.discretize(np.zeros((5, 5)), 3).graph.num_edges == 0


def test_discretize_binomial():
    n_pairs = 1000
    wp = gc.WeightedPairs(2000, np.stack([np.arange(0, 2000, 2), np.arange(1, 2000, 2)], 1),
                          np.full(n_pairs, 0.5))
    counts = np.array([gl.discretize(wp, s).graph.num_edges for s in range(50)])
    sigma = math.sqrt(n_pairs * 0.25)
    assert np.mean(np.abs(counts - 500) <= 3 * sigma) >= 0.95
    assert abs(counts.mean() - 500) < 3 * sigma / math.sqrt(len(counts))


def test_discretize_deterministic_symmetric():
    rng = np.random.default_rng(0)
    a = np.triu(rng.random((20, 20)), 1)
    a = a + a.T
    p1, p2 = gl.discretize(a, 9).graph, gl.discretize(a, 9).graph
    assert (p1.adjacency != p2.adjacency).nnz == 0
    d = p1.dense()
    assert np.array_equal(d, d.T) and set(np.unique(d)) <= {0.0, 1.0}
    with pytest.raises(ValueError):
        gl.discretize(2 * a, 0)


def test_expected_edge_count_matches_weight_sum():
    rng = np.random.default_rng(1)
    a = np.triu(rng.random((30, 30)), 1)
    a = a + a.T
    counts = [gl.discretize(a, s).graph.num_edges for s in range(200)]
    mean_w = np.triu(a, 1).sum()
    var = np.sum(np.triu(a, 1) * (1 - np.triu(a, 1)))
    assert abs(np.mean(counts) - mean_w) < 3 * math.sqrt(var / 200)


def test_published_graph_save(tmp_path):
    g, _ = setup()
    pub = gl.discretize(g.dense(), 0, template=g, provenance={"seed": 0})
    pub.save(tmp_path / "p.tsv")
    assert (tmp_path / "p.tsv.provenance.json").exists()
    assert gc.load_graph(tmp_path / "p.tsv").num_edges == g.num_edges
