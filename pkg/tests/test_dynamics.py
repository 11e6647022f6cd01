import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from sbmgnn import dynamics as dyn
from sbmgnn.readout import overlap
from sbmgnn.sbm import Graph, PlantedPartition, params_from_degree_eps, sample_graph


def _graph(n=400, c=8.0, eps=0.3, seed=0):
    return sample_graph(params_from_degree_eps(n, c, eps), seed)


def _cliques(m):
    i, j = np.triu_indices(m, 1)
    return Graph.from_edges(2 * m, np.concatenate([i, i + m]), np.concatenate([j, j + m]))


def test_init_state_contract():
    a = dyn.init_state(4, 2, 7)
    assert np.array_equal(a, dyn.init_state(4, 2, 7))
    big = dyn.init_state(1000, 1000, 1)
    assert abs(big.mean()) < 0.01
    assert big.min() >= -1.0 and big.max() < 1.0


def test_weights_contract():
    w = dyn.sample_weights(100, 100, 3)
    assert w.weights.shape == (100, 100, 100)
    assert abs(w.weights.mean()) < 0.001
    for t in (0, 50, 99):
        assert abs(w.weights[t].var() - 0.01) < 0.15 * 0.01
    assert np.array_equal(w.weights, dyn.sample_weights(100, 100, 3).weights)


def test_empty_graph_gives_zero():
    g = Graph.from_edges(6, np.array([], np.int64), np.array([], np.int64))
    x = dyn.forward_untrained(g, dyn.init_state(6, 3, 0), dyn.sample_weights(3, 2, 0), 2)
    assert np.all(x == 0)


def test_single_edge_hand_value():
    g = Graph.from_edges(2, np.array([0]), np.array([1]))
    x0 = np.array([[0.3], [-0.8]])
    x = dyn.forward_untrained(g, x0, dyn.WeightStack(np.ones((1, 1, 1))), 1)
    assert x[0, 0] == np.tanh(-0.8) and x[1, 0] == np.tanh(0.3)


def test_general_reduces_bitwise():
    g, _ = _graph()
    x0, w = dyn.init_state(400, 16, 1), dyn.sample_weights(16, 30, 1)
    a = dyn.forward_untrained(g, x0, w, 30)
    b = dyn.forward_general(g, x0, dyn.PropagationConfig("adjacency", "tanh", "identity"), w, 30)
    assert a.tobytes() == b.tobytes()


def test_linear_laplacian_step():
    g, _ = _graph(100, 5.0, 0.5)
    x0 = dyn.init_state(100, 3, 2)
    w = dyn.WeightStack(np.eye(3)[None])
    x = dyn.forward_general(g, x0, dyn.PropagationConfig("normalized-laplacian", "identity"), w, 1)
    deg = g.degrees.astype(float)
    s = np.where(deg > 0, 1 / np.sqrt(np.maximum(deg, 1)), 0.0)
    lap = np.eye(100) - s[:, None] * g.adjacency.toarray() * s[None, :]
    np.testing.assert_allclose(x, lap @ x0, atol=1e-14)


def test_isolated_vertex_rows():
    g = Graph.from_edges(4, np.array([0, 1]), np.array([1, 2]))  # vertex 3 isolated
    x0 = np.ones((4, 2))
    w = dyn.WeightStack(np.eye(2)[None])
    for kind, expect in (("normalized-adjacency", 0.0), ("normalized-laplacian", 1.0)):
        x = dyn.forward_general(g, x0, dyn.PropagationConfig(kind, "identity"), w, 1)
        assert np.isfinite(x).all()
        assert np.all(x[3] == expect)


def test_layer_and_shape_checks():
    g, _ = _graph(20, 3.0)
    with pytest.raises(ValueError):
        dyn.forward_untrained(g, dyn.init_state(20, 4, 0), dyn.sample_weights(4, 2, 0), 3)
    with pytest.raises(ValueError):
        dyn.forward_untrained(g, dyn.init_state(20, 3, 0), dyn.sample_weights(4, 2, 0), 2)
    with pytest.raises(ValueError):
        dyn.PropagationConfig("nonbacktracking")


def test_divergence_reports_layer():
    g = Graph.from_edges(2, np.array([0]), np.array([1]))
    w = dyn.WeightStack(np.full((3, 1, 1), np.inf))
    with pytest.raises(dyn.DivergenceError) as exc:
        dyn.forward_general(g, np.ones((2, 1)), dyn.PropagationConfig(activation="identity"), w, 3)
    assert exc.value.layer == 1


def test_trace_sees_every_layer():
    g, _ = _graph(50, 4.0)
    seen = []
    dyn.forward_untrained(g, dyn.init_state(50, 4, 0), dyn.sample_weights(4, 5, 0), 5,
                          trace=lambda t, x: seen.append(t))
    assert seen == list(range(6))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_boundedness(seed):
    g, _ = _graph(300, 6.0, 0.4, seed)
    d = 8
    w = dyn.sample_weights(d, 10, seed)
    bound = g.degrees.max() * np.abs(w.weights).max(axis=(1, 2)) * d

    def check(t, x):
        if t >= 1:
            assert np.abs(x).max() <= bound[t - 1]

    dyn.forward_untrained(g, dyn.init_state(300, d, seed), w, 10, trace=check)


def test_equivariance():
    g, _ = _graph(300, 6.0, 0.3, 4)
    perm = np.random.default_rng(0).permutation(300)
    x0 = dyn.init_state(300, 6, 1)
    w = dyn.sample_weights(6, 10, 1)
    x = dyn.forward_untrained(g, x0, w, 10)
    x0p = np.empty_like(x0)
    x0p[perm] = x0
    xp = dyn.forward_untrained(g.permuted(perm), x0p, w, 10)
    # reordered neighbor sums differ only by float rounding
    np.testing.assert_allclose(xp[perm], x, rtol=1e-10, atol=1e-10)


def test_power_iteration_matches_dense_eigensolver():
    g, _ = _graph(200, 20.0, 0.1, 2)
    m = dyn.build_propagation(g, "normalized-adjacency").toarray()
    vals, vecs = np.linalg.eigh(m)
    top = vecs[:, np.argsort(-np.abs(vals))[:2]]
    x = dyn.power_iteration(g, 2, 200, 0)
    assert np.max(scipy.linalg.subspace_angles(x, top)) < 1e-6


def test_power_iteration_orthonormal_every_step():
    g, _ = _graph(500, 8.0, 0.3, 1)
    worst = []
    dyn.power_iteration(g, 2, 100, 0,
                        callback=lambda t, x: worst.append(np.abs(x.T @ x - np.eye(2)).max()))
    assert max(worst) < 1e-10


def test_orthonormalize_reseeds_degenerate_columns():
    z = np.ones((10, 2))
    q = dyn._orthonormalize(z, np.random.default_rng(0))
    np.testing.assert_allclose(q.T @ q, np.eye(2), atol=1e-12)


def test_spectral_two_cliques():
    g = _cliques(50)
    pred = dyn.spectral_partition(g, 2, 50, 0)
    assert overlap(pred, PlantedPartition.balanced(100)) == 1.0


def test_spectral_detectable_regime():
    g, planted = _graph(2000, 8.0, 0.1, 0)
    assert overlap(dyn.spectral_partition(g, 2, 300, 0), planted) > 0.9


def test_group_mean_state_examples():
    p = PlantedPartition.balanced(6)
    v = np.array([1.5, -2.0, 0.25])
    assert np.array_equal(dyn.group_mean_state(np.tile(v, (6, 1)), p).means, np.vstack([v, v]))
    x = np.where(p.labels[:, None] == 0, 1.0, -1.0)
    assert np.array_equal(dyn.group_mean_state(x, p).means, [[1.0], [-1.0]])
    x = np.random.default_rng(1).normal(size=(6, 3))
    means = dyn.group_mean_state(x, p).means
    np.testing.assert_allclose(means[0], x[:3].sum(0) / 3, rtol=0, atol=1e-15)
    np.testing.assert_allclose(means[1], x[3:].sum(0) / 3, rtol=0, atol=1e-15)


def test_empirical_covariance_examples():
    r = np.random.default_rng(2).normal(size=5)
    c = dyn.empirical_covariance(dyn.GroupState(np.vstack([r, r])))
    assert c.c11 == c.c12
    c = dyn.empirical_covariance(dyn.GroupState(np.vstack([r, -r])))
    assert c.c12 == -c.c11
    m = np.random.default_rng(3).normal(size=(2, 7))
    c = dyn.empirical_covariance(dyn.GroupState(m))
    brute = [[sum(m[a, k] * m[b, k] for k in range(7)) / 7 for b in range(2)] for a in range(2)]
    assert c.c11 == pytest.approx(0.5 * (brute[0][0] + brute[1][1]), rel=1e-14)
    assert c.c12 == pytest.approx(brute[0][1], rel=1e-14)
    with pytest.raises(ValueError):
        dyn.empirical_covariance(dyn.GroupState(np.ones((2, 1))))
