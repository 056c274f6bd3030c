import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import complete_graph
from gradcheck import max_relative_error, random_case
from netscreen.graph import ContactNetwork, generate_erdos_renyi
from netscreen.neural import (
    Adam,
    GcnParams,
    Gradients,
    NormalizedAdjacency,
    StaleCacheError,
    backward,
    forward,
    init_params,
    load_params,
    normalize_adjacency,
    save_params,
    sgd_step,
)


def one_node_params(w=2.0, head=1.0):
    return GcnParams([np.array([[w]])], np.array([head]), (1,), 1)


class TestNormalizeAdjacency:
    def test_k2_selfloops(self):
        np.testing.assert_allclose(normalize_adjacency(complete_graph(2)).dense(), 0.5)

    def test_single_node(self):
        assert normalize_adjacency(ContactNetwork(1)).dense().tolist() == [[1.0]]

    def test_k2_literal(self):
        m = normalize_adjacency(complete_graph(2), "literal").dense()
        assert m.tolist() == [[0.0, 1.0], [1.0, 0.0]]

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            normalize_adjacency(complete_graph(2), "row")

    def test_sparse_matches_dense(self):
        net = generate_erdos_renyi(12, 0.3, 0)
        dense = normalize_adjacency(net)
        sparse = normalize_adjacency(net, dense_limit=0)
        x = np.random.default_rng(0).random((3, 12, 2))
        np.testing.assert_allclose(dense.matmul(x), sparse.matmul(x))
        np.testing.assert_allclose(dense.rmatmul(x), sparse.rmatmul(x))

    @given(st.integers(1, 12), st.floats(0, 1), st.integers(0, 1000))
    def test_selfloop_operator_symmetric_and_contractive(self, n, p, seed):
        net = generate_erdos_renyi(n, p, seed)
        m = normalize_adjacency(net).dense()
        np.testing.assert_allclose(m, m.T, atol=1e-15)
        assert np.all(m >= 0)
        assert np.max(np.abs(np.linalg.eigvalsh(m))) <= 1 + 1e-12


class TestInit:
    def test_deterministic(self):
        a, b = init_params(seed=3), init_params(seed=3)
        for x, y in zip(a.arrays(), b.arrays()):
            assert np.array_equal(x, y)

    def test_default_shapes(self):
        p = init_params((8, 16, 8, 32), 1, 0)
        assert [w.shape for w in p.layers] == [(1, 8), (8, 16), (16, 8), (8, 32)]
        assert p.head.shape == (32,)

    def test_glorot_bounds(self):
        p = init_params((8, 16, 8, 32), 1, 0)
        fan_in = 1
        for w in p.layers:
            bound = math.sqrt(6 / (fan_in + w.shape[1]))
            assert np.all(np.abs(w) <= bound)
            fan_in = w.shape[1]

    def test_empty_sizes(self):
        with pytest.raises(ValueError):
            init_params((), 1, 0)


class TestForward:
    def test_one_node_value(self):
        adj = NormalizedAdjacency(np.array([[1.0]]), "symmetric_selfloops")
        per_node, pooled, _ = forward(one_node_params(), adj, np.array([[0.5]]))
        assert per_node[0] == pytest.approx(0.7310585786300049, abs=1e-12)
        assert pooled == per_node[0]

    def test_zero_head(self):
        adj = normalize_adjacency(complete_graph(3))
        p = init_params((4,), 1, 0)
        p.head[:] = 0
        per_node, _, _ = forward(p, adj, np.ones((3, 1)))
        assert np.all(per_node == 0)

    def test_pooled_is_sum(self, rng):
        params, adj, x, *_ = random_case(rng, batch=4)
        per_node, pooled, _ = forward(params, adj, x)
        np.testing.assert_allclose(pooled, per_node.sum(axis=-1))

    def test_shape_error_names_layer(self):
        p = init_params((4, 3), 2, 0)
        adj = normalize_adjacency(complete_graph(3))
        with pytest.raises(ValueError, match="layer 0"):
            forward(p, adj, np.ones((3, 1)))

    def test_hidden_activations_in_unit_interval(self, rng):
        params, adj, x, *_ = random_case(rng, layer_sizes=(8, 16, 8, 32))
        _, _, cache = forward(params, adj, x)
        for z in cache.acts[1:]:
            assert np.all((z > 0) & (z < 1))

    def test_bit_identical(self, rng):
        params, adj, x, *_ = random_case(rng)
        a = forward(params, adj, x)[0]
        b = forward(params, adj, x)[0]
        assert np.array_equal(a, b)

    def test_batch_matches_single(self, rng):
        params, adj, x, *_ = random_case(rng, batch=3, readout=True, skip=True)
        batched = forward(params, adj, x)[0]
        for i in range(3):
            np.testing.assert_allclose(forward(params, adj, x[i])[0], batched[i])


class TestBackward:
    def test_zero_upstream(self, rng):
        params, adj, x, *_ = random_case(rng)
        _, _, cache = forward(params, adj, x)
        grads = backward(params, cache, np.zeros(x.shape[:-1]))
        assert all(np.all(g == 0) for g in grads.arrays())

    def test_one_node_hand_chain_rule(self):
        adj = NormalizedAdjacency(np.array([[1.0]]), "symmetric_selfloops")
        p = one_node_params()
        _, _, cache = forward(p, adj, np.array([[0.5]]))
        g = backward(p, cache, np.array([1.0]))
        s = 1 / (1 + math.exp(-1.0))
        assert g.layers[0][0, 0] == pytest.approx(s * (1 - s) * 0.5, abs=1e-12)
        assert g.layers[0][0, 0] == pytest.approx(0.09830596, abs=1e-8)

    def test_stale_cache(self, rng):
        params, adj, x, g_node, _ = random_case(rng)
        _, _, cache = forward(params, adj, x)
        with pytest.raises(StaleCacheError):
            backward(params.copy(), cache, g_node)

    @pytest.mark.parametrize("readout,skip", [(False, False), (True, False),
                                              (False, True), (True, True)])
    @pytest.mark.parametrize("batch", [None, 3])
    def test_finite_differences(self, readout, skip, batch):
        rng = np.random.default_rng([int(readout), int(skip), batch or 0])
        for _ in range(5):
            case = random_case(rng, readout=readout, skip=skip, batch=batch)
            assert max_relative_error(*case) <= 1e-4

    def test_finite_differences_default_stack(self):
        rng = np.random.default_rng(8)
        case = random_case(rng, layer_sizes=(8, 16, 8, 32), mode="symmetric_selfloops")
        assert max_relative_error(*case) <= 1e-4


class TestOptimizers:
    def test_sgd_scalar(self):
        p = one_node_params(w=1.0)
        g = Gradients([np.array([[2.0]])], np.array([0.0]))
        assert sgd_step(p, g, 0.005).layers[0][0, 0] == pytest.approx(0.99)

    def test_sgd_zero_lr_and_zero_grad(self, rng):
        params, *_ = random_case(rng, readout=True, skip=True)
        g = Gradients([np.ones_like(w) for w in params.layers], np.ones_like(params.head),
                      np.ones_like(params.readout), np.ones_like(params.skip))
        zero = Gradients([np.zeros_like(w) for w in params.layers], np.zeros_like(params.head),
                         np.zeros_like(params.readout), np.zeros_like(params.skip))
        for out in (sgd_step(params, g, 0.0), sgd_step(params, zero, 0.1)):
            for a, b in zip(out.arrays(), params.arrays()):
                assert np.array_equal(a, b)

    def test_adam_first_step_is_signed_lr(self):
        p = one_node_params(w=1.0)
        g = Gradients([np.array([[3.0]])], np.array([-0.5]))
        out = Adam(p).step(p, g, 0.01)
        assert out.layers[0][0, 0] == pytest.approx(0.99, abs=1e-9)
        assert out.head[0] == pytest.approx(1.01, abs=1e-9)

    def test_adam_decreases_quadratic(self):
        adj = normalize_adjacency(complete_graph(3))
        p = init_params((4,), 1, 0)
        opt = Adam(p)
        x = np.array([[0.2], [0.5], [0.9]])

        def loss(q):
            return float((forward(q, adj, x)[1] - 2.0) ** 2)
        start = loss(p)
        for _ in range(200):
            _, pooled, cache = forward(p, adj, x)
            p = opt.step(p, backward(p, cache, grad_pooled=2 * (pooled - 2.0)), 0.05)
        assert loss(p) < 1e-3 * start


class TestCheckpoint:
    @pytest.mark.parametrize("extras", [False, True])
    def test_round_trip(self, tmp_path, rng, extras):
        params, adj, x, *_ = random_case(rng, readout=extras, skip=extras)
        save_params(params, tmp_path / "p.json", "literal")
        loaded, mode = load_params(tmp_path / "p.json")
        assert mode == "literal"
        np.testing.assert_allclose(forward(loaded, adj, x)[0], forward(params, adj, x)[0],
                                   rtol=0, atol=1e-12)

    def test_bad_shapes_rejected(self, tmp_path):
        p = init_params((3, 2), 1, 0)
        p.head = np.zeros(5)
        save_params(p, tmp_path / "p.json")
        with pytest.raises(ValueError, match="head"):
            load_params(tmp_path / "p.json")

    def test_document_fields(self, tmp_path):
        import json
        save_params(init_params((2,), 1, 4), tmp_path / "p.json")
        doc = json.loads((tmp_path / "p.json").read_text())
        assert {"layer_sizes", "normalization", "seed", "layers", "head"} <= set(doc)
        assert doc["seed"] == 4


def test_selfloop_operator_radius_by_power_iteration():
    m = normalize_adjacency(generate_erdos_renyi(20, 0.2, 5)).dense()
    v = np.ones(20) / math.sqrt(20)
    for _ in range(500):
        w = m @ v
        v = w / np.linalg.norm(w)
    assert float(v @ m @ v) <= 1.0 + 1e-12
