# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


import numpy as np
import pytest
from hgformer.hypergraph import Hypergraph, new_random, degree_pair, propagation_matrix, hyperconv, \
                                normalized_adjacency, adjacency_conv
from hgformer.numerics import Tensor, Parameter, grad_check
from hgformer.exceptions import ArgumentError, DimensionError, SingularDegreeError


def test_new_random_covers_every_hyperedge():
    for seed in range(20):
        g = new_random(8, 4, seed)
        assert g.num_nodes == 8
        assert g.num_edges == 4
        assert np.all(g.incidence.sum(axis=1) == 1.0)
        assert np.all(g.edge_sizes() >= 1)
        assert np.array_equal(g.weights, np.ones(4))


def test_new_random_is_deterministic():
    assert new_random(20, 5, 3) == new_random(20, 5, 3)
    with pytest.raises(ArgumentError):
        new_random(3, 4, 0)


def test_incidence_validation():
    with pytest.raises(ArgumentError):
        Hypergraph([[0.5, 0.5], [1.0, 0.0]])
    with pytest.raises(ArgumentError):
        Hypergraph([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DimensionError):
        Hypergraph([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0, 1.0])
    with pytest.raises(ArgumentError):
        Hypergraph([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.5], [0.0, 1.0]])


def test_degree_pair():
    g = Hypergraph([[1, 0], [1, 1], [0, 1]], [2.0, 0.5])
    d = degree_pair(g)
    assert np.array_equal(d.node, [2.0, 2.5, 0.5])
    assert np.array_equal(d.edge, [2.0, 2.0])
    assert np.array_equal(d.D_v, np.diag([2.0, 2.5, 0.5]))


def test_propagation_matches_dense_formula():
    h = np.array([[1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    w = np.array([0.3, 1.2, 0.7])
    dv = np.diag((h @ w) ** -0.5)
    de = np.diag(1.0 / h.sum(axis=0))
    expected = dv @ h @ np.diag(w) @ de @ h.T @ dv
    assert np.allclose(Hypergraph(h, w).propagation(), expected)


def test_singleton_hyperedges_give_identity():
    g = Hypergraph(np.eye(4))
    assert np.allclose(g.propagation(), np.eye(4))


def test_zero_node_degree_raises():
    with pytest.raises(SingularDegreeError) as info:
        propagation_matrix(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 0.0]))
    assert info.value.nodes == (1,)


def test_hyperconv_shapes_and_values():
    g = Hypergraph.from_assignment([0, 0, 1], 2)
    x = Tensor(np.array([[1.0, 0.0], [3.0, 0.0], [5.0, 1.0]]))
    theta = Tensor(np.eye(2))
    y = hyperconv(x, g, theta)
    # members of one hyperedge with equal degree share the hyperedge mean
    assert np.allclose(y.data, [[2.0, 0.0], [2.0, 0.0], [5.0, 1.0]])

    batched = hyperconv(Tensor(np.ones((2, 4, 3, 2))), g, Tensor(np.ones((2, 5))))
    assert batched.shape == (2, 4, 3, 5)
    with pytest.raises(DimensionError):
        hyperconv(Tensor(np.ones((4, 2))), g, theta)


def test_hyperconv_gradient():
    rng = np.random.default_rng(1)
    g = Hypergraph.from_assignment([0, 1, 1, 2, 0], 3, [0.5, 1.0, 2.0])
    x = Tensor(rng.normal(size=(2, 5, 3)))
    theta = Parameter(rng.normal(size=(3, 4)), 'theta')
    assert grad_check(lambda t: (hyperconv(x, g, t) ** 2).sum(), theta) < 1e-5


def test_normalized_adjacency():
    a = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=float)
    n = normalized_adjacency(a)
    assert np.isclose(n[0, 1], 1.0 / np.sqrt(2 * 3))
    assert np.allclose(n, n.T)
    with pytest.raises(ArgumentError):
        normalized_adjacency(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(SingularDegreeError):
        normalized_adjacency(np.zeros((2, 2)))
    y = adjacency_conv(Tensor(np.ones((3, 2))), a, Tensor(np.eye(2)))
    assert y.shape == (3, 2)


def test_checkpoint_arrays():
    g = Hypergraph.from_assignment([1, 0, 1], 2, [0.25, 0.75])
    arrays = g.to_arrays()
    assert np.array_equal(arrays['weights'], np.diag([0.25, 0.75]))
    assert Hypergraph.from_arrays(arrays['incidence'], arrays['weights']) == g
    assert np.array_equal(g.assignment(), [1, 0, 1])


def test_exactly_one_membership_cancels_weights():
    x = Tensor(np.random.default_rng(2).normal(size=(6, 3)))
    theta = Tensor(np.eye(3))
    plain = hyperconv(x, Hypergraph.from_assignment([0, 1, 1, 2, 2, 2], 3), theta)
    weighted = hyperconv(x, Hypergraph.from_assignment([0, 1, 1, 2, 2, 2], 3, [0.1, 4.0, 0.7]), theta)
    assert np.allclose(plain.data, weighted.data)


def test_multi_membership_depends_on_weights():
    h = np.array([[1, 1], [1, 0], [0, 1]], dtype=float)
    a = Hypergraph(h, [1.0, 1.0]).propagation()
    b = Hypergraph(h, [1.0, 3.0]).propagation()
    assert not np.allclose(a, b)


def _random_instance(rng):
    num_nodes, num_edges = int(rng.integers(2, 11)), int(rng.integers(1, 5))
    h = (rng.random((num_nodes, num_edges)) < 0.4).astype(float)
    h[np.arange(num_nodes), rng.integers(0, num_edges, size=num_nodes)] = 1.0
    h[rng.integers(0, num_nodes, size=num_edges), np.arange(num_edges)] = 1.0
    return h, rng.uniform(0.1, 2.0, size=num_edges)


def test_hyperconv_matches_dense_chain():
    rng = np.random.default_rng(200)
    for _ in range(200):
        h, w = _random_instance(rng)
        x = rng.normal(size=(h.shape[0], 3))
        theta = rng.normal(size=(3, 2))
        dv = np.diag(1.0 / np.sqrt(h @ w))
        de = np.diag(1.0 / h.sum(axis=0))
        expected = dv @ h @ np.diag(w) @ de @ h.T @ dv @ x @ theta
        y = hyperconv(Tensor(x), Hypergraph(h, w), Tensor(theta))
        assert np.max(np.abs(y.data - expected)) < 1e-10


def test_hyperconv_is_linear_in_x():
    rng = np.random.default_rng(7)
    for _ in range(20):
        h, w = _random_instance(rng)
        g = Hypergraph(h, w)
        theta = Tensor(rng.normal(size=(3, 4)))
        x, y = rng.normal(size=(2, h.shape[0], 3))
        a, b = rng.normal(size=2)
        combined = hyperconv(Tensor(a * x + b * y), g, theta).data
        separate = a * hyperconv(Tensor(x), g, theta).data + b * hyperconv(Tensor(y), g, theta).data
        assert np.allclose(combined, separate, atol=1e-12)


def test_hyperconv_ignores_hyperedge_order():
    rng = np.random.default_rng(8)
    for _ in range(20):
        h, w = _random_instance(rng)
        order = rng.permutation(h.shape[1])
        x, theta = Tensor(rng.normal(size=(h.shape[0], 3))), Tensor(rng.normal(size=(3, 2)))
        y = hyperconv(x, Hypergraph(h, w), theta).data
        permuted = hyperconv(x, Hypergraph(h[:, order], np.diag(w)[np.ix_(order, order)]), theta).data
        assert np.allclose(y, permuted, atol=1e-12)


def test_adjacency_conv_two_node_path():
    y = adjacency_conv(Tensor(np.array([[1.0], [3.0]])), np.ones((2, 2)), Tensor(np.eye(1)))
    assert np.allclose(y.data, [[2.0], [2.0]])
    x = Tensor(np.random.default_rng(3).normal(size=(4, 2)))
    assert np.allclose(adjacency_conv(x, np.eye(4), Tensor(np.eye(2))).data, x.data)


def test_adjacency_conv_is_permutation_equivariant():
    rng = np.random.default_rng(9)
    a = np.array([[1, 1, 0, 0, 1], [1, 1, 1, 0, 0], [0, 1, 1, 1, 0], [0, 0, 1, 1, 0], [1, 0, 0, 0, 1]], dtype=float)
    x, w = rng.normal(size=(5, 3)), Tensor(rng.normal(size=(3, 2)))
    order = rng.permutation(5)
    y = adjacency_conv(Tensor(x), a, w).data
    permuted = adjacency_conv(Tensor(x[order]), a[np.ix_(order, order)], w).data
    assert np.allclose(permuted, y[order], atol=1e-12)


def test_adjacency_conv_gradient():
    rng = np.random.default_rng(10)
    a = np.array([[1, 1, 0, 0], [1, 1, 1, 0], [0, 1, 1, 1], [0, 0, 1, 1]], dtype=float)
    x = Parameter(rng.normal(size=(2, 4, 3)), 'x')
    w = Parameter(rng.normal(size=(3, 2)), 'w')
    assert grad_check(lambda t: (adjacency_conv(t, a, w) ** 2).sum(), w) < 1e-4
    assert grad_check(lambda t: (adjacency_conv(t, a, w) ** 2).sum(), x) < 1e-4
