# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


from dataclasses import dataclass
from logging import getLogger

import numpy as np

from .exceptions import ArgumentError, DimensionError, SingularDegreeError
from .numerics import Tensor, as_tensor, matmul

logger = getLogger('HGFORMER:HYPERGRAPH')


########################################################################################################################
# Hypergraph types
########################################################################################################################

@dataclass(frozen=True)
class DegreePair:
    """ Diagonals of the node-degree (D_v) and hyperedge-degree (D_e) matrices """

    node: np.ndarray
    edge: np.ndarray

    @property
    def D_v(self) -> np.ndarray:
        return np.diag(self.node)

    @property
    def D_e(self) -> np.ndarray:
        return np.diag(self.edge)


class Hypergraph:
    """ Binary incidence matrix H (V x E_h) with a diagonal hyperedge weight matrix H_w """

    __slots__ = ('_incidence', '_weights', '_propagation')

    def __init__(self, incidence, weights=None):
        """
        Initialize the Hypergraph object.

        :param incidence: Binary V x E_h matrix
        :param weights: Diagonal of H_w (E_h values) or the full E_h x E_h diagonal matrix, identity when None
        """
        incidence = np.array(incidence, dtype=np.float64)
        if incidence.ndim != 2:
            raise DimensionError("incidence must be a V x E_h matrix", incidence.shape)
        if not np.all((incidence == 0.0) | (incidence == 1.0)):
            raise ArgumentError("incidence entries must be 0 or 1")
        if np.any(incidence.sum(axis=1) < 1):
            orphans = np.flatnonzero(incidence.sum(axis=1) < 1)
            raise ArgumentError(f"nodes {orphans.tolist()} belong to no hyperedge")

        if weights is None:
            weights = np.ones(incidence.shape[1])
        weights = np.array(weights, dtype=np.float64)
        if weights.ndim == 2:
            if np.any(weights != np.diag(np.diag(weights))):
                raise ArgumentError("hyperedge weight matrix must be diagonal")
            weights = np.diag(weights).copy()
        if weights.shape != (incidence.shape[1],):
            raise DimensionError("one weight per hyperedge expected", weights.shape, (incidence.shape[1],))
        if not np.all(np.isfinite(weights)):
            raise ArgumentError("hyperedge weights must be finite")

        incidence.setflags(write=False)
        weights.setflags(write=False)
        self._incidence = incidence
        self._weights = weights
        self._propagation = None

    def __eq__(self, obj):
        return isinstance(obj, Hypergraph) and np.array_equal(self._incidence, obj._incidence) and \
               np.array_equal(self._weights, obj._weights)

    def __repr__(self):
        return f"<Hypergraph V={self.num_nodes}, E_h={self.num_edges}, sizes={self.edge_sizes().tolist()}>"

    @property
    def incidence(self) -> np.ndarray:
        return self._incidence

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def weight_matrix(self) -> np.ndarray:
        return np.diag(self._weights)

    @property
    def num_nodes(self) -> int:
        return self._incidence.shape[0]

    @property
    def num_edges(self) -> int:
        return self._incidence.shape[1]

    @classmethod
    def from_assignment(cls, assignment, num_edges: int, weights=None) -> 'Hypergraph':
        """
        Build an exactly-one-membership hypergraph

        :param assignment: Hyperedge index per node
        :param num_edges: Hyperedge count
        :param weights: Diagonal of H_w
        """
        assignment = np.asarray(assignment, dtype=np.int64)
        incidence = np.zeros((assignment.size, num_edges))
        incidence[np.arange(assignment.size), assignment] = 1.0
        return cls(incidence, weights)

    def assignment(self) -> np.ndarray:
        """ Hyperedge of each node (first one for multi-membership nodes) """
        return np.argmax(self._incidence, axis=1)

    def edge_sizes(self) -> np.ndarray:
        return self._incidence.sum(axis=0).astype(np.int64)

    def degree_pair(self) -> DegreePair:
        return degree_pair(self)

    def propagation(self) -> np.ndarray:
        """ D_v^-1/2 H H_w D_e^-1 H^T D_v^-1/2, computed once """
        if self._propagation is None:
            self._propagation = propagation_matrix(self._incidence, self._weights)
        return self._propagation

    def to_arrays(self) -> dict:
        """ Dense H and H_w, as stored in checkpoints """
        return {'incidence': self._incidence.copy(), 'weights': self.weight_matrix}

    @classmethod
    def from_arrays(cls, incidence, weights) -> 'Hypergraph':
        return cls(incidence, weights)


########################################################################################################################
# Construction and degrees
########################################################################################################################

def new_random(num_nodes: int, num_edges: int, seed: int) -> Hypergraph:
    """
    Assign every node to one uniformly random hyperedge, re-sampling until no hyperedge is empty; H_w = I

    :param num_nodes: Joint count V
    :param num_edges: Hyperedge count E_h
    :param seed: Seed of the generator
    """
    if num_edges < 1 or num_nodes < num_edges:
        raise ArgumentError(f"need V >= E_h >= 1 (V={num_nodes}, E_h={num_edges})")
    rng = np.random.default_rng(seed)
    attempts = 0
    while True:
        attempts += 1
        assignment = rng.integers(0, num_edges, size=num_nodes)
        if np.unique(assignment).size == num_edges:
            break
    logger.debug(f"Random hypergraph V={num_nodes}, E_h={num_edges} drawn after {attempts} attempt(s)")
    return Hypergraph.from_assignment(assignment, num_edges)


def degree_pair(g: Hypergraph) -> DegreePair:
    """ D_v[i,i] = sum_e H[i,e] H_w[e,e], D_e[e,e] = sum_i H[i,e] """
    node = g.incidence @ g.weights
    edge = g.incidence.sum(axis=0)
    return DegreePair(node=node, edge=edge)


def _inverse_or_zero(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    np.divide(1.0, values, out=out, where=values != 0)
    return out


def propagation_matrix(incidence: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Dense hypergraph propagation operator; empty hyperedges contribute nothing

    :param incidence: V x E_h binary matrix
    :param weights: E_h hyperedge weights
    """
    node = incidence @ weights
    if np.any(node <= 0.0):
        bad = np.flatnonzero(node <= 0.0)
        raise SingularDegreeError(f"node degree must be positive to form D_v^-1/2 (nodes {bad.tolist()})", bad)
    inv_sqrt = 1.0 / np.sqrt(node)
    edge_inv = _inverse_or_zero(incidence.sum(axis=0))
    left = inv_sqrt[:, None] * incidence * (weights * edge_inv)[None, :]
    right = incidence.T * inv_sqrt[None, :]
    return left @ right


########################################################################################################################
# Convolutions
########################################################################################################################

def _check_nodes(x: Tensor, num_nodes: int, what: str):
    if x.ndim < 2 or x.shape[-2] != num_nodes:
        raise DimensionError(f"{what}: node axis (-2) must have {num_nodes} entries", x.shape)


def _lift(operator: Tensor, x: Tensor) -> Tensor:
    """ Insert singleton axes so a per-sample (B, V, V) operator meets x of shape (B, ..., V, C) """
    if operator.ndim == 3 and x.ndim > 3:
        return operator.reshape((operator.shape[0],) + (1,) * (x.ndim - 3) + operator.shape[1:])
    return operator


def hyperconv(x, g, theta) -> Tensor:
    """
    Y = D_v^-1/2 H H_w D_e^-1 H^T D_v^-1/2 X theta

    :param x: Node features, node axis second to last (..., V, C1)
    :param g: Hypergraph, or any object with ``num_nodes`` and ``propagation()`` (per-sample operators allowed)
    :param theta: Filter C1 x C2
    """
    x, theta = as_tensor(x), as_tensor(theta)
    _check_nodes(x, g.num_nodes, 'hyperconv')
    operator = _lift(as_tensor(g.propagation()), x)
    return matmul(matmul(operator, x), theta)


def normalized_adjacency(adjacency) -> np.ndarray:
    """
    D^-1/2 A D^-1/2 for a symmetric binary adjacency (self-loops expected)

    :param adjacency: V x V matrix
    """
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("adjacency must be square", a.shape)
    if not np.array_equal(a, a.T):
        raise ArgumentError("adjacency must be symmetric")
    degree = a.sum(axis=1)
    if np.any(degree <= 0.0):
        bad = np.flatnonzero(degree <= 0.0)
        raise SingularDegreeError(f"isolated nodes {bad.tolist()} (add self-loops)", bad)
    inv_sqrt = 1.0 / np.sqrt(degree)
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def adjacency_conv(x, adjacency, w) -> Tensor:
    """
    Y = D^-1/2 A D^-1/2 X W

    :param x: Node features (..., V, C1)
    :param adjacency: V x V symmetric binary matrix with self-loops
    :param w: Weight C1 x C2
    """
    x, w = as_tensor(x), as_tensor(w)
    operator = normalized_adjacency(adjacency)
    _check_nodes(x, operator.shape[0], 'adjacency_conv')
    return matmul(matmul(Tensor(operator), x), w)
