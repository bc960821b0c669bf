# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText

"""
In-phase hypergraph quantizer.

Mid-encoder node embeddings are averaged over frames, projected to d dimensions by the first layers of a
HypDec-shaped decoder and snapped to the nearest codebook vector. The codebook index of a node is its hyperedge.
"""

from dataclasses import dataclass
from logging import getLogger
from typing import Optional

import numpy as np

from .adaptive_decoder import HypergraphDecoder, decoder_widths
from .exceptions import ArgumentError, DimensionError
from .hypergraph import Hypergraph
from .layers import Block, Linear
from .numerics import Tensor, as_tensor, matmul, relu, sigmoid, stop_gradient, straight_through, swap_last

logger = getLogger('HGFORMER:QUANT')


########################################################################################################################
# Codebook
########################################################################################################################

class Codebook(Block):
    """ K trainable d-dimensional hyperedge prototypes """

    def __init__(self, size: int, dim: int, rng: np.random.Generator):
        super().__init__()
        if size < 2 or dim < 1:
            raise ArgumentError(f"codebook needs K >= 2 and d >= 1 (K={size}, d={dim})")
        self.vectors = self.param('vectors', rng.uniform(-1.0 / size, 1.0 / size, size=(size, dim)))

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _vectors(cb) -> Tensor:
    return cb.vectors if isinstance(cb, Codebook) else as_tensor(cb)


def assign(e, cb) -> np.ndarray:
    """
    Index of the nearest prototype per node; the lowest index wins ties

    :param e: Embeddings (..., V, d)
    :param cb: Codebook or (K, d) array
    """
    e = e.data if isinstance(e, Tensor) else np.asarray(e, dtype=np.float64)
    q = _vectors(cb).data
    if e.shape[-1] != q.shape[-1]:
        raise DimensionError("embedding and codebook widths differ", e.shape, q.shape)
    distances = ((e[..., None, :] - q) ** 2).sum(axis=-1)
    return np.argmin(distances, axis=-1)


def quantization_loss(e, cb, he) -> Tensor:
    """ mean over nodes of ||Q[he_i] - sg(E_i)||^2; only the codebook receives gradient """
    chosen = _vectors(cb).take(np.asarray(he, dtype=np.int64), axis=0)
    diff = chosen - stop_gradient(e)
    return (diff * diff).sum(axis=-1).mean()


def quantize_forward(e, cb, fixed_assignments=None):
    """
    Snap embeddings to their prototypes with a straight-through backward rule.

    :param e: Embeddings (..., V, d)
    :param cb: Codebook
    :param fixed_assignments: Assignments to use instead of the argmin
    :return: (quantized, he, loss)
    """
    e = as_tensor(e)
    held = stop_gradient(e)
    if fixed_assignments is None:
        he = assign(held, cb)
    else:
        he = np.asarray(fixed_assignments, dtype=np.int64)
        if he.shape != e.shape[:-1]:
            raise DimensionError("fixed assignments do not match the embeddings", he.shape, e.shape[:-1])
    quantized = straight_through(Tensor(_vectors(cb).data[he]), e)
    return quantized, he, quantization_loss(held, cb, he)


########################################################################################################################
# In-phase hypergraph
########################################################################################################################

class InPhaseHypergraph:
    """ Per-sample incidence Hq (B, V, K) with per-sample hyperedge weights (B, K) that stay differentiable """

    def __init__(self, incidence: np.ndarray, weights: Tensor):
        incidence = np.asarray(incidence, dtype=np.float64)
        if incidence.ndim != 3 or weights.shape != (incidence.shape[0], incidence.shape[2]):
            raise DimensionError("in-phase incidence (B, V, K) and weights (B, K) disagree",
                                 incidence.shape, weights.shape)
        self.incidence = incidence
        self.weights = weights
        self._propagation = None

    @property
    def num_samples(self) -> int:
        return self.incidence.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.incidence.shape[1]

    @property
    def num_edges(self) -> int:
        return self.incidence.shape[2]

    def weight_matrices(self) -> np.ndarray:
        """ Hq_w as (B, K, K) diagonal matrices """
        return self.weights.data[:, :, None] * np.eye(self.num_edges)[None]

    def sample(self, index: int) -> Hypergraph:
        return Hypergraph(self.incidence[index], self.weights.data[index])

    def propagation(self) -> Tensor:
        """ Per-sample D_v^-1/2 Hq Hq_w D_e^-1 Hq^T D_v^-1/2, shape (B, V, V) """
        if self._propagation is not None:
            return self._propagation
        b, v, k = self.incidence.shape
        hq = Tensor(self.incidence)
        sizes = self.incidence.sum(axis=1)
        edge_inv = np.zeros_like(sizes)
        np.divide(1.0, sizes, out=edge_inv, where=sizes > 0)

        node_degree = matmul(hq, self.weights.reshape(b, k, 1))
        inv_sqrt = node_degree ** -0.5
        scaled = hq * (self.weights * Tensor(edge_inv)).reshape(b, 1, k).broadcast_to((b, v, k))
        core = matmul(scaled, swap_last(hq))
        rows = inv_sqrt.broadcast_to((b, v, v))
        cols = swap_last(inv_sqrt).broadcast_to((b, v, v))
        self._propagation = core * rows * cols
        return self._propagation


def build_inphase(he, quantized, scorer) -> InPhaseHypergraph:
    """
    One-hot incidence from the assignments; hyperedge weight = mean of sigmoid(mlp(Q_he_i)) over member nodes

    :param he: Assignments (B, V)
    :param quantized: Quantized embeddings (B, V, d)
    :param scorer: Callable mapping (B, V, d) to per-node scores (B, V, 1)
    """
    he = np.asarray(he, dtype=np.int64)
    quantized = as_tensor(quantized)
    b, v = he.shape
    k = scorer.num_edges
    incidence = np.zeros((b, v, k))
    incidence[np.arange(b)[:, None], np.arange(v)[None, :], he] = 1.0

    sizes = incidence.sum(axis=1)
    empty = int((sizes == 0).sum())
    if empty:
        logger.debug(f"In-phase: {empty} empty hyperedge(s) over {b} sample(s)")
    mean_scale = np.zeros_like(sizes)
    np.divide(1.0, sizes, out=mean_scale, where=sizes > 0)

    node_weight = sigmoid(scorer(quantized))
    summed = matmul(swap_last(Tensor(incidence)), node_weight).reshape(b, k)
    return InPhaseHypergraph(incidence, summed * Tensor(mean_scale))


########################################################################################################################
# Quantizer block
########################################################################################################################

class EdgeWeightMLP(Block):
    """ d -> d -> 1 with relu in between """

    def __init__(self, dim: int, num_edges: int, rng: np.random.Generator):
        super().__init__()
        self.num_edges = num_edges
        self.hidden = self.child('hidden', Linear(dim, dim, rng))
        self.out = self.child('out', Linear(dim, 1, rng))

    def __call__(self, x) -> Tensor:
        return self.out(relu(self.hidden(x)))


@dataclass
class QuantizerOutput:
    embeddings: Tensor
    quantized: Tensor
    assignments: np.ndarray
    hypergraph: InPhaseHypergraph
    loss: Tensor
    recon: Tensor


class Quantizer(Block):
    """ Projection decoder, codebook and edge-weight MLP of the in-phase path """

    def __init__(self, channels: int, num_edges: int, low_dim: int, out_channels: int, rng: np.random.Generator,
                 hidden: tuple = (128, 64, 32), tap: int = 3):
        super().__init__()
        self.decoder = self.child('decoder', HypergraphDecoder(
            decoder_widths(channels, hidden, low_dim, tap, out_channels), tap, rng))
        self.codebook = self.child('codebook', Codebook(num_edges, low_dim, rng))
        self.edge_mlp = self.child('edge_mlp', EdgeWeightMLP(low_dim, num_edges, rng))

    def project_low_dim(self, f, adjacency) -> Tensor:
        """ (B, V, D) -> (B, V, d) through the decoder layers up to the tap """
        return self.decoder.head(f, adjacency)

    def __call__(self, x, adjacency, fixed_assignments: Optional[np.ndarray] = None) -> QuantizerOutput:
        """
        :param x: Node features of the first FAHT group (B, T, V, C')
        :param adjacency: Skeleton adjacency for the projection decoder
        :param fixed_assignments: Hyperedge assignments to reuse (B, V)
        """
        if adjacency is None:
            raise ArgumentError("the quantizer needs the skeleton adjacency")
        x = as_tensor(x)
        e = self.project_low_dim(x.mean(axis=1), adjacency)
        quantized, he, loss = quantize_forward(e, self.codebook, fixed_assignments)
        hypergraph = build_inphase(he, quantized, self.edge_mlp)
        recon = self.decoder.tail(quantized, adjacency)
        logger.debug(f"Quantizer: L_quant={loss.item():.6g}, used codes={np.unique(he).size}/{self.codebook.size}")
        return QuantizerOutput(embeddings=e, quantized=quantized, assignments=he, hypergraph=hypergraph,
                               loss=loss, recon=recon)
