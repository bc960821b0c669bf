# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


from dataclasses import dataclass, field
from logging import getLogger

import numpy as np

from .exceptions import ArgumentError, DimensionError
from .hypergraph import Hypergraph, adjacency_conv
from .layers import Block, Linear, glorot
from .numerics import Tensor, as_tensor, gelu, relu, sigmoid

logger = getLogger('HGFORMER:DECODER')


########################################################################################################################
# Hyperedge Attention Network
########################################################################################################################

@dataclass
class HanOutput:
    """ Attentive features A_t (N*M, V, T', C') and per-joint attention (N*M, V) """

    A_t: Tensor
    attn: Tensor
    features: Tensor


class HyperedgeAttention(Block):
    """ Squeeze-excitation over joints on top of two 1x1 channel convolutions """

    def __init__(self, channels: int, num_nodes: int, rng: np.random.Generator, reduction: int = 2):
        super().__init__()
        squeezed = max(1, num_nodes // max(1, reduction))
        self.num_nodes = num_nodes
        self.conv2 = self.child('conv2', Linear(channels, channels, rng))
        self.conv1 = self.child('conv1', Linear(channels, channels, rng))
        self.lin1 = self.child('lin1', Linear(num_nodes, squeezed, rng))
        self.lin2 = self.child('lin2', Linear(squeezed, num_nodes, rng))

    def __call__(self, e_enc) -> HanOutput:
        return han(e_enc, self)


def han(e_enc, block: HyperedgeAttention) -> HanOutput:
    """
    E_2 = conv1(gelu(conv2(E_enc))), attn = sigmoid(lin2(relu(lin1(GAP_T'C'(E_2))))), A_t = attn * E_2

    :param e_enc: Encoder output (N*M, V, T', C')
    :param block: HAN parameters
    """
    e_enc = as_tensor(e_enc)
    if e_enc.ndim != 4 or e_enc.shape[1] != block.num_nodes:
        raise DimensionError(f"HAN expects (N*M, {block.num_nodes}, T', C')", e_enc.shape)
    features = block.conv1(gelu(block.conv2(e_enc)))
    squeezed = features.mean(axis=(2, 3))
    attn = sigmoid(block.lin2(relu(block.lin1(squeezed))))
    gate = attn.reshape(attn.shape + (1, 1)).broadcast_to(features.shape)
    return HanOutput(A_t=gate * features, attn=attn, features=features)


def fuse_residual(e_enc, a_t, alpha: float) -> Tensor:
    """ E_f = E_enc + alpha * A_t """
    e_enc, a_t = as_tensor(e_enc), as_tensor(a_t)
    if e_enc.shape != a_t.shape:
        raise DimensionError("residual fusion needs equal shapes", e_enc.shape, a_t.shape)
    if not isinstance(alpha, Tensor) and float(alpha) == 0.0:
        return e_enc
    return e_enc + a_t * alpha


########################################################################################################################
# Hypergraph decoder (HypDec)
########################################################################################################################

def decoder_widths(in_channels: int, hidden: tuple, low_dim: int, tap: int, out_channels: int) -> list:
    """
    Channel schedule of the decoder, the tap layer has width ``low_dim``

    :param in_channels: Input width C'
    :param hidden: Widths of the other hidden layers, e.g. (128, 64, 32)
    :param low_dim: Width d of the tap layer
    :param tap: 1-based index of the tap layer
    :param out_channels: Reconstruction width C_in
    """
    hidden = list(hidden)
    if not 1 <= tap <= len(hidden) + 1:
        raise ArgumentError(f"decoder tap {tap} outside 1..{len(hidden) + 1}")
    return [in_channels] + hidden[:tap - 1] + [low_dim] + hidden[tap - 1:] + [out_channels]


class HypergraphDecoder(Block):
    """ Adjacency convolutions with relu between layers and two taps: the low-dim layer and the last layer """

    def __init__(self, widths: list, tap: int, rng: np.random.Generator):
        super().__init__()
        if not 1 <= tap < len(widths) - 1:
            raise ArgumentError(f"tap {tap} must name a hidden layer of {len(widths) - 1}")
        self.widths = list(widths)
        self.tap = tap
        self.weights = [self.param(f'layer{i + 1}', glorot(rng, w_in, w_out))
                        for i, (w_in, w_out) in enumerate(zip(widths[:-1], widths[1:]))]

    @property
    def low_dim(self) -> int:
        return self.widths[self.tap]

    def head(self, x, adjacency) -> Tensor:
        """ Layers 1..tap; returns the tap output before its activation """
        y = as_tensor(x)
        for index, weight in enumerate(self.weights[:self.tap]):
            if index:
                y = relu(y)
            y = adjacency_conv(y, adjacency, weight)
        return y

    def tail(self, z, adjacency) -> Tensor:
        """ Layers tap+1..end applied to a tap-width input """
        y = as_tensor(z)
        for weight in self.weights[self.tap:]:
            y = adjacency_conv(relu(y), adjacency, weight)
        return y

    def __call__(self, x, adjacency):
        e_c = self.head(x, adjacency)
        return self.tail(e_c, adjacency), e_c


def hypdec_forward(x_pooled, adjacency, decoder: HypergraphDecoder):
    """
    Run the decoder on time-pooled features

    :param x_pooled: GAP_time(E_f), shape (N*M, V, C')
    :param adjacency: Skeleton adjacency with self-loops
    :param decoder: Decoder parameters
    :return: (reconstruction (N*M, V, C_in), E_c (N*M, V, d))
    """
    return decoder(x_pooled, adjacency)


########################################################################################################################
# K-means
########################################################################################################################

@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    history: list = field(default_factory=list)
    iterations: int = 0


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(0, n))]
    for _ in range(1, k):
        dist_sq = _squared_distances(points, points[chosen]).min(axis=1)
        total = dist_sq.sum()
        if total > 0.0:
            chosen.append(int(rng.choice(n, p=dist_sq / total)))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            chosen.append(int(rng.choice(remaining)))
    return points[chosen].copy()


def _repair_empty(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray, k: int):
    """ Give every empty cluster the farthest point of the currently largest cluster """
    while True:
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return
        largest = int(np.argmax(counts))
        members = np.flatnonzero(labels == largest)
        spread = ((points[members] - centroids[largest]) ** 2).sum(axis=1)
        moved = members[int(np.argmax(spread))]
        labels[moved] = empty[0]
        centroids[empty[0]] = points[moved]
        logger.debug(f"K-means: cluster {empty[0]} was empty, took point {moved} from cluster {largest}")


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-8) -> KMeansResult:
    """
    Lloyd's algorithm with k-means++ seeding.

    :param points: Array (n, d)
    :param k: Cluster count, at most n
    :param seed: Seed of the initialization
    :param max_iter: Iteration limit
    :param tol: Stop when no centroid moves by more than this
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if k < 1 or n < k:
        raise ArgumentError(f"k-means needs 1 <= K <= n (n={n}, K={k})")
    rng = np.random.default_rng(seed)
    centroids = kmeans_plusplus(points, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    history, iterations = [], 0
    for iterations in range(1, max_iter + 1):
        labels = np.argmin(_squared_distances(points, centroids), axis=1)
        _repair_empty(points, labels, centroids, k)
        updated = np.stack([points[labels == j].mean(axis=0) for j in range(k)])
        shift = np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max()
        centroids = updated
        history.append(float(((points - centroids[labels]) ** 2).sum()))
        if shift < tol:
            break
    logger.debug(f"K-means: K={k}, {iterations} iteration(s), inertia={history[-1]:.6g}")
    return KMeansResult(assignments=labels, centroids=centroids, inertia=history[-1], history=history,
                        iterations=iterations)


########################################################################################################################
# Attentive out-phase hypergraph generator
########################################################################################################################

def minmax_normalize(values: np.ndarray, axis: int = 1) -> np.ndarray:
    """ Per-channel min-max scaling over one axis; constant channels map to 0 """
    low = values.min(axis=axis, keepdims=True)
    span = values.max(axis=axis, keepdims=True) - low
    out = np.zeros_like(values)
    np.divide(values - low, span, out=out, where=span > 0)
    return out


def generate_outphase(attn, e_c, k: int, seed: int = 0, max_iter: int = 100) -> Hypergraph:
    """
    Cluster the batch-pooled decoder features into K hyperedges weighted by the pooled joint attention

    :param attn: Per-joint attention (N*M, V)
    :param e_c: Low-dim decoder features (N*M, V, d)
    :param k: Hyperedge count
    :param seed: K-means seed
    :param max_iter: K-means iteration limit
    """
    attn = attn.numpy() if isinstance(attn, Tensor) else np.asarray(attn, dtype=np.float64)
    e_c = e_c.numpy() if isinstance(e_c, Tensor) else np.asarray(e_c, dtype=np.float64)
    if e_c.ndim != 3 or attn.shape != e_c.shape[:2]:
        raise DimensionError("attention (N*M, V) and E_c (N*M, V, d) disagree", attn.shape, e_c.shape)
    points = minmax_normalize(e_c, axis=1).mean(axis=0)
    clusters = kmeans(points, k, seed=seed, max_iter=max_iter)
    joint_attention = attn.mean(axis=0)
    weights = np.bincount(clusters.assignments, weights=joint_attention, minlength=k) / joint_attention.sum()
    logger.debug(f"Out-phase hyperedges: sizes={np.bincount(clusters.assignments, minlength=k).tolist()}, "
                 f"weights={np.round(weights, 4).tolist()}")
    return Hypergraph.from_assignment(clusters.assignments, k, weights)
