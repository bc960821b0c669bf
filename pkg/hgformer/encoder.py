# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText

"""
Hypergraph encoder: a stack of FAHT units, each an ST-HT transformer layer followed by an STA-HT layer (the same
layer with temporal gating of the hyperedge features). The quantizer runs between the two unit groups.

Inside the encoder tensors are laid out (batch, frames, joints, channels); the public boundary uses
(batch, joints, frames, channels).
"""

from dataclasses import dataclass
from logging import getLogger
from typing import Optional

import numpy as np

from .data import bone_offsets
from .enums import AttentionMode, resolve
from .exceptions import ArgumentError, DegenerateAttentionError, DimensionError
from .hypergraph import hyperconv
from .layers import Block, Linear, glorot
from .numerics import Tensor, as_tensor, matmul, relu, sigmoid, softmax, swap_last

logger = getLogger('HGFORMER:ENCODER')

# literal-mode denominator guard
EPS_DEN = 1e-6


########################################################################################################################
# Encoder configuration
########################################################################################################################

@dataclass
class EncoderConfig:
    """ Shape and switches of the FAHT stack """

    n_faht: int = 5
    split: tuple = (2, 3)
    hidden_channels: int = 216
    heads: int = 4
    lambda1: float = 1.0
    lambda2: float = 1.0
    attention_mode: str = 'softmax'
    trainable_lambdas: bool = False
    joint_attention: bool = True
    hyperedge_attention: bool = True
    bone_attention: bool = True
    temporal_attention: bool = True
    in_phase: bool = True
    in_channels: int = 3
    frames: int = 64
    pool_after: tuple = (2, 4)
    se_reduction: int = 2

    def validate(self):
        if len(self.split) != 2 or sum(self.split) != self.n_faht or min(self.split) < 0:
            raise ArgumentError(f"split {self.split} must be two counts summing to n_faht={self.n_faht}")
        if self.heads < 1 or self.hidden_channels % self.heads:
            raise ArgumentError(f"hidden_channels={self.hidden_channels} not divisible by heads={self.heads}")
        if not (np.isfinite(self.lambda1) and np.isfinite(self.lambda2)):
            raise ArgumentError("lambda1 and lambda2 must be finite")
        if not (self.joint_attention or self.hyperedge_attention or self.bone_attention):
            raise ArgumentError("at least one attention term must stay enabled")
        resolve(AttentionMode, self.attention_mode, 'attention mode')
        return self

    def unit_frames(self) -> list:
        """ Frame count seen by each FAHT unit """
        frames, result = self.frames, []
        for unit in range(self.n_faht):
            result.append(frames)
            if unit + 1 in self.pool_after and frames >= 2:
                frames //= 2
        return result

    @property
    def output_frames(self) -> int:
        frames = self.unit_frames()[-1]
        return frames // 2 if self.n_faht in self.pool_after and frames >= 2 else frames


########################################################################################################################
# Bone features and attention
########################################################################################################################

@dataclass
class BoneFeatures:
    """ Per-head projected joint features u; the bone offset of pair (i, j) is u_i - u_j """

    projected: Tensor

    def offsets(self) -> Tensor:
        """ Materialized P (..., V, V, C'/h) """
        return bone_offsets(self.projected)

    def cross_scores(self, q) -> Tensor:
        """ ca_r[i, j] = q_i . P_ij = q_i . u_i - q_i . u_j """
        q = as_tensor(q)
        u = self.projected
        if q.shape != u.shape:
            raise DimensionError("query and bone features differ in shape", q.shape, u.shape)
        own = (q * u).sum(axis=-1, keepdims=True)
        scores_shape = q.shape[:-1] + (q.shape[-2],)
        return own.broadcast_to(scores_shape) - matmul(q, swap_last(u))


def attention_scores(q, k, hf, bone: BoneFeatures, joint: bool = True, hyperedge: bool = True,
                     bone_term: bool = True) -> Tensor:
    """ Aggregated a = sa + ca_h + ca_r over the enabled terms """
    q = as_tensor(q)
    terms = []
    if joint:
        terms.append(matmul(q, swap_last(as_tensor(k))))
    if hyperedge:
        terms.append(matmul(q, swap_last(as_tensor(hf))))
    if bone_term:
        terms.append(bone.cross_scores(q))
    if not terms:
        raise ArgumentError("no attention term enabled")
    scores = terms[0]
    for term in terms[1:]:
        scores = scores + term
    return scores


def normalize_scores(scores: Tensor, mode) -> Tensor:
    """
    Turn aggregated scores into attention weights

    :param scores: Tensor (..., V, V)
    :param mode: 'softmax' or 'literal'
    """
    mode = resolve(AttentionMode, mode, 'attention mode')
    if mode == AttentionMode.SOFTMAX:
        return softmax(scores, axis=-1)
    denominator = scores.sum(axis=-1, keepdims=True)
    small = np.abs(denominator.data) < EPS_DEN
    if np.any(small):
        index = np.argwhere(small)[0]
        raise DegenerateAttentionError(f"|row sum| < {EPS_DEN} at row {tuple(index[:-1].tolist())}",
                                       index[0] if index.size > 1 else 0)
    return scores / denominator.broadcast_to(scores.shape)


def attention_weights(q, k, hf, bone: BoneFeatures, mode='softmax', **terms) -> Tensor:
    return normalize_scores(attention_scores(q, k, hf, bone, **terms), mode)


def attention_head(q, k, v, hf, bone: BoneFeatures, mode='softmax', **terms) -> Tensor:
    """
    One head of the three-way attention: Y_i = sum_j w_ij v_j

    :param q: Queries (..., V, C'/h)
    :param k: Keys (..., V, C'/h)
    :param v: Values (..., V, C'/h)
    :param hf: Hyperedge features of this head (..., V, C'/h)
    :param bone: Projected bone features of this head
    :param mode: 'softmax' or 'literal' normalization
    """
    return matmul(attention_weights(q, k, hf, bone, mode, **terms), as_tensor(v))


def split_heads(x: Tensor, heads: int) -> Tensor:
    """ (..., V, C) -> (..., h, V, C/h) """
    lead, nodes, channels = x.shape[:-2], x.shape[-2], x.shape[-1]
    n = len(lead)
    y = x.reshape(lead + (nodes, heads, channels // heads))
    return y.transpose(tuple(range(n)) + (n + 1, n, n + 2))


def merge_heads(x: Tensor) -> Tensor:
    """ (..., h, V, C/h) -> (..., V, C) """
    lead, heads, nodes, width = x.shape[:-3], x.shape[-3], x.shape[-2], x.shape[-1]
    n = len(lead)
    y = x.transpose(tuple(range(n)) + (n + 1, n, n + 2))
    return y.reshape(lead + (nodes, heads * width))


########################################################################################################################
# Hyperedge features and temporal gating
########################################################################################################################

def _is_zero(value) -> bool:
    return not isinstance(value, Tensor) and float(value) == 0.0


def fuse_hyperedge_features(x, out_g, in_g, theta, lambda1=1.0, lambda2=1.0) -> Tensor:
    """
    H_f = lambda1 HG(x, out-phase) + lambda2 HG(x, in-phase), per frame

    :param x: Node features (..., V, C)
    :param out_g: Out-phase hypergraph shared by the batch
    :param in_g: In-phase hypergraph (per sample) or None to reuse the out-phase one
    :param theta: Convolution filter C x C'
    :param lambda1: Out-phase coefficient (float or scalar tensor)
    :param lambda2: In-phase coefficient (float or scalar tensor)
    """
    x = as_tensor(x)
    in_g = out_g if in_g is None else in_g
    terms = []
    if not _is_zero(lambda1):
        terms.append(hyperconv(x, out_g, theta) * lambda1)
    if not _is_zero(lambda2):
        terms.append(hyperconv(x, in_g, theta) * lambda2)
    if not terms:
        if x.shape[-2] != out_g.num_nodes:
            raise DimensionError("hyperconv: node axis (-2) mismatch", x.shape)
        return Tensor(np.zeros(x.shape[:-1] + (as_tensor(theta).shape[-1],)))
    return terms[0] if len(terms) == 1 else terms[0] + terms[1]


class TemporalAttention(Block):
    """ Squeeze-excitation over the frame axis: H_f + H_f * w_t with w_t in (0, 1) """

    def __init__(self, frames: int, reduction: int, rng: np.random.Generator):
        super().__init__()
        self.frames = frames
        squeezed = max(1, frames // max(1, reduction))
        self.squeeze = self.child('squeeze', Linear(frames, squeezed, rng))
        self.excite = self.child('excite', Linear(squeezed, frames, rng))
        self.last_weights = None
        self.skipped = False

    def __call__(self, hf) -> Tensor:
        """
        :param hf: Hyperedge features (B, T, V, C)
        """
        hf = as_tensor(hf)
        if hf.shape[1] != self.frames:
            raise DimensionError(f"temporal attention built for {self.frames} frames", hf.shape)
        if self.frames < 2:
            if not self.skipped:
                logger.warning("Temporal attention needs T >= 2, passing features through unchanged")
            self.skipped = True
            return hf
        pooled = hf.mean(axis=(2, 3))
        weights = sigmoid(self.excite(relu(self.squeeze(pooled))))
        self.last_weights = weights.numpy()
        gate = weights.reshape(weights.shape + (1, 1)).broadcast_to(hf.shape)
        return hf + hf * gate


def temporal_attention(hf, gate: TemporalAttention) -> Tensor:
    return gate(hf)


def temporal_pool(x, stride: int = 2) -> Tensor:
    """ Strided average over frames of (B, T, V, C); a trailing odd frame is dropped """
    x = as_tensor(x)
    frames = x.shape[1]
    if frames < stride:
        return x
    kept = frames - frames % stride
    if kept != frames:
        x = x.take(np.arange(kept), axis=1)
    b, _, v, c = x.shape
    return x.reshape(b, kept // stride, stride, v, c).mean(axis=2)


########################################################################################################################
# Transformer layers
########################################################################################################################

class HypergraphTransformerLayer(Block):
    """ ST-HT layer; with a temporal gate it becomes the STA-HT layer """

    def __init__(self, channels: int, heads: int, rng: np.random.Generator, frames: Optional[int] = None,
                 reduction: int = 2):
        super().__init__()
        self.channels = channels
        self.heads = heads
        self.theta = self.param('theta', glorot(rng, channels, channels))
        self.query = self.child('query', Linear(channels, channels, rng))
        self.key = self.child('key', Linear(channels, channels, rng))
        self.value = self.child('value', Linear(channels, channels, rng))
        self.bone = self.child('bone', Linear(channels, channels, rng, bias=False))
        self.output = self.child('output', Linear(channels, channels, rng))
        self.temporal = None if frames is None else self.child('temporal', TemporalAttention(frames, reduction, rng))

    def __call__(self, x, out_g, in_g, cfg: EncoderConfig, lambda1=1.0, lambda2=1.0) -> Tensor:
        hf = fuse_hyperedge_features(x, out_g, in_g, self.theta, lambda1, lambda2)
        if self.temporal is not None and cfg.temporal_attention:
            hf = temporal_attention(hf, self.temporal)
        bone = BoneFeatures(split_heads(self.bone(x), self.heads))
        return multi_head_st_ht(x, hf, bone, self, cfg)


def multi_head_st_ht(x, hf, bone: BoneFeatures, layer: HypergraphTransformerLayer, cfg: EncoderConfig) -> Tensor:
    """
    Project q, k, v per head, attend, concatenate the heads and add the residual

    :param x: Layer input (B, T, V, C')
    :param hf: Hyperedge features (B, T, V, C')
    :param bone: Projected bone features, already split into heads
    :param layer: Owner of the projections
    :param cfg: Encoder configuration
    """
    x = as_tensor(x)
    if x.shape[-1] % cfg.heads:
        raise ArgumentError(f"{x.shape[-1]} channels not divisible by {cfg.heads} heads")
    q = split_heads(layer.query(x), cfg.heads)
    k = split_heads(layer.key(x), cfg.heads)
    v = split_heads(layer.value(x), cfg.heads)
    heads = attention_head(q, k, v, split_heads(as_tensor(hf), cfg.heads), bone, cfg.attention_mode,
                           joint=cfg.joint_attention, hyperedge=cfg.hyperedge_attention,
                           bone_term=cfg.bone_attention)
    return x + layer.output(merge_heads(heads))


class FahtUnit(Block):
    """ Frame Attentive Hypergraph Transformer unit: ST-HT then STA-HT """

    def __init__(self, channels: int, heads: int, frames: int, reduction: int, rng: np.random.Generator):
        super().__init__()
        self.st = self.child('st', HypergraphTransformerLayer(channels, heads, rng))
        self.sta = self.child('sta', HypergraphTransformerLayer(channels, heads, rng, frames, reduction))

    def __call__(self, x, out_g, in_g, cfg: EncoderConfig, lambda1=1.0, lambda2=1.0) -> Tensor:
        y = self.st(x, out_g, in_g, cfg, lambda1, lambda2)
        return self.sta(y, out_g, in_g, cfg, lambda1, lambda2)


########################################################################################################################
# Hypergraph encoder
########################################################################################################################

class Encoder(Block):
    """ Input embedding followed by the 2:3 FAHT stack around the quantizer """

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg.validate()
        channels = cfg.hidden_channels
        self.embed = self.child('embed', Linear(cfg.in_channels, channels, rng))
        if cfg.trainable_lambdas:
            self.lambda1 = self.param('lambda1', np.array(cfg.lambda1))
            self.lambda2 = self.param('lambda2', np.array(cfg.lambda2))
        else:
            self.lambda1, self.lambda2 = cfg.lambda1, cfg.lambda2
        self.units = [self.child(f'unit{i}', FahtUnit(channels, cfg.heads, frames, cfg.se_reduction, rng))
                      for i, frames in enumerate(cfg.unit_frames())]

    def __call__(self, batch, out_g, quantizer=None, adjacency=None, fixed_assignments=None):
        return self.forward(batch, out_g, quantizer, adjacency, fixed_assignments)

    def forward(self, batch, out_g, quantizer=None, adjacency=None, fixed_assignments=None):
        """
        Run the FAHT stack; the quantizer turns the first group's output into the in-phase hypergraph.

        :param batch: Skeletons (N*M, V, T, C) after person merge
        :param out_g: Out-phase hypergraph H^n
        :param quantizer: In-phase quantizer, None disables the in-phase path
        :param adjacency: Skeleton adjacency for the quantizer's decoder
        :param fixed_assignments: Hyperedge assignments to reuse instead of the argmin
        :return: (E_enc (N*M, V, T', C'), quantizer artifacts or None)
        :raises DegenerateAttentionError: Literal attention row sum near zero; ``index`` is the merged N*M row
        """
        cfg = self.cfg
        batch = as_tensor(batch)
        if batch.ndim != 4 or batch.shape[1] != out_g.num_nodes or batch.shape[3] != cfg.in_channels:
            raise DimensionError(f"encoder expects (N*M, {out_g.num_nodes}, T, {cfg.in_channels})", batch.shape)
        if batch.shape[2] != cfg.frames:
            raise DimensionError(f"encoder built for {cfg.frames} frames", batch.shape)

        lambda2 = self.lambda2 if cfg.in_phase and quantizer is not None else 0.0
        x = self.embed(batch.transpose(0, 2, 1, 3))
        in_g, artifacts = None, None
        for index, unit in enumerate(self.units):
            if index == cfg.split[0] and cfg.in_phase and quantizer is not None:
                artifacts = quantizer(x, adjacency, fixed_assignments)
                in_g = artifacts.hypergraph
            x = unit(x, out_g, in_g, cfg, self.lambda1, lambda2)
            if index + 1 in cfg.pool_after:
                x = temporal_pool(x)
        logger.debug(f"Encoder output frames={x.shape[1]}, channels={x.shape[3]}")
        return x.transpose(0, 2, 1, 3), artifacts
