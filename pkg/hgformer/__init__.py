# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText

from .numerics import Tensor, Parameter, GradTape, grad_check
from .hypergraph import Hypergraph, DegreePair, new_random, degree_pair, hyperconv, adjacency_conv
from .encoder import EncoderConfig, Encoder
from .quantizer import Codebook, Quantizer, InPhaseHypergraph
from .adaptive_decoder import HypergraphDecoder, HyperedgeAttention, KMeansResult, kmeans, generate_outphase
from .losses import LossBundle, cross_entropy, reconstruction, total_loss
from .model import HGFormer, ModelState, ForwardOutput, forward, train_step, evaluate, lr_schedule, \
    init_state, save_checkpoint, load_checkpoint
from .data import SkeletonSequence, SkeletonBatch, load_jsonl, save_jsonl, synth_generate, skeleton_adjacency
from .config import RunConfig
from .training import Dataset, prepare_dataset, fit, export_run
from .enums import ExitCode, ActivationKind, AttentionMode, HypergraphUpdate, AblationVariant
from .exceptions import HGFormerError, ArgumentError, DimensionError, SingularDegreeError, \
    DegenerateAttentionError, NumericError, ParseError, ConfigError, GradCheckError


__author__ = "hgformer authors"
__contact__ = "hgformer@users.noreply.github.com"
__version__ = '0.1.0'
__license__ = "BSD3"
__status__ = 'Development'
__all__ = [
    # global methods
    'grad_check',
    'new_random',
    'degree_pair',
    'hyperconv',
    'adjacency_conv',
    'kmeans',
    'generate_outphase',
    'cross_entropy',
    'reconstruction',
    'total_loss',
    'forward',
    'train_step',
    'evaluate',
    'lr_schedule',
    'init_state',
    'save_checkpoint',
    'load_checkpoint',
    'load_jsonl',
    'save_jsonl',
    'synth_generate',
    'skeleton_adjacency',
    'prepare_dataset',
    'fit',
    'export_run',
    # classes
    'Tensor',
    'Parameter',
    'GradTape',
    'Hypergraph',
    'DegreePair',
    'EncoderConfig',
    'Encoder',
    'Codebook',
    'Quantizer',
    'InPhaseHypergraph',
    'HypergraphDecoder',
    'HyperedgeAttention',
    'KMeansResult',
    'LossBundle',
    'HGFormer',
    'ModelState',
    'ForwardOutput',
    'SkeletonSequence',
    'SkeletonBatch',
    'RunConfig',
    'Dataset',
    # enums
    'ExitCode',
    'ActivationKind',
    'AttentionMode',
    'HypergraphUpdate',
    'AblationVariant',
    # exceptions
    'HGFormerError',
    'ArgumentError',
    'DimensionError',
    'SingularDegreeError',
    'DegenerateAttentionError',
    'NumericError',
    'ParseError',
    'ConfigError',
    'GradCheckError'
]
