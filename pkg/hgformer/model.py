# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText

"""
Full model: encoder -> HAN -> residual fusion -> decoder taps -> classifier, with the out-phase hypergraph carried
from one training iteration to the next.
"""

import json
from collections import OrderedDict
from dataclasses import dataclass
from logging import getLogger
from typing import Iterable, Optional

import numpy as np

from .adaptive_decoder import HyperedgeAttention, HypergraphDecoder, decoder_widths, fuse_residual, \
    generate_outphase, han, hypdec_forward
from .config import RunConfig
from .encoder import Encoder
from .exceptions import ArgumentError, ConfigError, DegenerateAttentionError, NumericError
from .hypergraph import Hypergraph, new_random
from .layers import Block, Linear
from .losses import LossBundle, cross_entropy, reconstruction, total_loss
from .numerics import Tensor, softmax
from .quantizer import Quantizer

logger = getLogger('HGFORMER:MODEL')

CHECKPOINT_VERSION = 1


########################################################################################################################
# Model and state
########################################################################################################################

class HGFormer(Block):
    """ All trainable blocks of the network """

    def __init__(self, config: RunConfig, num_nodes: int, num_classes: int, rng: np.random.Generator):
        super().__init__()
        channels = config.hidden_channels
        self.num_nodes = num_nodes
        self.num_classes = num_classes
        self.encoder = self.child('encoder', Encoder(config.encoder_config(), rng))
        self.quantizer = None
        if config.in_phase:
            self.quantizer = self.child('quantizer', Quantizer(
                channels, config.hyperedges, config.low_dim, config.in_channels, rng,
                tuple(config.decoder_channels), config.decoder_tap))
        self.han = self.child('han', HyperedgeAttention(channels, num_nodes, rng, config.han_reduction))
        self.decoder = self.child('decoder', HypergraphDecoder(
            decoder_widths(channels, config.decoder_channels, config.low_dim, config.decoder_tap,
                           config.in_channels), config.decoder_tap, rng))
        self.classifier = self.child('classifier', Linear(channels, num_classes, rng))


@dataclass
class ModelState:
    """ Parameters, optimizer buffers and the persistent out-phase hypergraph """

    model: HGFormer
    hypergraph: Hypergraph
    velocity: dict
    config: RunConfig
    iteration: int = 0
    epoch: int = 0

    @property
    def params(self) -> 'OrderedDict':
        return self.model.named_parameters()

    @property
    def num_nodes(self) -> int:
        return self.model.num_nodes

    @property
    def num_classes(self) -> int:
        return self.model.num_classes


def init_state(config: RunConfig, num_nodes: int, num_classes: int) -> ModelState:
    """
    Fresh parameters and a random out-phase hypergraph with identity weights

    :param config: Run configuration
    :param num_nodes: Joint count V
    :param num_classes: Class count
    """
    config.validate()
    if num_nodes < config.hyperedges:
        raise ConfigError(f"{num_nodes} joints cannot fill {config.hyperedges} hyperedges")
    model = HGFormer(config, num_nodes, num_classes, np.random.default_rng(config.seed))
    velocity = OrderedDict((name, np.zeros(p.shape)) for name, p in model.named_parameters().items())
    hypergraph = new_random(num_nodes, config.hyperedges, config.seed)
    return ModelState(model=model, hypergraph=hypergraph, velocity=velocity, config=config)


########################################################################################################################
# Forward pass
########################################################################################################################

@dataclass
class ForwardOutput:
    logits: Tensor
    probs: Tensor
    recon1: Optional[Tensor]
    recon2: Tensor
    losses: LossBundle
    next_hypergraph: Optional[Hypergraph]
    embeddings: np.ndarray
    attention: np.ndarray
    assignments: Optional[np.ndarray]

    @property
    def predictions(self) -> np.ndarray:
        return np.argmax(self.probs.data, axis=1)


def forward(batch, state: ModelState, train: bool = False, fixed_assignments=None,
            regenerate: bool = True) -> ForwardOutput:
    """
    One pass of the whole network over a batch.

    :param batch: SkeletonBatch (N, M, V, T, C); padded persons are left out of the logit average and the
        reconstruction losses
    :param state: Model state, not modified here
    :param train: Compute the next out-phase hypergraph
    :param fixed_assignments: In-phase assignments (N*M, V) to reuse instead of the argmin
    :param regenerate: With train, whether this iteration regenerates the hypergraph
    """
    cfg, model = state.config, state.model
    n, m = batch.x.shape[:2]
    if batch.x.shape[2] != model.num_nodes:
        raise ArgumentError(f"batch has {batch.x.shape[2]} joints, the model {model.num_nodes}")

    try:
        e_enc, quant = model.encoder(batch.merged(), state.hypergraph, model.quantizer, batch.adjacency,
                                     fixed_assignments)
    except DegenerateAttentionError as e:
        # encoder rows are merged N*M
        raise DegenerateAttentionError(f"{e.description} (person {e.index % m})", e.index // m) from e
    attention = han(e_enc, model.han)
    e_f = fuse_residual(e_enc, attention.A_t, cfg.alpha)
    recon2, e_c = hypdec_forward(e_f.mean(axis=2), batch.adjacency, model.decoder)

    features = e_f.mean(axis=(1, 2))
    share = batch.person_weights()
    person_logits = model.classifier(features).reshape(n, m, model.num_classes)
    logits = (person_logits * Tensor(np.broadcast_to(share[:, :, None], person_logits.shape).copy())).sum(axis=1)
    probs = softmax(logits, axis=-1)

    rows = batch.real_rows()
    target = batch.pooled_target()[rows]
    ce = cross_entropy(probs, batch.labels)
    rec2 = reconstruction(target, recon2.take(rows))
    if quant is not None:
        rec1 = reconstruction(target, quant.recon.take(rows))
        quant_loss, recon1, assignments = quant.loss, quant.recon, quant.assignments
    else:
        rec1, quant_loss, recon1, assignments = 0.0, 0.0, None, None
    losses = total_loss(ce, rec1, rec2, quant_loss, cfg.betas)

    next_hypergraph = None
    if train and regenerate and cfg.out_phase and np.isfinite(losses.total):
        next_hypergraph = generate_outphase(attention.attn, e_c, cfg.hyperedges, seed=cfg.seed + state.iteration,
                                            max_iter=cfg.kmeans_iter)
    return ForwardOutput(logits=logits, probs=probs, recon1=recon1, recon2=recon2, losses=losses,
                         next_hypergraph=next_hypergraph,
                         embeddings=(features.data.reshape(n, m, -1) * share[:, :, None]).sum(axis=1),
                         attention=attention.attn.numpy(), assignments=assignments)


########################################################################################################################
# Optimizer
########################################################################################################################

def nesterov_step(params: dict, velocity: dict, lr: float, momentum: float = 0.9, weight_decay: float = 0.0,
                  nesterov: bool = True):
    """
    SGD with (Nesterov) momentum; weight decay is applied to the weights directly, outside the momentum

    :param params: Named parameters, their ``grad`` holds the gradient (None counts as zero)
    :param velocity: Named momentum buffers, updated in place
    :param lr: Learning rate
    :param momentum: Momentum coefficient
    :param weight_decay: Decoupled decay coefficient
    :param nesterov: Look-ahead update g + momentum * v instead of v
    """
    for name, p in params.items():
        grad = np.zeros(p.shape) if p.grad is None else p.grad
        buf = momentum * velocity.get(name, np.zeros(p.shape)) + grad
        step = grad + momentum * buf if nesterov else buf
        p.assign(p.data - lr * step - lr * weight_decay * p.data)
        velocity[name] = buf


def lr_schedule(epoch: int, base: float = 0.025, milestones=(110, 120), factor: float = 0.1) -> float:
    """ Step schedule: ``base`` scaled by ``factor`` once per milestone already reached """
    if epoch < 0:
        raise ArgumentError("epoch must be non-negative")
    return base * factor ** sum(1 for milestone in milestones if epoch >= milestone)


def train_step(batch, state: ModelState, lr: float, regenerate: bool = True):
    """
    Forward, backward, optimizer update and hypergraph hand-over for one batch

    :return: (state, forward output)
    """
    if lr < 0.0:
        raise ArgumentError("learning rate must be non-negative")
    cfg = state.config
    state.model.zero_grad()
    output = forward(batch, state, train=True, regenerate=regenerate)
    components = output.losses.as_dict()
    if not all(np.isfinite(v) for v in components.values()):
        raise NumericError(f"non-finite loss at iteration {state.iteration}", components)

    output.losses.objective.backward()
    nesterov_step(state.params, state.velocity, lr, cfg.momentum, cfg.weight_decay, cfg.nesterov)
    if output.next_hypergraph is not None:
        state.hypergraph = output.next_hypergraph
        logger.debug(f"Iteration {state.iteration}: installed {state.hypergraph!r}")
    state.iteration += 1
    return state, output


########################################################################################################################
# Evaluation
########################################################################################################################

def accuracy_metrics(probs: np.ndarray, labels: np.ndarray, num_classes: int) -> dict:
    """ Top-1, top-5 and per-class accuracy of probability rows """
    probs, labels = np.asarray(probs), np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ArgumentError("cannot score an empty dataset")
    predictions = np.argmax(probs, axis=1)
    k = min(5, probs.shape[1])
    top_k = np.argsort(-probs, axis=1, kind='stable')[:, :k]
    per_class = {}
    for c in range(num_classes):
        members = labels == c
        if members.any():
            per_class[c] = float((predictions[members] == c).mean())
    return {
        'top1': float((predictions == labels).mean()),
        'top5': float((top_k == labels[:, None]).any(axis=1).mean()),
        'per_class': per_class,
        'count': int(labels.size),
    }


def evaluate(batches: Iterable, state: ModelState) -> dict:
    """
    Score the model on batches without touching its state

    :param batches: Iterable of SkeletonBatch
    :return: Accuracies, mean loss components and the raw predictions
    """
    probs, labels, ids, totals, count = [], [], [], {}, 0
    for batch in batches:
        output = forward(batch, state, train=False)
        probs.append(output.probs.numpy())
        labels.append(batch.labels)
        ids.append(batch.ids)
        for key, value in output.losses.as_dict().items():
            totals[key] = totals.get(key, 0.0) + value * len(batch)
        count += len(batch)
    if not count:
        raise ArgumentError("cannot evaluate an empty dataset")
    probs, labels = np.concatenate(probs), np.concatenate(labels)
    metrics = accuracy_metrics(probs, labels, state.num_classes)
    metrics['losses'] = {key: value / count for key, value in totals.items()}
    metrics['probs'] = probs
    metrics['labels'] = labels
    metrics['ids'] = np.concatenate(ids)
    return metrics


########################################################################################################################
# Checkpoints
########################################################################################################################

def save_checkpoint(path: str, state: ModelState):
    """ Write parameters, momentum buffers, H^n, counters and the config to one npz container """
    arrays = {'meta/version': np.array(CHECKPOINT_VERSION),
              'meta/iteration': np.array(state.iteration),
              'meta/epoch': np.array(state.epoch),
              'meta/num_nodes': np.array(state.num_nodes),
              'meta/num_classes': np.array(state.num_classes),
              'meta/config': np.array(state.config.dumps())}
    for name, p in state.params.items():
        arrays[f'param/{name}'] = p.data
        arrays[f'velocity/{name}'] = state.velocity[name]
    for key, value in state.hypergraph.to_arrays().items():
        arrays[f'hypergraph/{key}'] = value
    with open(path, 'wb') as f:
        np.savez(f, **arrays)
    logger.info(f"Checkpoint saved: {path} (epoch {state.epoch}, iteration {state.iteration})")


def _stored(data: dict, key: str, shape: tuple) -> np.ndarray:
    if key not in data:
        raise ConfigError(f"checkpoint misses '{key}'")
    if data[key].shape != shape:
        raise ConfigError(f"'{key}' has shape {data[key].shape}, the model expects {shape}")
    return data[key]


def load_checkpoint(path: str) -> ModelState:
    """ Rebuild the model from the stored config, then restore every array and counter """
    try:
        container = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read checkpoint {path} ({e})")
    with container:
        data = {key: container[key] for key in container.files}
    if 'meta/version' not in data or int(data['meta/version']) != CHECKPOINT_VERSION:
        raise ConfigError(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")
    config = RunConfig.from_dict(json.loads(str(data['meta/config'])))
    state = init_state(config, int(data['meta/num_nodes']), int(data['meta/num_classes']))
    for name, p in state.params.items():
        p.assign(_stored(data, f'param/{name}', p.shape))
        state.velocity[name] = _stored(data, f'velocity/{name}', p.shape).copy()
    state.hypergraph = Hypergraph.from_arrays(data['hypergraph/incidence'], data['hypergraph/weights'])
    state.iteration = int(data['meta/iteration'])
    state.epoch = int(data['meta/epoch'])
    logger.info(f"Checkpoint loaded: {path} (epoch {state.epoch}, iteration {state.iteration})")
    return state
