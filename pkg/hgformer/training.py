# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


import csv
import os
from collections import OrderedDict
from dataclasses import dataclass, field
from logging import getLogger
from typing import List, Optional

import numpy as np

from .config import RunConfig, ablation_config, ablation_variants, thread_count
from .data import SkeletonSequence, iter_batches, layout_bones, load_manifest, load_split, make_batch, prefetch, \
    preprocess_all, skeleton_adjacency, synth_generate
from .enums import HypergraphUpdate, resolve
from .model import ModelState, evaluate, forward, init_state, lr_schedule, save_checkpoint, train_step
from .numerics import grad_check

logger = getLogger('HGFORMER:TRAIN')

METRICS_COLUMNS = ('epoch', 'ce', 'rec1', 'rec2', 'quant', 'total', 'train_acc', 'val_acc', 'lr')


########################################################################################################################
# Dataset
########################################################################################################################

@dataclass
class Dataset:
    layout: str
    num_classes: int
    adjacency: np.ndarray
    train: List[SkeletonSequence]
    val: List[SkeletonSequence] = field(default_factory=list)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]


def prepare_dataset(config: RunConfig) -> Dataset:
    """
    Load the manifest's splits, or synthesize train/val sets when no manifest is configured; then preprocess

    :param config: Run configuration
    """
    if config.manifest:
        manifest = load_manifest(config.manifest)
        if manifest.layout != config.layout:
            logger.warning(f"Manifest layout '{manifest.layout}' replaces configured '{config.layout}'")
        layout, num_classes = manifest.layout, manifest.num_classes
        train, val = load_split(manifest, 'train'), load_split(manifest, 'val')
    else:
        layout, num_classes = config.layout, config.synth_classes
        num_joints, _ = layout_bones(layout)
        train = synth_generate(num_classes, config.synth_per_class, num_joints, config.synth_frames, config.seed,
                               config.synth_noise, config.num_persons)
        val = synth_generate(num_classes, max(1, config.synth_per_class // 4), num_joints, config.synth_frames,
                             config.seed + 1, config.synth_noise, config.num_persons)
    threads = thread_count()
    return Dataset(layout=layout, num_classes=num_classes, adjacency=skeleton_adjacency(layout),
                   train=preprocess_all(train, config.frames, threads), val=preprocess_all(val, config.frames, threads))


def dataset_batches(dataset: Dataset, split: str, config: RunConfig, shuffle: bool = False, seed: int = 0):
    sequences = getattr(dataset, split)
    return iter_batches(sequences, config.batch_size, dataset.adjacency, shuffle, seed, config.num_persons)


########################################################################################################################
# Training loop
########################################################################################################################

class MetricsWriter:
    """ Per-epoch metrics CSV with a fixed column order """

    def __init__(self, path: str, append: bool = False):
        self.path = path
        exists = append and os.path.isfile(path)
        self._file = open(path, 'a' if exists else 'w', newline='', encoding='utf8')
        self._writer = csv.writer(self._file)
        if not exists:
            self._writer.writerow(METRICS_COLUMNS)

    def write(self, row: dict):
        self._writer.writerow([_cell(row.get(name)) for name in METRICS_COLUMNS])
        self._file.flush()

    def close(self):
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self.close()


def _cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def train_epoch(state: ModelState, dataset: Dataset, lr: float) -> dict:
    """ One pass over the shuffled training split; returns the sample-weighted loss means and accuracy """
    cfg = state.config
    per_epoch = resolve(HypergraphUpdate, cfg.hypergraph_update, 'hypergraph update') == HypergraphUpdate.EPOCH
    num_batches = -(-len(dataset.train) // cfg.batch_size)
    batches = prefetch(dataset_batches(dataset, 'train', cfg, shuffle=True, seed=cfg.seed + state.epoch),
                       cfg.prefetch)
    totals, correct, count = {}, 0, 0
    for index, batch in enumerate(batches):
        regenerate = not per_epoch or index == num_batches - 1
        state, output = train_step(batch, state, lr, regenerate)
        for key, value in output.losses.as_dict().items():
            totals[key] = totals.get(key, 0.0) + value * len(batch)
        correct += int((output.predictions == batch.labels).sum())
        count += len(batch)
    row = {key: value / max(count, 1) for key, value in totals.items()}
    row['train_acc'] = correct / max(count, 1)
    return row


def fit(config: RunConfig, dataset: Dataset, out_dir: str, state: Optional[ModelState] = None) -> ModelState:
    """
    Train until ``config.epochs``, writing metrics.csv and checkpoints to ``out_dir``.

    :param config: Run configuration (a resumed state keeps its own)
    :param dataset: Preprocessed dataset
    :param out_dir: Output directory
    :param state: State to resume from
    """
    os.makedirs(out_dir, exist_ok=True)
    resumed = state is not None
    if state is None:
        state = init_state(config, dataset.num_nodes, dataset.num_classes)
    cfg = state.config
    logger.info(f"Training {cfg.epochs} epoch(s) from epoch {state.epoch}: {len(dataset.train)} train / "
                f"{len(dataset.val)} val sequences, layout {dataset.layout}")

    with MetricsWriter(os.path.join(out_dir, 'metrics.csv'), append=resumed) as metrics:
        while state.epoch < cfg.epochs:
            lr = lr_schedule(state.epoch, cfg.lr, cfg.lr_decay_epochs, cfg.lr_decay_factor)
            row = train_epoch(state, dataset, lr)
            if dataset.val:
                row['val_acc'] = evaluate(dataset_batches(dataset, 'val', cfg), state)['top1']
            row.update(epoch=state.epoch, lr=lr)
            metrics.write(row)
            logger.info(f"Epoch {state.epoch}: total={row['total']:.5f}, train_acc={row['train_acc']:.3f}, "
                        f"val_acc={row.get('val_acc', float('nan')):.3f}, lr={lr:g}")
            state.epoch += 1
            if cfg.checkpoint_every and state.epoch % cfg.checkpoint_every == 0 and state.epoch < cfg.epochs:
                save_checkpoint(os.path.join(out_dir, f'epoch{state.epoch:04d}.npz'), state)
    save_checkpoint(os.path.join(out_dir, 'final.npz'), state)
    return state


########################################################################################################################
# Gradient check
########################################################################################################################

def parameter_group(name: str) -> str:
    """ 'encoder.unit0.st.query.weight' -> 'encoder.unit0.st.query' """
    return name.rsplit('.', 1)[0] if '.' in name else name


def gradient_report(state: ModelState, batch, eps: float = 1e-5, coords: int = 3, floor: float = 1e-5,
                    seed: int = 0) -> 'OrderedDict[str, float]':
    """
    Maximum relative error between reverse-mode and central-difference gradients per parameter group

    :param state: Model state
    :param batch: Small batch to differentiate the total loss on
    :param eps: Central-difference step
    :param coords: Coordinates sampled per parameter
    :param floor: Denominator floor of the relative error
    :param seed: Seed of the coordinate sampling
    """
    rng = np.random.default_rng(seed)
    report = OrderedDict()

    def objective(_):
        return forward(batch, state, train=False).losses.objective

    for name, p in state.params.items():
        indices = rng.choice(p.size, size=min(coords, p.size), replace=False)
        state.model.zero_grad()
        error = grad_check(objective, p, eps=eps, indices=indices, floor=floor)
        group = parameter_group(name)
        report[group] = max(report.get(group, 0.0), error)
        logger.debug(f"grad_check {name}: max relative error {error:.3e}")
    state.model.zero_grad()
    return report


def toy_batch(config: RunConfig, dataset: Dataset, size: int = 2):
    """ The first ``size`` training sequences as one batch """
    return make_batch(dataset.train[:size], dataset.adjacency, config.num_persons)


########################################################################################################################
# Ablation and export
########################################################################################################################

def run_ablation(config: RunConfig, dataset: Dataset, out_dir: str, variants=None) -> 'OrderedDict[str, dict]':
    """ Train each rung of the ladder from scratch and collect its final accuracies """
    results = OrderedDict()
    for variant in variants or ablation_variants():
        variant_cfg = ablation_config(config, variant)
        logger.info(f"Ablation variant '{variant}'")
        state = fit(variant_cfg, dataset, os.path.join(out_dir, variant))
        train_metrics = evaluate(dataset_batches(dataset, 'train', variant_cfg), state)
        val = evaluate(dataset_batches(dataset, 'val', variant_cfg), state)['top1'] if dataset.val else None
        results[variant] = {'train_acc': train_metrics['top1'], 'val_acc': val,
                            'total': train_metrics['losses']['total']}
    return results


def export_run(state: ModelState, dataset: Dataset, split: str, out_dir: str) -> dict:
    """
    Write embeddings.csv, hyperedges.csv and predictions.csv for one split

    hyperedges.csv holds one row per joint with the weight W_j of its hyperedge in the final out-phase hypergraph.

    :return: Row counts per written file
    """
    os.makedirs(out_dir, exist_ok=True)
    rows_embed, rows_pred = [], []
    for batch in dataset_batches(dataset, split, state.config):
        output = forward(batch, state, train=False)
        for row, sample_id in enumerate(batch.ids):
            label = int(batch.labels[row])
            rows_embed.append([int(sample_id), label] + [repr(float(v)) for v in output.embeddings[row]])
            probs = output.probs.data[row]
            rows_pred.append([int(sample_id), label, int(np.argmax(probs))] + [repr(float(v)) for v in probs])

    channels = state.config.hidden_channels
    num_classes = state.num_classes
    with open(os.path.join(out_dir, 'embeddings.csv'), 'w', newline='', encoding='utf8') as f:
        writer = csv.writer(f)
        writer.writerow(['sample_id', 'label'] + [f'e{i}' for i in range(channels)])
        writer.writerows(rows_embed)
    with open(os.path.join(out_dir, 'predictions.csv'), 'w', newline='', encoding='utf8') as f:
        writer = csv.writer(f)
        writer.writerow(['sample_id', 'label', 'predicted'] + [f'p{i}' for i in range(num_classes)])
        writer.writerows(rows_pred)

    g = state.hypergraph
    assignment = g.assignment()
    with open(os.path.join(out_dir, 'hyperedges.csv'), 'w', newline='', encoding='utf8') as f:
        writer = csv.writer(f)
        writer.writerow(['joint_id', 'hyperedge_id', 'weight'])
        for joint, edge in enumerate(assignment):
            writer.writerow([joint, int(edge), repr(float(g.weights[edge]))])
    logger.info(f"Exported {len(rows_embed)} sample(s) of split '{split}' to {out_dir}")
    return {'embeddings': len(rows_embed), 'predictions': len(rows_pred), 'hyperedges': g.num_nodes}
