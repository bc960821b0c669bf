# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText

"""
Skeleton datasets: JSON-lines storage, the synthetic generator, preprocessing and skeleton layouts.

One dataset line::

    {"label": 2, "subject": 1, "view": 0, "joints": [[[[x, y, z], ...T_raw], ...V], ...M]}
"""

import json
import os
import queue
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from logging import getLogger
from typing import Iterable, Iterator, List, Optional

import numpy as np

from .exceptions import ArgumentError, ParseError
from .numerics import Tensor, as_tensor

logger = getLogger('HGFORMER:DATA')


########################################################################################################################
# Skeleton layouts
########################################################################################################################

# 1-based (child, parent) bones
NWUCLA_BONES = [(1, 2), (2, 3), (4, 3), (5, 3), (6, 5), (7, 6), (8, 7), (9, 3), (10, 9), (11, 10), (12, 11),
                (13, 1), (14, 13), (15, 14), (16, 15), (17, 1), (18, 17), (19, 18), (20, 19)]

NTU_BONES = [(1, 2), (2, 21), (3, 21), (4, 3), (5, 21), (6, 5), (7, 6), (8, 7), (9, 21), (10, 9), (11, 10),
             (12, 11), (13, 1), (14, 13), (15, 14), (16, 15), (17, 1), (18, 17), (19, 18), (20, 19), (22, 23),
             (23, 8), (24, 25), (25, 12)]

LAYOUTS = {
    'nwucla20': (20, NWUCLA_BONES),
    'ntu25': (25, NTU_BONES),
}


def layout_bones(layout: str):
    """
    Joint count and 0-based bone list of a layout

    :param layout: 'nwucla20', 'ntu25' or 'chain-V'
    """
    if layout in LAYOUTS:
        num_joints, bones = LAYOUTS[layout]
        return num_joints, [(i - 1, j - 1) for i, j in bones]
    if layout.startswith('chain-'):
        try:
            num_joints = int(layout[len('chain-'):])
        except ValueError:
            num_joints = 0
        if num_joints >= 1:
            return num_joints, [(i, i + 1) for i in range(num_joints - 1)]
    raise ArgumentError(f"Unknown skeleton layout '{layout}', use one of: {', '.join(LAYOUTS)}, chain-V")


def skeleton_adjacency(layout: str) -> np.ndarray:
    """ Symmetric binary bone adjacency with self-loops """
    num_joints, bones = layout_bones(layout)
    adjacency = np.eye(num_joints)
    for i, j in bones:
        adjacency[i, j] = adjacency[j, i] = 1.0
    return adjacency


def bone_offsets(x) -> Tensor:
    """
    Pairwise joint differences raw(i, j) = x_i - x_j

    :param x: Joint features (..., V, C)
    :return: Tensor (..., V, V, C)
    """
    x = as_tensor(x)
    lead, nodes, channels = x.shape[:-2], x.shape[-2], x.shape[-1]
    full = lead + (nodes, nodes, channels)
    rows = x.reshape(lead + (nodes, 1, channels)).broadcast_to(full)
    cols = x.reshape(lead + (1, nodes, channels)).broadcast_to(full)
    return rows - cols


########################################################################################################################
# Sequences and batches
########################################################################################################################

@dataclass
class SkeletonSequence:
    """ Coordinates (M, V, T_raw, 3) of one labelled sample """

    joints: np.ndarray
    label: int
    subject: int = 0
    view: int = 0

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.joints.ndim != 4 or self.joints.shape[3] != 3 or self.joints.shape[2] < 1:
            raise ArgumentError(f"joints must be shaped (M, V, T_raw, 3), got {self.joints.shape}")
        if not np.all(np.isfinite(self.joints)):
            raise ArgumentError("joint coordinates must be finite")
        if int(self.label) < 0:
            raise ArgumentError(f"negative label {self.label}")
        self.label = int(self.label)

    @property
    def num_persons(self) -> int:
        return self.joints.shape[0]

    @property
    def num_joints(self) -> int:
        return self.joints.shape[1]

    @property
    def num_frames(self) -> int:
        return self.joints.shape[2]

    def to_dict(self) -> dict:
        return {'label': self.label, 'subject': self.subject, 'view': self.view, 'joints': self.joints.tolist()}


@dataclass
class SkeletonBatch:
    """
    Stacked sequences x (N, M, V, T, C) with labels and the skeleton adjacency.

    ``persons`` (N, M) marks the real persons; zero padding is masked out of the logit average and the
    reconstruction targets. Without a mask every person with a non-zero coordinate counts as real.
    """

    x: np.ndarray
    labels: np.ndarray
    adjacency: np.ndarray
    ids: np.ndarray = field(default=None)
    persons: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.ids is None:
            self.ids = np.arange(self.labels.size)
        if self.persons is None:
            self.persons = np.any(self.x != 0.0, axis=(2, 3, 4))
        self.persons = np.array(self.persons, dtype=bool).reshape(self.x.shape[:2])
        # all-zero samples keep every person
        self.persons[~self.persons.any(axis=1)] = True

    def __len__(self):
        return self.x.shape[0]

    @property
    def num_persons(self) -> int:
        return self.x.shape[1]

    def merged(self) -> Tensor:
        """ Persons folded into the batch axis: (N*M, V, T, C) """
        n, m, v, t, c = self.x.shape
        return Tensor(self.x.reshape(n * m, v, t, c))

    def pooled_target(self) -> np.ndarray:
        """ Time-pooled input coordinates (N*M, V, C), the reconstruction target """
        return self.x.mean(axis=3).reshape(-1, self.x.shape[2], self.x.shape[4])

    def person_weights(self) -> np.ndarray:
        """ (N, M) weights averaging over the real persons of each sample """
        return self.persons / self.persons.sum(axis=1, keepdims=True)

    def real_rows(self) -> np.ndarray:
        """ Indices of the real persons along the merged N*M axis """
        return np.flatnonzero(self.persons.reshape(-1))


def _pad_persons(joints: np.ndarray, num_persons: int) -> np.ndarray:
    if joints.shape[0] == num_persons:
        return joints
    if joints.shape[0] > num_persons:
        logger.warning(f"Sequence has {joints.shape[0]} persons, keeping the first {num_persons}")
        return joints[:num_persons]
    pad = np.zeros((num_persons - joints.shape[0],) + joints.shape[1:])
    return np.concatenate([joints, pad], axis=0)


def make_batch(sequences: List[SkeletonSequence], adjacency: np.ndarray, num_persons: Optional[int] = None,
               ids=None) -> SkeletonBatch:
    if not sequences:
        raise ArgumentError("cannot build an empty batch")
    num_persons = num_persons or max(s.num_persons for s in sequences)
    shapes = {s.joints.shape[1:] for s in sequences}
    if len(shapes) != 1:
        raise ArgumentError(f"sequences differ in (V, T, C): {sorted(shapes)}; resize them first")
    x = np.stack([_pad_persons(s.joints, num_persons) for s in sequences])
    persons = np.arange(num_persons)[None, :] < np.array([s.num_persons for s in sequences])[:, None]
    return SkeletonBatch(x=x, labels=np.array([s.label for s in sequences]), adjacency=adjacency, ids=ids,
                         persons=persons)


########################################################################################################################
# JSON-lines storage
########################################################################################################################

def _parse_line(text: str, path: str, line: int, num_joints: Optional[int]) -> SkeletonSequence:
    try:
        record = json.loads(text)
    except ValueError as e:
        raise ParseError(f"invalid JSON ({e})", path, line)
    if not isinstance(record, dict):
        raise ParseError("expected a JSON object", path, line)
    missing = [key for key in ('label', 'joints') if key not in record]
    if missing:
        raise ParseError(f"missing field(s): {', '.join(missing)}", path, line)
    try:
        joints = np.array(record['joints'], dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError("ragged or non-numeric joints", path, line)
    if joints.ndim != 4 or joints.shape[3] != 3:
        raise ParseError(f"joints must nest as M x V x T_raw x 3, got shape {joints.shape}", path, line)
    if num_joints is not None and joints.shape[1] != num_joints:
        raise ParseError(f"{joints.shape[1]} joints, the skeleton has {num_joints}", path, line)
    try:
        return SkeletonSequence(joints, int(record['label']), int(record.get('subject', 0)),
                                int(record.get('view', 0)))
    except (ArgumentError, TypeError, ValueError) as e:
        raise ParseError(str(getattr(e, 'description', e)), path, line)


def load_jsonl(path: str, num_joints: Optional[int] = None) -> List[SkeletonSequence]:
    """
    Read one sequence per line; blank lines are skipped

    :param path: Dataset file
    :param num_joints: Expected joint count, not checked when None
    """
    sequences = []
    with open(path, 'r', encoding='utf8') as f:
        for line, text in enumerate(f, start=1):
            if text.strip():
                sequences.append(_parse_line(text, path, line, num_joints))
    logger.info(f"Loaded {len(sequences)} sequence(s) from {path}")
    return sequences


def save_jsonl(path: str, sequences: Iterable[SkeletonSequence]):
    with open(path, 'w', encoding='utf8') as f:
        for seq in sequences:
            f.write(json.dumps(seq.to_dict()) + '\n')


@dataclass
class Manifest:
    """ Dataset manifest: layout, class names and the files of each split """

    layout: str
    classes: list
    train: list
    val: list = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return len(self.classes)


def load_manifest(path: str) -> Manifest:
    """ Read a manifest JSON file; split paths are relative to the manifest's directory """
    try:
        with open(path, 'r', encoding='utf8') as f:
            record = json.load(f)
    except ValueError as e:
        raise ParseError(f"invalid JSON ({e})", path, 1)
    for key in ('layout', 'classes', 'train'):
        if key not in record:
            raise ParseError(f"manifest misses '{key}'", path, 1)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(files):
        files = [files] if isinstance(files, str) else list(files)
        return [f if os.path.isabs(f) else os.path.join(base, f) for f in files]

    layout_bones(record['layout'])
    return Manifest(layout=record['layout'], classes=list(record['classes']), train=resolve(record['train']),
                    val=resolve(record.get('val', [])))


def save_manifest(path: str, manifest: Manifest):
    base = os.path.dirname(os.path.abspath(path))
    record = {'layout': manifest.layout, 'classes': manifest.classes,
              'train': [os.path.relpath(p, base) for p in manifest.train],
              'val': [os.path.relpath(p, base) for p in manifest.val]}
    with open(path, 'w', encoding='utf8') as f:
        json.dump(record, f, indent=2)


def load_split(manifest: Manifest, split: str) -> List[SkeletonSequence]:
    if split not in ('train', 'val'):
        raise ArgumentError(f"unknown split '{split}'")
    num_joints, _ = layout_bones(manifest.layout)
    sequences = []
    for path in getattr(manifest, split):
        sequences.extend(load_jsonl(path, num_joints))
    for seq in sequences:
        if seq.label >= manifest.num_classes:
            raise ArgumentError(f"label {seq.label} outside the manifest's {manifest.num_classes} classes")
    return sequences


########################################################################################################################
# Synthetic generator
########################################################################################################################

def synth_generate(n_classes: int, per_class: int, num_joints: int, frames: int, seed: int = 0,
                   noise: float = 0.02, num_persons: int = 1) -> List[SkeletonSequence]:
    """
    Class c moves its own block of joints: a posture offset plus a limb oscillation at frequency c + 1,
    with a random phase per sequence.

    :param n_classes: Class count, at least 2 and at most the joint count
    :param per_class: Sequences per class
    :param num_joints: Joints V
    :param frames: Raw frame count T_raw
    :param seed: Generator seed
    :param noise: Standard deviation of the additive Gaussian noise
    :param num_persons: Persons M
    """
    if n_classes < 2 or n_classes > num_joints:
        raise ArgumentError(f"need 2 <= classes <= joints (classes={n_classes}, joints={num_joints})")
    if per_class < 1 or frames < 1:
        raise ArgumentError("per_class and frames must be positive")
    rng = np.random.default_rng(seed)
    rest = rng.normal(0.0, 0.1, size=(num_joints, 3))
    rest -= rest[0]
    blocks = np.array_split(np.arange(num_joints), n_classes)
    t = np.arange(frames) / max(frames, 2)

    sequences = []
    for label, block in enumerate(blocks):
        axis = label % 3
        for index in range(per_class):
            phase = rng.uniform(0.0, 2.0 * np.pi)
            pose = np.broadcast_to(rest[:, None, :], (num_joints, frames, 3)).copy()
            pose[block, :, 1] += 0.5
            pose[block, :, axis] += 0.15 * np.sin(2.0 * np.pi * (label + 1) * t + phase)[None, :]
            joints = np.stack([pose + person for person in range(num_persons)])
            if noise > 0.0:
                joints = joints + rng.normal(0.0, noise, size=joints.shape)
            sequences.append(SkeletonSequence(joints, label, subject=index % 4, view=0))
    logger.debug(f"Synthesized {len(sequences)} sequence(s): {n_classes} classes, V={num_joints}, T={frames}")
    return sequences


########################################################################################################################
# Preprocessing
########################################################################################################################

def resize_temporal(seq: SkeletonSequence, frames: int = 64) -> SkeletonSequence:
    """ Linear interpolation along time to exactly ``frames`` frames """
    if frames < 1:
        raise ArgumentError("target frame count must be positive")
    if seq.num_frames == frames:
        return seq
    raw = seq.num_frames
    position = np.linspace(0.0, raw - 1.0, frames)
    low = np.floor(position).astype(np.int64)
    high = np.minimum(low + 1, raw - 1)
    frac = (position - low)[None, None, :, None]
    joints = seq.joints[:, :, low] * (1.0 - frac) + seq.joints[:, :, high] * frac
    return SkeletonSequence(joints, seq.label, seq.subject, seq.view)


def center_on_root(seq: SkeletonSequence, root: int = 0) -> SkeletonSequence:
    """ Translate so the root joint of the first person sits at the origin in the first frame """
    joints = seq.joints - seq.joints[0, root, 0]
    return SkeletonSequence(joints, seq.label, seq.subject, seq.view)


def preprocess(seq: SkeletonSequence, frames: int = 64, root: int = 0) -> SkeletonSequence:
    return center_on_root(resize_temporal(seq, frames), root)


def preprocess_all(sequences: List[SkeletonSequence], frames: int = 64, threads: int = 1,
                   root: int = 0) -> List[SkeletonSequence]:
    """ Order-preserving preprocessing, optionally on a thread pool """
    if threads <= 1:
        return [preprocess(s, frames, root) for s in sequences]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: preprocess(s, frames, root), sequences))


def iter_batches(sequences: List[SkeletonSequence], batch_size: int, adjacency: np.ndarray,
                 shuffle: bool = False, seed: int = 0, num_persons: Optional[int] = None) -> Iterator[SkeletonBatch]:
    """
    Yield batches in order, or under one seeded permutation applied to sequences and labels together

    :param sequences: Preprocessed sequences
    :param batch_size: Sequences per batch; the last batch may be smaller
    :param adjacency: Skeleton adjacency attached to every batch
    :param shuffle: Permute before batching
    :param seed: Seed of the permutation
    :param num_persons: Person count to pad to, the dataset maximum when None
    """
    if batch_size < 1:
        raise ArgumentError("batch size must be positive")
    order = np.arange(len(sequences))
    if shuffle:
        order = np.random.default_rng(seed).permutation(len(sequences))
    num_persons = num_persons or max((s.num_persons for s in sequences), default=1)
    for start in range(0, len(order), batch_size):
        chosen = order[start:start + batch_size]
        yield make_batch([sequences[i] for i in chosen], adjacency, num_persons, ids=chosen)


_END = object()


def prefetch(batches: Iterable, depth: int = 2) -> Iterator:
    """ Produce items on a background thread through a bounded queue; producer errors re-raise here """
    if depth < 1:
        yield from batches
        return
    channel = queue.Queue(maxsize=depth)
    failure = []

    def producer():
        try:
            for item in batches:
                channel.put(item)
        except Exception as e:  # pylint: disable=broad-except
            failure.append(e)
        finally:
            channel.put(_END)

    worker = threading.Thread(target=producer, name='hgformer-prefetch', daemon=True)
    worker.start()
    while True:
        item = channel.get()
        if item is _END:
            break
        yield item
    worker.join()
    if failure:
        raise failure[0]
