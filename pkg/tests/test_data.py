# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


import json
import logging
import os
import numpy as np
import pytest
from hgformer.data import SkeletonBatch, SkeletonSequence, layout_bones, skeleton_adjacency, bone_offsets, \
                          make_batch, load_jsonl, save_jsonl, Manifest, load_manifest, save_manifest, load_split, \
                          synth_generate, resize_temporal, center_on_root, preprocess_all, iter_batches, prefetch
from hgformer.numerics import Tensor
from hgformer.exceptions import ArgumentError, ParseError


def test_layouts():
    assert layout_bones('nwucla20')[0] == 20
    assert len(layout_bones('nwucla20')[1]) == 19
    assert layout_bones('ntu25')[0] == 25
    assert len(layout_bones('ntu25')[1]) == 24
    assert layout_bones('chain-4') == (4, [(0, 1), (1, 2), (2, 3)])
    for bad in ('kinetics', 'chain-x', 'chain-0'):
        with pytest.raises(ArgumentError):
            layout_bones(bad)


def test_skeleton_adjacency_is_a_tree_with_self_loops():
    for layout in ('nwucla20', 'ntu25'):
        a = skeleton_adjacency(layout)
        v = a.shape[0]
        assert np.array_equal(a, a.T)
        assert np.all(np.diag(a) == 1.0)
        assert (a.sum() - v) / 2 == v - 1


def test_bone_offsets():
    x = Tensor(np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]))
    raw = bone_offsets(x).data
    assert raw.shape == (2, 2, 3)
    assert np.array_equal(raw[1, 0], [1.0, 2.0, 3.0])
    assert np.array_equal(raw[0, 1], [-1.0, -2.0, -3.0])
    assert np.all(raw[0, 0] == 0.0)


def test_sequence_validation():
    with pytest.raises(ArgumentError):
        SkeletonSequence(np.zeros((1, 4, 5, 2)), 0)
    with pytest.raises(ArgumentError):
        SkeletonSequence(np.full((1, 4, 5, 3), np.nan), 0)
    with pytest.raises(ArgumentError):
        SkeletonSequence(np.zeros((1, 4, 5, 3)), -1)


def test_make_batch_pads_persons():
    a = SkeletonSequence(np.ones((1, 4, 5, 3)), 0)
    b = SkeletonSequence(np.ones((2, 4, 5, 3)), 1)
    batch = make_batch([a, b], skeleton_adjacency('chain-4'))
    assert batch.x.shape == (2, 2, 4, 5, 3)
    assert np.all(batch.x[0, 1] == 0.0)
    assert batch.merged().shape == (4, 4, 5, 3)
    assert batch.pooled_target().shape == (4, 4, 3)
    assert np.array_equal(batch.ids, [0, 1])
    assert np.array_equal(batch.persons, [[True, False], [True, True]])
    assert np.allclose(batch.person_weights(), [[1.0, 0.0], [0.5, 0.5]])
    assert np.array_equal(batch.real_rows(), [0, 2, 3])
    with pytest.raises(ArgumentError):
        make_batch([a, SkeletonSequence(np.ones((1, 4, 6, 3)), 0)], skeleton_adjacency('chain-4'))


def test_make_batch_warns_when_dropping_persons(caplog):
    a = SkeletonSequence(np.ones((3, 4, 5, 3)), 0)
    with caplog.at_level(logging.WARNING, logger='HGFORMER:DATA'):
        batch = make_batch([a], skeleton_adjacency('chain-4'), num_persons=2)
    assert batch.x.shape == (1, 2, 4, 5, 3)
    assert batch.persons.all()
    assert any('keeping the first 2' in record.getMessage() for record in caplog.records)


def test_skeleton_batch_infers_real_persons():
    x = np.zeros((2, 2, 4, 5, 3))
    x[0, 0] = 1.0
    batch = SkeletonBatch(x=x, labels=[0, 1], adjacency=skeleton_adjacency('chain-4'))
    assert np.array_equal(batch.persons, [[True, False], [True, True]])
    assert np.array_equal(batch.real_rows(), [0, 2, 3])


def test_jsonl_round_trip(tmp_path):
    sequences = synth_generate(2, 2, 4, 6, seed=1)
    path = str(tmp_path / 'data.jsonl')
    save_jsonl(path, sequences)
    loaded = load_jsonl(path, num_joints=4)
    assert len(loaded) == 4
    assert [s.label for s in loaded] == [s.label for s in sequences]
    assert np.allclose(loaded[3].joints, sequences[3].joints)


def test_jsonl_errors_name_the_line(tmp_path):
    path = tmp_path / 'bad.jsonl'
    good = json.dumps({'label': 0, 'joints': np.zeros((1, 2, 3, 3)).tolist()})
    path.write_text(good + '\n\n' + '{"label": 1}\n')
    with pytest.raises(ParseError) as info:
        load_jsonl(str(path))
    assert info.value.line == 3
    assert 'joints' in info.value.description

    path.write_text(good + '\n')
    with pytest.raises(ParseError):
        load_jsonl(str(path), num_joints=5)
    path.write_text('not json\n')
    with pytest.raises(ParseError):
        load_jsonl(str(path))


def test_manifest_paths_are_relative(tmp_path):
    save_jsonl(str(tmp_path / 'train.jsonl'), synth_generate(3, 1, 5, 4))
    manifest = Manifest(layout='chain-5', classes=['a', 'b', 'c'], train=[str(tmp_path / 'train.jsonl')])
    save_manifest(str(tmp_path / 'manifest.json'), manifest)
    with open(tmp_path / 'manifest.json') as f:
        assert json.load(f)['train'] == ['train.jsonl']
    loaded = load_manifest(str(tmp_path / 'manifest.json'))
    assert loaded.num_classes == 3
    assert os.path.isabs(loaded.train[0])
    assert len(load_split(loaded, 'train')) == 3
    assert load_split(loaded, 'val') == []
    with pytest.raises(ArgumentError):
        load_split(loaded, 'test')


def test_split_rejects_labels_outside_manifest(tmp_path):
    save_jsonl(str(tmp_path / 'train.jsonl'), synth_generate(3, 1, 5, 4))
    manifest = Manifest(layout='chain-5', classes=['a', 'b'], train=[str(tmp_path / 'train.jsonl')])
    with pytest.raises(ArgumentError):
        load_split(manifest, 'train')


def test_synth_generate():
    sequences = synth_generate(3, 4, 8, 10, seed=2, num_persons=2)
    assert len(sequences) == 12
    assert [s.label for s in sequences] == [0] * 4 + [1] * 4 + [2] * 4
    assert sequences[0].joints.shape == (2, 8, 10, 3)
    again = synth_generate(3, 4, 8, 10, seed=2, num_persons=2)
    assert all(np.array_equal(a.joints, b.joints) for a, b in zip(sequences, again))
    with pytest.raises(ArgumentError):
        synth_generate(9, 1, 8, 10)


def test_synth_classes_move_their_own_joints():
    sequences = synth_generate(2, 1, 4, 32, seed=0, noise=0.0)
    # class 0 owns joints 0-1 and oscillates along x, class 1 owns joints 2-3 along y
    assert sequences[0].joints[0, 0, :, 0].std() > 0.05
    assert np.isclose(sequences[0].joints[0, 2, :, 0].std(), 0.0)
    assert sequences[1].joints[0, 2, :, 1].std() > 0.05
    assert np.isclose(sequences[1].joints[0, 0, :, 1].std(), 0.0)


def test_resize_temporal():
    joints = np.zeros((1, 1, 3, 3))
    joints[0, 0, :, 0] = [0.0, 1.0, 2.0]
    resized = resize_temporal(SkeletonSequence(joints, 0), 5)
    assert resized.num_frames == 5
    assert np.allclose(resized.joints[0, 0, :, 0], [0.0, 0.5, 1.0, 1.5, 2.0])
    single = resize_temporal(SkeletonSequence(np.ones((1, 1, 1, 3)), 0), 4)
    assert np.allclose(single.joints, 1.0)


def test_center_on_root():
    joints = np.arange(1 * 2 * 2 * 3, dtype=float).reshape(1, 2, 2, 3) + 1.0
    centered = center_on_root(SkeletonSequence(joints, 0))
    assert np.allclose(centered.joints[0, 0, 0], 0.0)
    assert np.allclose(centered.joints[0, 1, 1], joints[0, 1, 1] - joints[0, 0, 0])


def test_preprocess_threads_preserve_order():
    sequences = synth_generate(3, 3, 5, 7, seed=4)
    serial = preprocess_all(sequences, 9, threads=1)
    threaded = preprocess_all(sequences, 9, threads=4)
    assert all(np.array_equal(a.joints, b.joints) and a.label == b.label for a, b in zip(serial, threaded))
    assert serial[0].num_frames == 9


def test_iter_batches_shuffle_keeps_labels_with_samples():
    sequences = preprocess_all(synth_generate(3, 3, 5, 7, seed=5), 6)
    adjacency = skeleton_adjacency('chain-5')
    batches = list(iter_batches(sequences, 4, adjacency, shuffle=True, seed=3))
    assert [len(b) for b in batches] == [4, 4, 1]
    for batch in batches:
        for row, index in enumerate(batch.ids):
            assert batch.labels[row] == sequences[index].label
            assert np.array_equal(batch.x[row], sequences[index].joints)
    again = list(iter_batches(sequences, 4, adjacency, shuffle=True, seed=3))
    assert all(np.array_equal(a.ids, b.ids) for a, b in zip(batches, again))
    with pytest.raises(ArgumentError):
        list(iter_batches(sequences, 0, adjacency))


def test_prefetch():
    assert list(prefetch(iter(range(10)), depth=2)) == list(range(10))
    assert list(prefetch(iter(range(3)), depth=0)) == [0, 1, 2]

    def failing():
        yield 1
        raise ArgumentError("broken source")

    with pytest.raises(ArgumentError):
        list(prefetch(failing(), depth=1))
