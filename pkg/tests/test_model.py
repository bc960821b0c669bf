# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


import numpy as np
import pytest
import hgformer.model as model_module
from hgformer.config import RunConfig
from hgformer.data import make_batch, preprocess_all, skeleton_adjacency, synth_generate
from hgformer.hypergraph import Hypergraph
from hgformer.model import init_state, forward, train_step, nesterov_step, lr_schedule, accuracy_metrics, evaluate, \
                           save_checkpoint, load_checkpoint
from hgformer.numerics import Parameter
from hgformer.exceptions import ArgumentError, ConfigError, DegenerateAttentionError, NumericError


def _config(**values):
    base = dict(layout='chain-6', frames=4, hidden_channels=4, heads=2, n_faht=2, split=(1, 1), hyperedges=2,
                low_dim=2, decoder_channels=(4, 4, 4), synth_classes=2, batch_size=2, epochs=1, prefetch=0)
    base.update(values)
    return RunConfig(**base)


def _batch(config, size=3, seed=0, persons=1):
    sequences = synth_generate(2, 2, 6, 6, seed=seed, num_persons=persons)
    return make_batch(preprocess_all(sequences[:size], config.frames), skeleton_adjacency('chain-6'))


def test_init_state():
    state = init_state(_config(), 6, 2)
    names = list(state.params)
    assert 'encoder.embed.weight' in names
    assert 'quantizer.codebook.vectors' in names
    assert 'han.lin2.bias' in names
    assert 'classifier.weight' in names
    assert state.hypergraph.num_edges == 2
    assert np.all(state.hypergraph.edge_sizes() >= 1)
    assert np.array_equal(state.hypergraph.weights, np.ones(2))
    assert set(state.velocity) == set(names)
    with pytest.raises(ConfigError):
        init_state(_config(hyperedges=7), 6, 2)


def test_init_without_in_phase_has_no_quantizer():
    state = init_state(_config(in_phase=False), 6, 2)
    assert not any(name.startswith('quantizer.') for name in state.params)


def test_forward_outputs():
    config = _config()
    state = init_state(config, 6, 2)
    batch = _batch(config)
    before = state.hypergraph
    output = forward(batch, state, train=False)
    assert output.logits.shape == (3, 2)
    assert np.allclose(output.probs.data.sum(axis=1), 1.0)
    assert output.recon1.shape == (3, 6, 3)
    assert output.recon2.shape == (3, 6, 3)
    assert output.embeddings.shape == (3, 4)
    assert output.attention.shape == (3, 6)
    assert output.assignments.shape == (3, 6)
    assert output.next_hypergraph is None
    assert state.hypergraph is before
    assert all(np.isfinite(v) for v in output.losses.as_dict().values())


def test_forward_is_pure():
    config = _config()
    state = init_state(config, 6, 2)
    batch = _batch(config)
    a = forward(batch, state)
    b = forward(batch, state)
    assert np.array_equal(a.logits.data, b.logits.data)
    assert a.losses.total == b.losses.total


def test_forward_train_generates_hypergraph():
    config = _config()
    state = init_state(config, 6, 2)
    output = forward(_batch(config), state, train=True)
    g = output.next_hypergraph
    assert isinstance(g, Hypergraph)
    assert np.all(g.incidence.sum(axis=1) == 1.0)
    assert np.isclose(g.weights.sum(), 1.0)
    assert forward(_batch(config), state, train=True, regenerate=False).next_hypergraph is None


def test_forward_two_persons_average_logits():
    config = _config(num_persons=2)
    state = init_state(config, 6, 2)
    output = forward(_batch(config, persons=2), state)
    assert output.logits.shape == (3, 2)
    assert output.recon2.shape == (6, 6, 3)


def test_forward_ignores_padded_persons():
    config = _config()
    state = init_state(config, 6, 2)
    sequences = preprocess_all(synth_generate(2, 2, 6, 6, seed=0)[:3], config.frames)
    single = forward(make_batch(sequences, skeleton_adjacency('chain-6')), state)
    padded = forward(make_batch(sequences, skeleton_adjacency('chain-6'), num_persons=2), state)
    assert padded.recon2.shape == (6, 6, 3)
    assert np.allclose(padded.logits.data, single.logits.data, rtol=0.0, atol=1e-12)
    assert np.allclose(padded.embeddings, single.embeddings, rtol=0.0, atol=1e-12)
    for name in ('ce', 'rec1', 'rec2'):
        assert getattr(padded.losses, name) == pytest.approx(getattr(single.losses, name), abs=1e-12), name


def test_degenerate_attention_reports_the_sample(monkeypatch):
    config = _config(num_persons=2)
    state = init_state(config, 6, 2)

    def degenerate(*args):
        raise DegenerateAttentionError("|row sum| < 1e-08 at row (3,)", 3)

    monkeypatch.setattr(state.model, 'encoder', degenerate)
    with pytest.raises(DegenerateAttentionError) as info:
        forward(_batch(config, persons=2), state)
    assert info.value.index == 1
    assert 'person 1' in str(info.value)


def test_forward_rejects_wrong_skeleton():
    config = _config()
    state = init_state(config, 6, 2)
    sequences = preprocess_all(synth_generate(2, 1, 5, 6), config.frames)
    with pytest.raises(ArgumentError):
        forward(make_batch(sequences, skeleton_adjacency('chain-5')), state)


def test_without_in_phase_losses_are_zero():
    config = _config(in_phase=False)
    state = init_state(config, 6, 2)
    output = forward(_batch(config), state)
    assert output.recon1 is None
    assert output.losses.rec1 == 0.0
    assert output.losses.quant == 0.0


def test_train_step_updates_everything():
    config = _config()
    state = init_state(config, 6, 2)
    before = {name: p.numpy() for name, p in state.params.items()}
    state, output = train_step(_batch(config), state, lr=0.05)
    assert state.iteration == 1
    assert state.hypergraph is output.next_hypergraph
    assert not np.array_equal(state.params['classifier.weight'].data, before['classifier.weight'])
    assert not np.array_equal(state.params['quantizer.codebook.vectors'].data, before['quantizer.codebook.vectors'])


def test_train_step_zero_lr_keeps_parameters():
    config = _config()
    state = init_state(config, 6, 2)
    before = {name: p.numpy() for name, p in state.params.items()}
    state, output = train_step(_batch(config), state, lr=0.0)
    assert all(np.array_equal(p.data, before[name]) for name, p in state.params.items())
    assert state.hypergraph is output.next_hypergraph
    with pytest.raises(ArgumentError):
        train_step(_batch(config), state, lr=-0.1)


def test_fixed_hypergraph_is_kept():
    config = _config(out_phase=False)
    state = init_state(config, 6, 2)
    initial = state.hypergraph
    state, _ = train_step(_batch(config), state, lr=0.05)
    assert state.hypergraph is initial


def test_train_step_non_finite_loss():
    config = _config()
    state = init_state(config, 6, 2)
    bias = state.params['encoder.embed.bias']
    bias.assign(np.full(bias.shape, np.nan))
    with pytest.raises(NumericError) as info:
        train_step(_batch(config), state, lr=0.05)
    assert set(info.value.components) == {'ce', 'rec1', 'rec2', 'quant', 'total'}
    assert state.iteration == 0


def test_training_is_deterministic():
    config = _config()
    results = []
    for _ in range(2):
        state = init_state(config, 6, 2)
        for _ in range(2):
            state, _ = train_step(_batch(config), state, lr=0.05)
        results.append(state)
    a, b = results
    assert all(np.array_equal(a.params[name].data, b.params[name].data) for name in a.params)
    assert a.hypergraph == b.hypergraph


def test_nesterov_trajectory():
    p = Parameter([1.0], 'p')
    velocity = {}
    for expected in (0.81, 0.5751):
        p.grad = p.numpy()
        nesterov_step({'p': p}, velocity, lr=0.1, momentum=0.9, weight_decay=0.0)
        assert p.data[0] == pytest.approx(expected, abs=1e-12)


def test_weight_decay_on_unused_parameter():
    p = Parameter([2.0, -4.0], 'p')
    velocity = {}
    for step in range(1, 4):
        nesterov_step({'p': p}, velocity, lr=0.1, momentum=0.9, weight_decay=0.0004)
        assert np.allclose(p.data, np.array([2.0, -4.0]) * (1.0 - 0.1 * 0.0004) ** step, rtol=0, atol=1e-14)
    assert np.all(velocity['p'] == 0.0)


def test_plain_momentum():
    p = Parameter([1.0], 'p')
    velocity = {}
    p.grad = np.array([1.0])
    nesterov_step({'p': p}, velocity, lr=0.1, momentum=0.9, nesterov=False)
    assert p.data[0] == pytest.approx(0.9)


def test_lr_schedule():
    assert lr_schedule(0) == 0.025
    assert lr_schedule(109) == 0.025
    assert lr_schedule(110) == pytest.approx(0.0025)
    assert lr_schedule(125) == pytest.approx(0.00025)
    assert lr_schedule(139) == pytest.approx(0.00025)
    with pytest.raises(ArgumentError):
        lr_schedule(-1)


def test_accuracy_metrics():
    probs = np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6], [0.5, 0.4, 0.1], [0.2, 0.5, 0.3]])
    labels = np.array([0, 2, 1, 1])
    metrics = accuracy_metrics(probs, labels, 3)
    assert metrics['top1'] == 0.75
    assert metrics['top5'] == 1.0
    assert metrics['per_class'] == {0: 1.0, 1: 0.5, 2: 1.0}
    weighted = sum(acc * np.sum(labels == c) for c, acc in metrics['per_class'].items()) / labels.size
    assert weighted == pytest.approx(metrics['top1'])
    oracle = accuracy_metrics(np.eye(3)[labels], labels, 3)
    assert oracle['top1'] == 1.0
    with pytest.raises(ArgumentError):
        accuracy_metrics(np.zeros((0, 3)), np.array([], dtype=int), 3)


def test_evaluate_leaves_state_alone():
    config = _config()
    state = init_state(config, 6, 2)
    batch = _batch(config)
    initial = state.hypergraph
    metrics = evaluate([batch, batch], state)
    assert metrics['count'] == 6
    assert 0.0 <= metrics['top1'] <= 1.0
    assert set(metrics['losses']) == {'ce', 'rec1', 'rec2', 'quant', 'total'}
    assert state.hypergraph is initial
    assert state.iteration == 0
    with pytest.raises(ArgumentError):
        evaluate([], state)


def test_checkpoint_round_trip(tmp_path):
    config = _config()
    state = init_state(config, 6, 2)
    batch = _batch(config)
    state, _ = train_step(batch, state, lr=0.05)
    state.epoch = 3
    path = str(tmp_path / 'state.npz')
    save_checkpoint(path, state)

    loaded = load_checkpoint(path)
    assert loaded.config == config
    assert (loaded.iteration, loaded.epoch) == (1, 3)
    assert loaded.hypergraph == state.hypergraph
    for name, p in state.params.items():
        assert np.array_equal(loaded.params[name].data, p.data)
        assert np.array_equal(loaded.velocity[name], state.velocity[name])
    assert np.array_equal(forward(batch, loaded).logits.data, forward(batch, state).logits.data)


def test_checkpoint_errors(tmp_path):
    bad = tmp_path / 'bad.npz'
    bad.write_bytes(b'not a checkpoint')
    with pytest.raises(ConfigError):
        load_checkpoint(str(bad))
    partial = str(tmp_path / 'partial.npz')
    np.savez(partial, **{'meta/version': np.array(99)})
    with pytest.raises(ConfigError):
        load_checkpoint(partial)


def test_epoch_mode_regenerates_once_per_epoch(monkeypatch):
    from hgformer.training import Dataset, train_epoch
    calls = []
    original = model_module.generate_outphase

    def counting(*args, **kwargs):
        calls.append(1)
        return original(*args, **kwargs)

    monkeypatch.setattr(model_module, 'generate_outphase', counting)
    sequences = preprocess_all(synth_generate(2, 3, 6, 6), 4)
    dataset = Dataset(layout='chain-6', num_classes=2, adjacency=skeleton_adjacency('chain-6'), train=sequences)

    state = init_state(_config(hypergraph_update='epoch'), 6, 2)
    train_epoch(state, dataset, 0.01)
    assert state.iteration == 3
    assert len(calls) == 1

    calls.clear()
    state = init_state(_config(), 6, 2)
    train_epoch(state, dataset, 0.01)
    assert len(calls) == 3
