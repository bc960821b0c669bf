# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


import csv
import json
import os
import pytest
from click.testing import CliRunner
import hgformer.training as training_module
from hgformer import __version__
from hgformer.__main__ import cli
from hgformer.exceptions import NumericError
from hgformer.training import METRICS_COLUMNS

GRADCHECK_CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', 'configs', 'gradcheck.json')


def _run(*args):
    return CliRunner().invoke(cli, [str(a) for a in args], obj={})


def _write_config(path, **values):
    base = dict(layout='chain-6', frames=4, synth_frames=6, synth_classes=2, synth_per_class=2, hidden_channels=4,
                heads=2, n_faht=2, split=[1, 1], hyperedges=2, low_dim=2, decoder_channels=[4, 4, 4],
                batch_size=2, epochs=2, checkpoint_every=1, prefetch=0, output_dir=str(path.parent / 'run'))
    base.update(values)
    path.write_text(json.dumps(base))
    return str(path)


def _rows(path):
    with open(path, newline='') as f:
        return list(csv.reader(f))


def test_version_and_help():
    result = _run('--version')
    assert result.exit_code == 0
    assert __version__ in result.output
    result = _run('-?')
    assert result.exit_code == 0
    for command in ('train', 'eval', 'gradcheck', 'export', 'synth', 'ablate'):
        assert command in result.output


def test_train_writes_metrics_and_checkpoints(tmp_path):
    config = _write_config(tmp_path / 'tiny.json')
    result = _run('train', config)
    assert result.exit_code == 0, result.output
    run = tmp_path / 'run'
    assert (run / 'final.npz').is_file()
    assert (run / 'epoch0001.npz').is_file()
    rows = _rows(run / 'metrics.csv')
    assert rows[0] == list(METRICS_COLUMNS)
    assert [row[0] for row in rows[1:]] == ['0', '1']
    assert 'Trained 2 epoch(s), 4 iteration(s)' in result.output


def test_train_is_deterministic(tmp_path):
    first = _write_config(tmp_path / 'a.json', output_dir=str(tmp_path / 'a'))
    second = _write_config(tmp_path / 'b.json', output_dir=str(tmp_path / 'b'))
    assert _run('train', first).exit_code == 0
    assert _run('train', second).exit_code == 0
    assert (tmp_path / 'a' / 'metrics.csv').read_bytes() == (tmp_path / 'b' / 'metrics.csv').read_bytes()


def test_train_overrides_and_resume(tmp_path):
    config = _write_config(tmp_path / 'tiny.json')
    assert _run('train', config, '--epochs', 1, '--lr', 0.01).exit_code == 0
    run = tmp_path / 'run'
    assert len(_rows(run / 'metrics.csv')) == 2

    result = _run('train', config, '--resume', run / 'final.npz', '--epochs', 2)
    assert result.exit_code == 0, result.output
    rows = _rows(run / 'metrics.csv')
    assert [row[0] for row in rows[1:]] == ['0', '1']
    assert float(rows[2][METRICS_COLUMNS.index('lr')]) == 0.01


def test_train_config_errors(tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{"hidden": 12}')
    result = _run('train', bad)
    assert result.exit_code == 1
    assert 'unknown config key' in result.output

    config = _write_config(tmp_path / 'tiny.json')
    result = _run('train', config, '--hyperedges', 9)
    assert result.exit_code == 1


def test_train_numeric_failure_exit_code(tmp_path, monkeypatch):
    def exploding(batch, state, lr, regenerate=True):
        raise NumericError("non-finite loss at iteration 0", {'total': float('nan')})

    monkeypatch.setattr(training_module, 'train_step', exploding)
    result = _run('train', _write_config(tmp_path / 'tiny.json'))
    assert result.exit_code == 2
    assert 'total' in result.output


def test_eval_and_export(tmp_path):
    config = _write_config(tmp_path / 'tiny.json', epochs=1)
    assert _run('train', config).exit_code == 0
    checkpoint = tmp_path / 'run' / 'final.npz'

    result = _run('eval', checkpoint)
    assert result.exit_code == 0, result.output
    assert 'Top-1' in result.output
    assert 'Samples: 2' in result.output

    out = tmp_path / 'export'
    result = _run('export', checkpoint, out)
    assert result.exit_code == 0, result.output
    embeddings = _rows(out / 'embeddings.csv')
    assert len(embeddings) == 1 + 4
    assert len(embeddings[0]) == 2 + 4
    hyperedges = _rows(out / 'hyperedges.csv')
    assert hyperedges[0] == ['joint_id', 'hyperedge_id', 'weight']
    assert len(hyperedges) == 1 + 6
    weights = {}
    for _, edge, weight in hyperedges[1:]:
        assert weights.setdefault(edge, weight) == weight
    assert len(weights) == 2
    assert sum(float(w) for w in weights.values()) == pytest.approx(1.0)
    predictions = _rows(out / 'predictions.csv')
    assert predictions[0][:3] == ['sample_id', 'label', 'predicted']

    again = tmp_path / 'again'
    assert _run('export', checkpoint, again).exit_code == 0
    for name in ('embeddings.csv', 'hyperedges.csv', 'predictions.csv'):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_eval_rejects_incompatible_dataset(tmp_path):
    config = _write_config(tmp_path / 'tiny.json', epochs=1)
    assert _run('train', config).exit_code == 0
    data = tmp_path / 'data'
    assert _run('synth', data, '-l', 'chain-7', '-c', 2, '-n', 1, '-t', 6).exit_code == 0
    result = _run('eval', tmp_path / 'run' / 'final.npz', '-m', data / 'manifest.json')
    assert result.exit_code == 1
    assert 'checkpoint expects' in result.output


def test_synth_then_train_on_manifest(tmp_path):
    data = tmp_path / 'data'
    result = _run('synth', data, '-l', 'chain-6', '-c', 2, '-n', 2, '--val-per-class', 1, '-t', 6)
    assert result.exit_code == 0, result.output
    manifest = json.loads((data / 'manifest.json').read_text())
    assert manifest['layout'] == 'chain-6'
    assert manifest['classes'] == ['class0', 'class1']
    assert len((data / 'train.jsonl').read_text().splitlines()) == 4
    assert len((data / 'val.jsonl').read_text().splitlines()) == 2

    config = _write_config(tmp_path / 'tiny.json', epochs=1, manifest=str(data / 'manifest.json'))
    result = _run('train', config)
    assert result.exit_code == 0, result.output
    rows = _rows(tmp_path / 'run' / 'metrics.csv')
    assert rows[1][METRICS_COLUMNS.index('val_acc')] != ''


def test_synth_rejects_unknown_layout(tmp_path):
    result = _run('synth', tmp_path / 'data', '-l', 'octopus')
    assert result.exit_code == 1


def test_gradcheck_passes_on_toy_batch():
    result = _run('gradcheck', GRADCHECK_CONFIG)
    assert result.exit_code == 0, result.output
    assert 'han.conv2' in result.output
    assert 'quantizer.codebook' in result.output


def test_gradcheck_detects_corrupted_adjoint():
    result = _run('gradcheck', GRADCHECK_CONFIG, '--n-faht', 2, '--split', '1,1', '--corrupt-adjoint', 'gelu')
    assert result.exit_code == 3
    assert 'han.conv2' in result.output.splitlines()[-1]


def test_ablate(tmp_path):
    config = _write_config(tmp_path / 'tiny.json', epochs=1)
    result = _run('ablate', config, '--variant', 'fixed', '--variant', 'temporal')
    assert result.exit_code == 0, result.output
    assert 'fixed' in result.output and 'temporal' in result.output
    assert (tmp_path / 'run' / 'fixed' / 'metrics.csv').is_file()
    assert (tmp_path / 'run' / 'temporal' / 'final.npz').is_file()
