#!/usr/bin/env python

# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText

import os
import sys
import click
import traceback
from contextlib import nullcontext
from dataclasses import fields

from hgformer import __version__
from hgformer.config import RunConfig, ablation_variants
from hgformer.data import Manifest, save_jsonl, save_manifest, synth_generate, layout_bones
from hgformer.enums import ExitCode
from hgformer.exceptions import ConfigError, DegenerateAttentionError, GradCheckError, NumericError, \
    SingularDegreeError
from hgformer.model import evaluate, init_state, load_checkpoint
from hgformer.numerics import scaled_adjoint
from hgformer.training import dataset_batches, export_run, fit, gradient_report, prepare_dataset, run_ablation, \
    toy_batch


########################################################################################################################
# Helper methods
########################################################################################################################

class NumberList(click.ParamType):
    """ Custom argument type for comma separated numbers """

    name = 'list'

    def __init__(self, kind=int):
        self.kind = kind

    def __repr__(self):
        return 'LIST'

    def convert(self, value, param, ctx):
        if isinstance(value, (tuple, list)):
            return tuple(value)
        try:
            return tuple(self.kind(v) for v in value.split(',') if v.strip())
        except ValueError:
            self.fail(f'{value} is not a comma separated list of {self.kind.__name__} values.', param, ctx)


class JsonFile(click.ParamType):
    """ Custom argument type for JSON config files """

    name = 'file'

    def __init__(self, exists=False):
        self.exists = exists

    def __repr__(self):
        return 'FILE'

    def convert(self, value, param, ctx):
        if not value.lower().endswith('.json'):
            self.fail(f'Unsupported file type: *.{value.split(".")[-1]} !', param, ctx)
        if self.exists and not os.path.lexists(value):
            self.fail(f'File "{value}" does not exist !', param, ctx)
        return value


def config_options(func):
    """ Add one ``--<field>`` override option per RunConfig field """
    for f in reversed(fields(RunConfig)):
        flag = '--' + f.name.replace('_', '-')
        if f.type is tuple:
            kind = type(f.default[0]) if f.default else int
            option = click.option(flag, f.name, type=NumberList(kind), default=None, help=f'Override {f.name}')
        elif f.type is bool:
            option = click.option(flag, f.name, type=click.BOOL, default=None, help=f'Override {f.name}')
        else:
            option = click.option(flag, f.name, type=f.type, default=None, help=f'Override {f.name}')
        func = option(func)
    return func


def load_config(path, overrides):
    return RunConfig.load(path).override(**overrides).validate()


def exit_code(error):
    if isinstance(error, GradCheckError):
        return ExitCode.GRADCHECK
    if isinstance(error, (NumericError, DegenerateAttentionError, SingularDegreeError)):
        return ExitCode.NUMERIC
    return ExitCode.CONFIG


def check_compatible(state, dataset):
    if dataset.num_nodes != state.num_nodes or dataset.num_classes != state.num_classes:
        raise ConfigError(f"checkpoint expects V={state.num_nodes}, {state.num_classes} classes; dataset has "
                          f"V={dataset.num_nodes}, {dataset.num_classes} classes")


########################################################################################################################
# HGFormer CLI
########################################################################################################################

# Application version
VERSION = __version__

# Application description
DESCRIP = (
    "Hypergraph transformer for skeleton action recognition, version: " + VERSION + " \n\n"
    "Every command is deterministic given its config, seed and checkpoint.\n"
)


# helper method
def print_error(message, debug=False, code=ExitCode.CONFIG):
    click.echo('\n' + traceback.format_exc() if debug else ' ' + message)
    sys.exit(code)


# HGFormer: base options
@click.group(context_settings=dict(help_option_names=['-?', '--help']), help=DESCRIP)
@click.option('-d', "--debug", type=click.IntRange(0, 2, clamp=True), default=0, help='Debug level: 0-off, 1-info, 2-debug')
@click.version_option(VERSION, '-v', '--version')
@click.pass_context
def cli(ctx, debug):

    if debug > 0:
        import logging
        log_level = [logging.NOTSET, logging.INFO, logging.DEBUG]
        logging.basicConfig(level=log_level[debug])

    ctx.obj['DEBUG'] = debug


# HGFormer: train command
@cli.command(short_help="Train a model from a config file")
@click.argument('config_file', nargs=1, type=JsonFile(exists=True))
@click.option('-r', '--resume', type=click.Path(exists=True, dir_okay=False), help='Checkpoint to continue from')
@config_options
@click.pass_context
def train(ctx, config_file, resume, **overrides):

    try:
        config = load_config(config_file, overrides)
        dataset = prepare_dataset(config)
        state = None
        if resume:
            state = load_checkpoint(resume)
            check_compatible(state, dataset)
            state.config = state.config.override(epochs=overrides.get('epochs'))
        state = fit(config, dataset, config.output_dir, state)

    except Exception as e:
        print_error(str(e), ctx.obj['DEBUG'], exit_code(e))

    if ctx.obj['DEBUG']:
        click.echo()

    click.echo(f" Trained {state.epoch} epoch(s), {state.iteration} iteration(s)")
    click.echo(f" Output: {config.output_dir}")


# HGFormer: evaluation command
@cli.command('eval', short_help="Evaluate a checkpoint")
@click.argument('checkpoint', nargs=1, type=click.Path(exists=True, dir_okay=False))
@click.option('-m', '--manifest', type=click.STRING, default=None, help='Dataset manifest [optional]')
@click.option('-s', '--subset', type=click.Choice(['train', 'val']), default='val', show_default=True)
@click.pass_context
def evaluate_checkpoint(ctx, checkpoint, manifest, subset):

    try:
        state = load_checkpoint(checkpoint)
        dataset = prepare_dataset(state.config.override(manifest=manifest))
        check_compatible(state, dataset)
        metrics = evaluate(dataset_batches(dataset, subset, state.config), state)

    except Exception as e:
        print_error(str(e), ctx.obj['DEBUG'], exit_code(e))

    if ctx.obj['DEBUG']:
        click.echo()

    click.echo(f" Samples: {metrics['count']}")
    click.echo(f" Top-1:   {metrics['top1']:.4f}")
    click.echo(f" Top-5:   {metrics['top5']:.4f}")
    click.echo(" Per class:" + "".join([f"\n  - {c}: {acc:.4f}" for c, acc in metrics['per_class'].items()]))
    click.echo(" Losses:" + "".join([f"\n  - {k}: {v:.6f}" for k, v in metrics['losses'].items()]))


# HGFormer: gradient check command
@cli.command(short_help="Check gradients on a 2-sample toy batch")
@click.argument('config_file', nargs=1, type=JsonFile(exists=True))
@click.option('--corrupt-adjoint', type=click.STRING, default=None, hidden=True)
@click.option('--corrupt-factor', type=click.FLOAT, default=2.0, hidden=True)
@config_options
@click.pass_context
def gradcheck(ctx, config_file, corrupt_adjoint, corrupt_factor, **overrides):

    try:
        config = load_config(config_file, overrides)
        dataset = prepare_dataset(config)
        state = init_state(config, dataset.num_nodes, dataset.num_classes)
        batch = toy_batch(config, dataset)
        hook = scaled_adjoint(corrupt_adjoint, corrupt_factor) if corrupt_adjoint else nullcontext()
        with hook:
            report = gradient_report(state, batch, config.gradcheck_eps, config.gradcheck_coords,
                                     config.gradcheck_floor, config.seed)

    except Exception as e:
        print_error(str(e), ctx.obj['DEBUG'], exit_code(e))

    if ctx.obj['DEBUG']:
        click.echo()

    width = max(len(group) for group in report)
    for group, error in report.items():
        click.echo(f" {group:<{width}}  {error:.3e}")

    failed = {g: e for g, e in report.items() if not e < config.gradcheck_tol}
    if failed:
        error = GradCheckError(f"{len(failed)} group(s) above {config.gradcheck_tol:g}: " + ", ".join(failed),
                               failed)
        print_error(str(error), False, ExitCode.GRADCHECK)

    click.echo(f" All {len(report)} parameter groups below {config.gradcheck_tol:g}")


# HGFormer: export command
@cli.command(short_help="Export embeddings, hyperedges and predictions")
@click.argument('checkpoint', nargs=1, type=click.Path(exists=True, dir_okay=False))
@click.argument('out_dir', nargs=1, type=click.Path(file_okay=False))
@click.option('-m', '--manifest', type=click.STRING, default=None, help='Dataset manifest [optional]')
@click.option('-s', '--subset', type=click.Choice(['train', 'val']), default='train', show_default=True)
@click.pass_context
def export(ctx, checkpoint, out_dir, manifest, subset):

    try:
        state = load_checkpoint(checkpoint)
        dataset = prepare_dataset(state.config.override(manifest=manifest))
        check_compatible(state, dataset)
        counts = export_run(state, dataset, subset, out_dir)

    except Exception as e:
        print_error(str(e), ctx.obj['DEBUG'], exit_code(e))

    if ctx.obj['DEBUG']:
        click.echo()

    click.echo("".join([f" {name}.csv: {count} row(s)\n" for name, count in counts.items()]), nl=False)


# HGFormer: synthetic dataset command
@cli.command(short_help="Write a synthetic JSON-lines dataset with manifest")
@click.argument('out_dir', nargs=1, type=click.Path(file_okay=False))
@click.option('-l', '--layout', type=click.STRING, default='chain-8', show_default=True, help='Skeleton layout')
@click.option('-c', '--classes', type=click.IntRange(2, None), default=3, show_default=True)
@click.option('-n', '--per-class', type=click.IntRange(1, None), default=8, show_default=True)
@click.option('--val-per-class', type=click.IntRange(0, None), default=2, show_default=True)
@click.option('-t', '--frames', type=click.IntRange(1, None), default=40, show_default=True, help='Raw frames')
@click.option('--noise', type=click.FLOAT, default=0.02, show_default=True)
@click.option('--persons', type=click.IntRange(1, None), default=1, show_default=True)
@click.option('--seed', type=click.INT, default=0, show_default=True)
@click.pass_context
def synth(ctx, out_dir, layout, classes, per_class, val_per_class, frames, noise, persons, seed):

    try:
        num_joints, _ = layout_bones(layout)
        os.makedirs(out_dir, exist_ok=True)
        train_path = os.path.join(out_dir, 'train.jsonl')
        val_path = os.path.join(out_dir, 'val.jsonl')
        save_jsonl(train_path, synth_generate(classes, per_class, num_joints, frames, seed, noise, persons))
        val = synth_generate(classes, val_per_class, num_joints, frames, seed + 1, noise, persons) \
            if val_per_class else []
        save_jsonl(val_path, val)
        manifest = Manifest(layout=layout, classes=[f'class{c}' for c in range(classes)], train=[train_path],
                            val=[val_path])
        save_manifest(os.path.join(out_dir, 'manifest.json'), manifest)

    except Exception as e:
        print_error(str(e), ctx.obj['DEBUG'], exit_code(e))

    click.echo(f" Wrote {classes * per_class} train / {classes * val_per_class} val sequences to: {out_dir}")


# HGFormer: ablation command
@cli.command(short_help="Train the unit ablation ladder")
@click.argument('config_file', nargs=1, type=JsonFile(exists=True))
@click.option('--variant', type=click.Choice(ablation_variants()), multiple=True, help='Rungs to run (default all)')
@config_options
@click.pass_context
def ablate(ctx, config_file, variant, **overrides):

    try:
        config = load_config(config_file, overrides)
        dataset = prepare_dataset(config)
        results = run_ablation(config, dataset, config.output_dir, list(variant) or None)

    except Exception as e:
        print_error(str(e), ctx.obj['DEBUG'], exit_code(e))

    if ctx.obj['DEBUG']:
        click.echo()

    click.echo(f" {'VARIANT':<10} {'TRAIN':>8} {'VAL':>8} {'LOSS':>10}")
    for name, row in results.items():
        val = '-' if row['val_acc'] is None else f"{row['val_acc']:.4f}"
        click.echo(f" {name:<10} {row['train_acc']:>8.4f} {val:>8} {row['total']:>10.5f}")


def main():
    cli(obj={})


if __name__ == '__main__':
    main()
