# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


import json
import os
from dataclasses import asdict, dataclass, fields, replace

from .encoder import EncoderConfig
from .enums import AblationVariant, AttentionMode, HypergraphUpdate, labels, resolve
from .exceptions import ArgumentError, ConfigError

# preprocessing threads
THREADS_ENV = 'HGFORMER_THREADS'


########################################################################################################################
# Run configuration
########################################################################################################################

@dataclass(frozen=True)
class RunConfig:
    """ Every model, optimizer, data and runtime setting of one run """

    # data
    manifest: str = ''
    layout: str = 'nwucla20'
    num_persons: int = 1
    in_channels: int = 3
    frames: int = 64
    synth_classes: int = 3
    synth_per_class: int = 8
    synth_frames: int = 40
    synth_noise: float = 0.02
    # model
    hyperedges: int = 5
    low_dim: int = 8
    hidden_channels: int = 216
    heads: int = 4
    n_faht: int = 5
    split: tuple = (2, 3)
    alpha: float = 0.2
    lambda1: float = 1.0
    lambda2: float = 1.0
    trainable_lambdas: bool = False
    attention_mode: str = 'softmax'
    joint_attention: bool = True
    hyperedge_attention: bool = True
    bone_attention: bool = True
    temporal_attention: bool = True
    in_phase: bool = True
    out_phase: bool = True
    hypergraph_update: str = 'iteration'
    decoder_channels: tuple = (128, 64, 32)
    decoder_tap: int = 3
    se_reduction: int = 2
    han_reduction: int = 2
    kmeans_iter: int = 100
    betas: tuple = (0.9, 0.9, 0.25)
    # optimizer
    lr: float = 0.025
    lr_decay_epochs: tuple = (110, 120)
    lr_decay_factor: float = 0.1
    momentum: float = 0.9
    nesterov: bool = True
    weight_decay: float = 0.0004
    epochs: int = 140
    batch_size: int = 64
    # runtime
    seed: int = 0
    output_dir: str = 'runs'
    checkpoint_every: int = 10
    prefetch: int = 2
    # gradient check
    gradcheck_eps: float = 1e-5
    gradcheck_tol: float = 1e-4
    gradcheck_floor: float = 1e-5
    gradcheck_coords: int = 3

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type is tuple and isinstance(value, list):
                object.__setattr__(self, f.name, tuple(value))

    def validate(self) -> 'RunConfig':
        """ Raise ConfigError on the first inconsistent setting """
        checks = [
            (self.hyperedges >= 2, "hyperedges must be at least 2"),
            (self.low_dim >= 1, "low_dim must be positive"),
            (self.frames >= 1 and self.synth_frames >= 1, "frame counts must be positive"),
            (self.in_channels >= 1 and self.num_persons >= 1, "in_channels and num_persons must be positive"),
            (len(self.betas) == 3 and min(self.betas) >= 0.0, "betas must be three non-negative numbers"),
            (self.lr >= 0.0 and 0.0 <= self.momentum < 1.0, "lr must be >= 0 and momentum in [0, 1)"),
            (self.weight_decay >= 0.0, "weight_decay must be >= 0"),
            (self.epochs >= 0 and self.batch_size >= 1, "epochs >= 0 and batch_size >= 1 required"),
            (self.alpha >= 0.0, "alpha must be >= 0"),
            (len(self.decoder_channels) >= 1, "decoder_channels needs at least one width"),
            (1 <= self.decoder_tap <= len(self.decoder_channels) + 1, "decoder_tap outside the decoder"),
            (self.gradcheck_eps > 0.0 and self.gradcheck_coords >= 1, "gradcheck_eps and gradcheck_coords > 0"),
            (self.synth_classes >= 2 and self.synth_per_class >= 1, "synthetic set needs >= 2 classes"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        try:
            resolve(HypergraphUpdate, self.hypergraph_update, 'hypergraph update')
            resolve(AttentionMode, self.attention_mode, 'attention mode')
            self.encoder_config().validate()
        except ArgumentError as e:
            raise ConfigError(e.description)
        return self

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(n_faht=self.n_faht, split=tuple(self.split), hidden_channels=self.hidden_channels,
                             heads=self.heads, lambda1=self.lambda1, lambda2=self.lambda2,
                             attention_mode=self.attention_mode, trainable_lambdas=self.trainable_lambdas,
                             joint_attention=self.joint_attention, hyperedge_attention=self.hyperedge_attention,
                             bone_attention=self.bone_attention, temporal_attention=self.temporal_attention,
                             in_phase=self.in_phase, in_channels=self.in_channels, frames=self.frames,
                             se_reduction=self.se_reduction)

    def override(self, **values) -> 'RunConfig':
        """ Copy with the given (not None) fields replaced """
        values = {k: v for k, v in values.items() if v is not None}
        unknown = set(values) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return replace(self, **values)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, values: dict) -> 'RunConfig':
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(str(e))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path: str):
        with open(path, 'w', encoding='utf8') as f:
            f.write(self.dumps() + '\n')

    @classmethod
    def loads(cls, text: str) -> 'RunConfig':
        try:
            values = json.loads(text)
        except ValueError as e:
            raise ConfigError(f"invalid JSON ({e})")
        if not isinstance(values, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(values)

    @classmethod
    def load(cls, path: str) -> 'RunConfig':
        try:
            with open(path, 'r', encoding='utf8') as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read {path} ({e.strerror})")
        return cls.loads(text)


def thread_count() -> int:
    """ Preprocessing threads from the environment, 1 when unset """
    value = os.environ.get(THREADS_ENV, '1')
    try:
        count = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got '{value}'")
    return max(1, count)


########################################################################################################################
# Ablation ladder
########################################################################################################################

_LADDER = {
    AblationVariant.FIXED: dict(out_phase=False, in_phase=False, temporal_attention=False),
    AblationVariant.OUT_PHASE: dict(out_phase=True, in_phase=False, temporal_attention=False),
    AblationVariant.IN_PHASE: dict(out_phase=True, in_phase=True, temporal_attention=False),
    AblationVariant.TEMPORAL: dict(out_phase=True, in_phase=True, temporal_attention=True),
}


def ablation_config(config: RunConfig, variant) -> RunConfig:
    """
    Switch the units of one rung of the ablation ladder

    :param config: Base configuration
    :param variant: Label or value of AblationVariant
    """
    try:
        value = resolve(AblationVariant, variant, 'ablation variant')
    except ArgumentError as e:
        raise ConfigError(e.description)
    return config.override(**_LADDER[value])


def ablation_variants() -> list:
    return labels(AblationVariant)
