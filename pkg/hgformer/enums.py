# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


from easy_enum import Enum


def labels(enum_class) -> list:
    """ Return the labels of an easy_enum class in declaration order """
    return [label for label, _, _ in enum_class]


def resolve(enum_class, key, what: str = 'value'):
    """
    Resolve label or value of an easy_enum class into its integer value

    :param enum_class: The easy_enum class
    :param key: Label string or integer value
    :param what: Name used in the error message
    """
    from .exceptions import ArgumentError
    for label, value, _ in enum_class:
        if key == label or key == value:
            return value
    raise ArgumentError(f"Unknown {what} '{key}', use one of: {', '.join(labels(enum_class))}")


########################################################################################################################
# Command Line Exit Codes
########################################################################################################################

class ExitCode(Enum):
    """ Process exit codes of the hgformer tool """

    OK = (0, 'Ok', 'Completed successfully')
    CONFIG = (1, 'ConfigError', 'Config, dataset or IO failure')
    NUMERIC = (2, 'NumericError', 'Non-finite loss or degenerate numerics')
    GRADCHECK = (3, 'GradCheckError', 'Gradient check exceeded tolerance')


########################################################################################################################
# Numerical Building Blocks
########################################################################################################################

class ActivationKind(Enum):
    """ Elementwise nonlinearities """

    RELU = (0, 'relu', 'Rectified linear unit')
    GELU = (1, 'gelu', 'Gaussian error linear unit (exact erf form)')
    SIGMOID = (2, 'sigmoid', 'Logistic sigmoid')


class AttentionMode(Enum):
    """ Normalization of aggregated attention scores """

    SOFTMAX = (0, 'softmax', 'Row softmax of the aggregated scores')
    LITERAL = (1, 'literal', 'Signed ratio a_ij / sum_j a_ij')


########################################################################################################################
# Training Options
########################################################################################################################

class HypergraphUpdate(Enum):
    """ Cadence of out-phase hypergraph regeneration """

    ITERATION = (0, 'iteration', 'Regenerate after every training iteration')
    EPOCH = (1, 'epoch', 'Regenerate on the last iteration of every epoch')


class AblationVariant(Enum):
    """ Architecture ladder of the unit ablation """

    FIXED = (0, 'fixed', 'Fixed random hypergraph, no in-phase, no temporal attention')
    OUT_PHASE = (1, 'out-phase', 'Adds out-phase hypergraph regeneration')
    IN_PHASE = (2, 'in-phase', 'Adds the in-phase quantized hypergraph')
    TEMPORAL = (3, 'temporal', 'Adds temporal attention (full model)')
