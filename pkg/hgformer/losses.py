# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


from dataclasses import dataclass, field

import numpy as np

from .exceptions import ArgumentError, DimensionError
from .numerics import Tensor, as_tensor, clamp_min, log

# probabilities are clamped here before the log
PROB_FLOOR = 1e-12


@dataclass
class LossBundle:
    """ Loss components of one forward pass and their weighted total """

    ce: float
    rec1: float
    rec2: float
    quant: float
    total: float
    betas: tuple
    objective: Tensor = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {'ce': self.ce, 'rec1': self.rec1, 'rec2': self.rec2, 'quant': self.quant, 'total': self.total}


def _check_labels(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
        raise ArgumentError("labels must be a 1-D integer array")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ArgumentError(f"labels must lie in [0, {num_classes})")
    return labels.astype(np.int64)


def cross_entropy(probs, labels) -> Tensor:
    """
    -(1/N) sum_n log p[n, label_n]

    :param probs: Probability rows (N, C)
    :param labels: Class ids (N,)
    """
    probs = as_tensor(probs)
    if probs.ndim != 2:
        raise DimensionError("cross entropy expects (N, C) probabilities", probs.shape)
    n, c = probs.shape
    labels = _check_labels(labels, c)
    if labels.size != n:
        raise DimensionError("one label per row expected", (labels.size,), probs.shape)
    picked = probs.reshape(-1).take(np.arange(n) * c + labels)
    return -log(clamp_min(picked, PROB_FLOOR)).mean()


def reconstruction(x, x_hat) -> Tensor:
    """ (1/N) sum over everything but the batch axis of (x - x_hat)^2 """
    x, x_hat = as_tensor(x), as_tensor(x_hat)
    if x.shape != x_hat.shape:
        raise DimensionError("reconstruction target and output differ", x.shape, x_hat.shape)
    diff = x - x_hat
    return (diff * diff).sum() * (1.0 / x.shape[0])


def _value(term) -> float:
    return term.item() if isinstance(term, Tensor) else float(term)


def total_loss(ce, rec1, rec2, quant, betas) -> LossBundle:
    """
    L_total = L_CE + b1 L_rec1 + b2 L_rec2 + b3 L_quant

    :param ce: Cross entropy (tensor or number)
    :param rec1: In-phase reconstruction loss
    :param rec2: Out-phase reconstruction loss
    :param quant: Quantization loss
    :param betas: (b1, b2, b3), non-negative
    """
    betas = tuple(float(b) for b in betas)
    if len(betas) != 3 or any(b < 0.0 for b in betas):
        raise ArgumentError(f"betas must be three non-negative numbers, got {betas}")
    b1, b2, b3 = betas
    objective = as_tensor(ce) + as_tensor(rec1) * b1 + as_tensor(rec2) * b2 + as_tensor(quant) * b3
    return LossBundle(ce=_value(ce), rec1=_value(rec1), rec2=_value(rec2), quant=_value(quant),
                      total=objective.item(), betas=betas, objective=objective)
