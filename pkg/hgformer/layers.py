# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


from collections import OrderedDict

import numpy as np

from .numerics import Parameter, Tensor, as_tensor, matmul


########################################################################################################################
# Parameter container
########################################################################################################################

class Block:
    """ Owner of named parameters and child blocks """

    def __init__(self):
        self._params = OrderedDict()
        self._children = OrderedDict()

    def param(self, name: str, array) -> Parameter:
        p = Parameter(array, name)
        self._params[name] = p
        return p

    def child(self, name: str, block: 'Block') -> 'Block':
        self._children[name] = block
        return block

    def named_parameters(self, prefix: str = '') -> 'OrderedDict[str, Parameter]':
        """
        Return all parameters keyed by their dotted path

        :param prefix: Path of this block
        """
        result = OrderedDict()
        for name, p in self._params.items():
            result[prefix + name] = p
        for name, block in self._children.items():
            result.update(block.named_parameters(f"{prefix}{name}."))
        return result

    def parameters(self) -> list:
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out) if shape is None else shape)


class Linear(Block):
    """ y = x W (+ b) over the last axis """

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = self.param('weight', glorot(rng, in_features, out_features))
        self.bias = self.param('bias', np.zeros(out_features)) if bias else None

    def __call__(self, x) -> Tensor:
        x = as_tensor(x)
        y = matmul(x, self.weight) if x.ndim >= 2 else matmul(x.reshape(1, -1), self.weight).reshape(-1)
        if self.bias is not None:
            y = y + self.bias.broadcast_to(y.shape)
        return y
