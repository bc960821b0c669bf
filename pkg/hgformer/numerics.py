# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText

"""
Dense float64 tensors with a reverse-mode gradient record.

Elementwise operations never broadcast implicitly, except between a tensor and a scalar (a Python number or a
0-d tensor). Everything else goes through explicit ``reshape`` / ``broadcast_to`` / ``transpose`` calls so every
adjoint stays easy to audit. ``matmul`` follows numpy's batched matrix rules.
"""

import threading
from contextlib import contextmanager
from logging import getLogger
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import erf, expit

from .enums import ActivationKind, resolve
from .exceptions import ArgumentError, DimensionError, NumericError

logger = getLogger('HGFORMER:NUMERICS')

Number = Union[int, float]

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


########################################################################################################################
# Helpers
########################################################################################################################

def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """ Sum a gradient over the axes that broadcasting added or stretched """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _swap_last(array: np.ndarray) -> np.ndarray:
    return np.swapaxes(array, -1, -2)


class _AdjointHooks(threading.local):
    def __init__(self):
        self.scales = {}


_hooks = _AdjointHooks()


@contextmanager
def scaled_adjoint(op: str, factor: float):
    """
    Multiply every adjoint of the named primitive by ``factor`` while the context is active.

    Used to prove that the gradient checker notices a broken backward rule.

    :param op: Primitive name (e.g. 'gelu', 'matmul')
    :param factor: Scale applied to the adjoint contributions
    """
    previous = _hooks.scales.get(op)
    _hooks.scales[op] = factor
    try:
        yield
    finally:
        if previous is None:
            _hooks.scales.pop(op, None)
        else:
            _hooks.scales[op] = previous


########################################################################################################################
# Tensor
########################################################################################################################

class _Record:
    """ One primitive application: its name, inputs and adjoint rule """

    __slots__ = ('op', 'parents', 'adjoint')

    def __init__(self, op: str, parents: tuple, adjoint: Callable):
        self.op = op
        self.parents = parents
        self.adjoint = adjoint


class Tensor:
    """ Immutable dense float64 array with an optional gradient record """

    __slots__ = ('_data', 'requires_grad', 'grad', '_record', '__weakref__')

    def __init__(self, data, requires_grad: bool = False):
        self._data = _frozen(np.array(data, dtype=np.float64))
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._record = None

    @classmethod
    def _wrap(cls, array: np.ndarray, record: Optional[_Record] = None) -> 'Tensor':
        obj = cls.__new__(cls)
        obj._data = _frozen(np.asarray(array, dtype=np.float64))
        obj.requires_grad = record is not None
        obj.grad = None
        obj._record = record
        return obj

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def op(self) -> Optional[str]:
        return None if self._record is None else self._record.op

    def __repr__(self):
        return f"<Tensor shape={self.shape}, requires_grad={self.requires_grad}, op={self.op}>"

    def __len__(self):
        return self.shape[0]

    def numpy(self) -> np.ndarray:
        return self._data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError("item() needs a single element tensor", self.shape)
        return float(self._data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """
        Run the reverse pass from this tensor.

        :param grad: Seed gradient, defaults to 1 for a single element tensor
        """
        if grad is None:
            if self.size != 1:
                raise DimensionError("backward() without seed needs a scalar output", self.shape)
            grad = np.ones(self.shape)
        GradTape(self).backward(np.asarray(grad, dtype=np.float64))

    # arithmetic
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    # structural helpers
    def sum(self, axis=None, keepdims: bool = False) -> 'Tensor':
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> 'Tensor':
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape) -> 'Tensor':
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> 'Tensor':
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def broadcast_to(self, shape) -> 'Tensor':
        return broadcast_to(self, shape)

    def take(self, indices, axis: int = 0) -> 'Tensor':
        return take(self, indices, axis)


class Parameter(Tensor):
    """ Trainable leaf tensor that keeps its name for checkpoints and gradient reports """

    __slots__ = ('name',)

    def __init__(self, data, name: str = ''):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"<Parameter {self.name} shape={self.shape}>"

    def assign(self, array):
        """
        Replace the stored values, keeping the shape

        :param array: New values
        """
        array = np.array(array, dtype=np.float64)
        if array.shape != self.shape:
            raise DimensionError(f"cannot assign to parameter '{self.name}'", array.shape, self.shape)
        self._data = _frozen(array)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(op: str, array: np.ndarray, parents: Sequence[Tensor], adjoint: Callable) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor._wrap(array, _Record(op, tuple(parents), adjoint))
    return Tensor._wrap(array)


########################################################################################################################
# Gradient Tape
########################################################################################################################

class GradTape:
    """ Primitive applications reachable from an output, in forward (topological) order """

    def __init__(self, output: Tensor):
        self.output = output
        self.records = self._collect(output)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @staticmethod
    def _collect(output: Tensor) -> list:
        order, visited = [], set()
        stack = [(output, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited or not tensor.requires_grad:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            if tensor._record is not None:
                for parent in tensor._record.parents:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order

    def backward(self, seed: np.ndarray):
        if seed.shape != self.output.shape:
            raise DimensionError("seed gradient shape differs from output", seed.shape, self.output.shape)
        pending = {id(self.output): seed}
        for tensor in reversed(self.records):
            grad = pending.pop(id(tensor), None)
            if grad is None:
                continue
            tensor.grad = grad if tensor.grad is None else tensor.grad + grad
            record = tensor._record
            if record is None:
                continue
            scale = _hooks.scales.get(record.op)
            for parent, parent_grad in zip(record.parents, record.adjoint(grad)):
                if not parent.requires_grad or parent_grad is None:
                    continue
                if scale is not None:
                    parent_grad = parent_grad * scale
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad


########################################################################################################################
# Surrogate record / replay for finite differences
########################################################################################################################

class _SurrogateState(threading.local):
    def __init__(self):
        self.mode = None
        self.values = []
        self.cursor = 0


_surrogate = _SurrogateState()


@contextmanager
def surrogate_record():
    """ Remember the values held fixed by stop_gradient / straight_through during one forward """
    _surrogate.mode, _surrogate.values, _surrogate.cursor = 'record', [], 0
    try:
        yield
    finally:
        _surrogate.mode = None


@contextmanager
def surrogate_replay():
    """ Evaluate the surrogate function: recorded values stand in for the stopped branches """
    if not _surrogate.values:
        _surrogate.mode = None
        yield
        return
    _surrogate.mode, _surrogate.cursor = 'replay', 0
    try:
        yield
    finally:
        _surrogate.mode = None


def _surrogate_next(op: str):
    if _surrogate.cursor >= len(_surrogate.values):
        raise NumericError(f"surrogate replay ran past the recorded {op} values")
    name, value = _surrogate.values[_surrogate.cursor]
    _surrogate.cursor += 1
    if name != op:
        raise NumericError(f"surrogate replay expected {name}, got {op}")
    return value


########################################################################################################################
# Elementwise primitives
########################################################################################################################

def _pair(a, b, op: str):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise DimensionError(f"{op} needs equal shapes or a scalar operand", a.shape, b.shape)
    return a, b


def add(a, b) -> Tensor:
    a, b = _pair(a, b, 'add')
    return _result('add', a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _pair(a, b, 'sub')
    return _result('sub', a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b, 'mul')
    return _result('mul', a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = _pair(a, b, 'div')
    out = a.data / b.data
    return _result('div', out, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)))


def neg(x) -> Tensor:
    x = as_tensor(x)
    return _result('neg', -x.data, (x,), lambda g: (-g,))


def power(x, exponent: Number) -> Tensor:
    x = as_tensor(x)
    exponent = float(exponent)
    return _result('pow', x.data ** exponent, (x,), lambda g: (g * exponent * x.data ** (exponent - 1.0),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _result('exp', out, (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return _result('log', np.log(x.data), (x,), lambda g: (g / x.data,))


def clamp_min(x, low: float) -> Tensor:
    """ max(x, low); the gradient passes only where x > low """
    x = as_tensor(x)
    mask = x.data > low
    return _result('clamp_min', np.where(mask, x.data, low), (x,), lambda g: (g * mask,))


def activate(kind, x) -> Tensor:
    """
    Elementwise nonlinearity

    :param kind: 'relu', 'gelu' or 'sigmoid' (label or ActivationKind value)
    :param x: Input tensor
    """
    kind = resolve(ActivationKind, kind, 'activation')
    x = as_tensor(x)
    v = x.data
    if kind == ActivationKind.RELU:
        mask = v > 0.0
        return _result('relu', np.where(mask, v, 0.0), (x,), lambda g: (g * mask,))
    if kind == ActivationKind.GELU:
        cdf = 0.5 * (1.0 + erf(v / _SQRT2))
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * v * v)
        return _result('gelu', v * cdf, (x,), lambda g: (g * (cdf + v * pdf),))
    out = expit(v)
    return _result('sigmoid', out, (x,), lambda g: (g * out * (1.0 - out),))


def relu(x) -> Tensor:
    return activate(ActivationKind.RELU, x)


def gelu(x) -> Tensor:
    return activate(ActivationKind.GELU, x)


def sigmoid(x) -> Tensor:
    return activate(ActivationKind.SIGMOID, x)


def softmax(x, axis: int = -1) -> Tensor:
    """ Max-shifted softmax along one axis """
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def adjoint(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _result('softmax', out, (x,), adjoint)


def softmax_rows(x) -> Tensor:
    """ Row softmax of an m x n matrix """
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError("softmax_rows needs a matrix", x.shape)
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax_rows got non-finite scores")
    return softmax(x, axis=-1)


########################################################################################################################
# Gradient routing
########################################################################################################################

def stop_gradient(x) -> Tensor:
    """ Forward identity, zero adjoint """
    x = as_tensor(x)
    if _surrogate.mode == 'replay':
        return Tensor(_surrogate_next('stop_gradient'))
    if _surrogate.mode == 'record':
        _surrogate.values.append(('stop_gradient', x.data))
    return _result('stop_gradient', x.data, (x,), lambda g: (np.zeros_like(g),))


def straight_through(quantized, original) -> Tensor:
    """
    Forward value of ``quantized``; the whole incoming gradient is copied to ``original``

    :param quantized: Values emitted downstream
    :param original: Tensor that receives the gradient
    """
    quantized, original = as_tensor(quantized), as_tensor(original)
    if quantized.shape != original.shape:
        raise DimensionError("straight_through needs equal shapes", quantized.shape, original.shape)
    if _surrogate.mode == 'replay':
        q0, e0 = _surrogate_next('straight_through')
        return Tensor(q0 + (original.data - e0))
    if _surrogate.mode == 'record':
        _surrogate.values.append(('straight_through', (quantized.data, original.data)))
    return _result('straight_through', quantized.data, (quantized, original),
                   lambda g: (np.zeros_like(g), g))


########################################################################################################################
# Linear algebra and structure
########################################################################################################################

def matmul(a, b) -> Tensor:
    """
    Matrix product; leading (batch) axes follow numpy broadcasting

    :param a: Tensor [..., m, k]
    :param b: Tensor [..., k, n]
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul inner dimensions disagree", a.shape, b.shape)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError("matmul batch dimensions disagree", a.shape, b.shape)
    return _result('matmul', out, (a, b),
                   lambda g: (_unbroadcast(np.matmul(g, _swap_last(b.data)), a.shape),
                              _unbroadcast(np.matmul(_swap_last(a.data), g), b.shape)))


def reduce_sum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def adjoint(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result('sum', out, (x,), adjoint)


def reduce_mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return reduce_sum(x, axis, keepdims) * (1.0 / count)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)
    return _result('reshape', out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _result('transpose', np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def swap_last(x) -> Tensor:
    x = as_tensor(x)
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def broadcast_to(x, shape) -> Tensor:
    """ Explicit broadcast; size-1 and missing leading axes are stretched """
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise DimensionError("cannot broadcast", x.shape, shape)
    return _result('broadcast_to', out, (x,), lambda g: (_unbroadcast(g, x.shape),))


def take(x, indices, axis: int = 0) -> Tensor:
    """ Gather slices along an axis; repeated indices accumulate gradient """
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.int64)
    axis = axis % x.ndim

    def adjoint(g):
        out = np.zeros(x.shape)
        moved_out = np.moveaxis(out, axis, 0)
        index_axes = list(range(axis, axis + indices.ndim))
        moved_g = np.moveaxis(g, index_axes, list(range(indices.ndim)))
        np.add.at(moved_out, indices.reshape(-1), moved_g.reshape((indices.size,) + moved_out.shape[1:]))
        return (out,)

    return _result('take', np.take(x.data, indices, axis=axis), (x,), adjoint)


def concatenate(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    axis = axis % tensors[0].ndim
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result('concatenate', np.concatenate([t.data for t in tensors], axis=axis), tensors,
                   lambda g: tuple(np.split(g, bounds, axis=axis)))


########################################################################################################################
# Finite-difference gradient check
########################################################################################################################

def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """ |a - n| / max(|a|, |n|, floor), elementwise """
    analytic, numeric = np.asarray(analytic, dtype=np.float64), np.asarray(numeric, dtype=np.float64)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def _scalar_value(y: Tensor) -> float:
    if not isinstance(y, Tensor) or y.size != 1:
        raise DimensionError("grad_check needs a scalar-valued function", getattr(y, 'shape', ()))
    value = y.item()
    if not np.isfinite(value):
        raise NumericError(f"function value is not finite ({value})")
    return value


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5, indices=None,
               floor: float = 1e-6) -> float:
    """
    Compare the reverse-mode gradient of ``f`` at ``x`` with central differences.

    Stop-gradient and straight-through values seen during the analytic pass are replayed during the finite
    differences, so both sides differentiate the same surrogate function.

    :param f: Scalar-valued function of x
    :param x: Leaf tensor (or Parameter) to perturb
    :param eps: Central-difference step
    :param indices: Flat coordinates to check, all when None
    :param floor: Denominator floor of the relative error
    :return: Maximum relative error over the checked coordinates
    """
    if not isinstance(x, Tensor) or x._record is not None:
        raise ArgumentError("grad_check needs a leaf tensor")
    requires_grad = x.requires_grad
    base = x.data.copy()
    worst = 0.0
    try:
        x.requires_grad = True
        x.grad = None
        with surrogate_record():
            y = f(x)
            _scalar_value(y)
            y.backward()
        analytic = np.zeros(x.shape) if x.grad is None else x.grad.copy()

        indices = range(x.size) if indices is None else [int(i) for i in indices]
        for index in indices:
            values = []
            for step in (eps, -eps):
                probe = base.copy()
                probe.flat[index] += step
                x._data = _frozen(probe)
                with surrogate_replay():
                    values.append(_scalar_value(f(x)))
            numeric = (values[0] - values[1]) / (2.0 * eps)
            error = float(relative_error(analytic.flat[index], numeric, floor))
            logger.debug(f"grad_check[{index}]: analytic={analytic.flat[index]!r}, numeric={numeric!r}")
            worst = max(worst, error)
    finally:
        x._data = _frozen(base)
        x.grad = None
        x.requires_grad = requires_grad
    return worst
