# Derenderer Library
#
# Copyright 2026 The Derenderer Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

""" Dense tensors with reverse-mode automatic differentiation on top of numpy
"""

import threading
from contextlib import contextmanager
from typing import Callable, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ShapeMismatch, NotScalar

__all__ = [
    'Tensor', 'no_grad', 'is_grad_enabled', 'default_dtype', 'get_default_dtype', 'matmul', 'add', 'sub', 'mul',
    'div', 'tanh', 'sigmoid', 'relu', 'exp', 'log', 'softmax', 'log_softmax', 'layer_norm', 'embedding', 'conv2d',
    'max_pool2d', 'concat', 'stack', 'reshape', 'transpose', 'scale', 'dropout', 'cross_entropy', 'tensor_sum',
    'tensor_mean'
]

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, 'grad_enabled', True)


def get_default_dtype():
    return getattr(_state, 'dtype', np.float32)


@contextmanager
def no_grad():
    """
    Disables graph recording in the current thread
    """
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@contextmanager
def default_dtype(dtype):
    """
    Changes the floating point type of newly created tensors in the current thread (float64 for gradient checks)
    """
    previous = get_default_dtype()
    _state.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _state.dtype = previous


class Tensor:
    """
    n-dimensional float array participating in a reverse-mode autodiff graph. Every op records its parents and a
    closure mapping the output gradient to one gradient per parent; `backward` replays the closures in reverse
    topological order and accumulates into `grad` of the leaves that require it.
    """

    def __init__(self, data, requires_grad: bool = False, parents: Tuple['Tensor', ...] = (),
                 backward_fn: Callable = None, name: str = None):
        self.data = np.asarray(data, dtype = get_default_dtype())
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = parents
        self._backward_fn = backward_fn

    def __repr__(self):
        label = f' {self.name}' if self.name else ''
        return f'<Tensor{label} shape={self.shape} requires_grad={self.requires_grad}>'

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward_fn is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """
        Accumulates d(self)/d(leaf) into `grad` of every reachable leaf with requires_grad. Repeated calls
        accumulate; callers zero gradients between steps.
        """
        if self.data.size != 1:
            raise NotScalar(f'backward() needs a scalar loss, got shape {self.shape}')

        if not self.requires_grad:
            return

        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        grads = {id(self): np.ones_like(self.data)}

        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue

            if node._backward_fn is None:
                grad = np.asarray(grad, dtype = node.data.dtype).reshape(node.shape)
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue

            for parent, parent_grad in zip(node._parents, node._backward_fn(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + parent_grad
                else:
                    grads[id(parent)] = parent_grad

    # Operators

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

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis = None, keepdims: bool = False) -> 'Tensor':
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis = None, keepdims: bool = False) -> 'Tensor':
        return tensor_mean(self, axis, keepdims)

    def reshape(self, *shape) -> 'Tensor':
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> 'Tensor':
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data, parents: tuple, backward_fn: Callable) -> Tensor:
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad = True, parents = parents, backward_fn = backward_fn)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis = 0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis = axis, keepdims = True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f'Shapes {a.shape} and {b.shape} cannot be broadcast together')


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape(a, b)

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape(a, b)

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape(a, b)

    def backward(grad):
        return _unbroadcast(grad * b.data, a.shape), _unbroadcast(grad * a.data, b.shape)

    return _make(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape(a, b)

    def backward(grad):
        return _unbroadcast(grad / b.data, a.shape), _unbroadcast(-grad * a.data / (b.data ** 2), b.shape)

    return _make(a.data / b.data, (a, b), backward)


def scale(x, factor: float) -> Tensor:
    x = _as_tensor(x)

    def backward(grad):
        return grad * factor,

    return _make(x.data * factor, (x,), backward)


def matmul(a, b) -> Tensor:
    """
    Batched matrix product over the last two axes, leading axes broadcast
    """
    a, b = _as_tensor(a), _as_tensor(b)

    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f'Cannot multiply shapes {a.shape} and {b.shape}')

    def backward(grad):
        grad_a = np.matmul(grad, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), grad)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return _make(np.matmul(a.data, b.data), (a, b), backward)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    out = np.tanh(x.data)

    def backward(grad):
        return grad * (1 - out ** 2),

    return _make(out, (x,), backward)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    out = 0.5 * (np.tanh(0.5 * x.data) + 1)

    def backward(grad):
        return grad * out * (1 - out),

    return _make(out, (x,), backward)


def relu(x) -> Tensor:
    x = _as_tensor(x)

    def backward(grad):
        return grad * (x.data > 0),

    return _make(np.maximum(x.data, 0), (x,), backward)


def exp(x) -> Tensor:
    x = _as_tensor(x)
    out = np.exp(x.data)

    def backward(grad):
        return grad * out,

    return _make(out, (x,), backward)


def log(x) -> Tensor:
    x = _as_tensor(x)

    def backward(grad):
        return grad / x.data,

    return _make(np.log(x.data), (x,), backward)


def _softmax(values: np.ndarray, axis: int) -> np.ndarray:
    shifted = values - values.max(axis = axis, keepdims = True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis = axis, keepdims = True, dtype = np.float64).astype(values.dtype)


def softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    out = _softmax(x.data, axis)

    def backward(grad):
        return out * (grad - (grad * out).sum(axis = axis, keepdims = True)),

    return _make(out, (x,), backward)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis = axis, keepdims = True)
    log_norm = np.log(np.exp(shifted).sum(axis = axis, keepdims = True, dtype = np.float64))
    out = shifted - log_norm.astype(x.data.dtype)
    probs = np.exp(out)

    def backward(grad):
        return grad - probs * grad.sum(axis = axis, keepdims = True),

    return _make(out, (x,), backward)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """
    Normalizes over the last axis, then applies the elementwise affine (gamma, beta)
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)

    if gamma.shape != x.shape[-1:] or beta.shape != x.shape[-1:]:
        raise ShapeMismatch(f'layer_norm parameters {gamma.shape}/{beta.shape} do not match features {x.shape}')

    mean = x.data.mean(axis = -1, keepdims = True, dtype = np.float64)
    var = ((x.data - mean) ** 2).mean(axis = -1, keepdims = True)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.data.dtype)
    x_hat = ((x.data - mean) * inv_std).astype(x.data.dtype)

    def backward(grad):
        grad_hat = grad * gamma.data
        grad_x = inv_std * (
            grad_hat - grad_hat.mean(axis = -1, keepdims = True) -
            x_hat * (grad_hat * x_hat).mean(axis = -1, keepdims = True)
        )
        reduce_axes = tuple(range(grad.ndim - 1))
        return grad_x, (grad * x_hat).sum(axis = reduce_axes), grad.sum(axis = reduce_axes)

    return _make(x_hat * gamma.data + beta.data, (x, gamma, beta), backward)


def embedding(weight, ids) -> Tensor:
    """
    Row lookup `weight[ids]` for an integer id array of any shape
    """
    weight = _as_tensor(weight)
    ids = np.asarray(ids, dtype = np.int64)

    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise ShapeMismatch(f'Ids outside embedding table of {weight.shape[0]} rows')

    def backward(grad):
        grad_weight = np.zeros_like(weight.data)
        np.add.at(grad_weight, ids, grad)
        return grad_weight,

    return _make(weight.data[ids], (weight,), backward)


def _windows(padded: np.ndarray, kernel: tuple, stride: int) -> np.ndarray:
    return sliding_window_view(padded, kernel, axis = (2, 3))[:, :, ::stride, ::stride]


def conv2d(x, weight, bias = None, stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D cross-correlation via im2col

    Parameters
    ----------
    x: (N, C, H, W)
    weight: (O, C, kh, kw)
    bias: (O,) or None
    stride
    padding: zero padding on every side

    Returns
    -------
    Tensor (N, O, Ho, Wo)
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    parents = (x, weight) if bias is None else (x, weight, _as_tensor(bias))

    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f'conv2d input {x.shape} incompatible with weight {weight.shape}')

    kernel_h, kernel_w = weight.shape[2:]
    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

    if padded.shape[2] < kernel_h or padded.shape[3] < kernel_w:
        raise ShapeMismatch(f'conv2d kernel {weight.shape[2:]} larger than padded input {padded.shape[2:]}')

    cols = _windows(padded, (kernel_h, kernel_w), stride)
    out_h, out_w = cols.shape[2:4]

    out = np.einsum('nchwij,ocij->nohw', cols, weight.data, optimize = True)
    if bias is not None:
        out = out + parents[2].data[None, :, None, None]

    def backward(grad):
        grad_weight = np.einsum('nchwij,nohw->ocij', cols, grad, optimize = True)
        grad_cols = np.einsum('nohw,ocij->nchwij', grad, weight.data, optimize = True)

        grad_padded = np.zeros_like(padded)
        for i in range(kernel_h):
            for j in range(kernel_w):
                grad_padded[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += grad_cols[..., i, j]

        height, width = x.shape[2:]
        grad_x = grad_padded[:, :, padding:padding + height, padding:padding + width]

        if bias is None:
            return grad_x, grad_weight
        return grad_x, grad_weight, grad.sum(axis = (0, 2, 3))

    return _make(out, parents, backward)


def max_pool2d(x, kernel: int = 2, stride: int = None) -> Tensor:
    """
    Max pooling over (kernel x kernel) windows; the gradient flows to the first maximum of each window
    """
    x = _as_tensor(x)
    stride = stride or kernel

    if x.ndim != 4 or x.shape[2] < kernel or x.shape[3] < kernel:
        raise ShapeMismatch(f'max_pool2d kernel {kernel} does not fit input {x.shape}')

    cols = _windows(x.data, (kernel, kernel), stride)
    out_h, out_w = cols.shape[2:4]
    flat = cols.reshape(cols.shape[:4] + (kernel * kernel,))
    argmax = flat.argmax(axis = -1)

    def backward(grad):
        grad_x = np.zeros_like(x.data)
        for i in range(kernel):
            for j in range(kernel):
                selected = grad * (argmax == i * kernel + j)
                grad_x[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += selected
        return grad_x,

    return _make(flat.max(axis = -1), (x,), backward)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]

    try:
        out = np.concatenate([t.data for t in tensors], axis = axis)
    except ValueError as e:
        raise ShapeMismatch(f'Cannot concatenate shapes {[t.shape for t in tensors]}: {e}')

    boundaries = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(grad):
        return tuple(np.split(grad, boundaries, axis = axis))

    return _make(out, tuple(tensors), backward)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    expanded = []
    for t in tensors:
        position = axis if axis >= 0 else t.ndim + 1 + axis
        expanded.append(reshape(t, t.shape[:position] + (1,) + t.shape[position:]))
    return concat(expanded, axis = axis)


def reshape(x, shape: tuple) -> Tensor:
    x = _as_tensor(x)

    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeMismatch(f'Cannot reshape {x.shape} to {shape}')

    def backward(grad):
        return grad.reshape(x.shape),

    return _make(out, (x,), backward)


def transpose(x, axes: tuple = None) -> Tensor:
    x = _as_tensor(x)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))

    def backward(grad):
        return grad.transpose(inverse),

    return _make(x.data.transpose(axes), (x,), backward)


def getitem(x, index) -> Tensor:
    x = _as_tensor(x)

    def backward(grad):
        grad_x = np.zeros_like(x.data)
        np.add.at(grad_x, index, grad)
        return grad_x,

    return _make(x.data[index], (x,), backward)


def tensor_sum(x, axis = None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    out = x.data.sum(axis = axis, keepdims = keepdims, dtype = np.float64)

    def backward(grad):
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return np.broadcast_to(grad, x.shape).astype(x.data.dtype),

    return _make(out, (x,), backward)


def tensor_mean(x, axis = None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return scale(tensor_sum(x, axis, keepdims), 1.0 / max(count, 1))


def dropout(x, p: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """
    Inverted dropout: zeroes each element with probability `p` and rescales the rest by 1/(1-p)
    """
    x = _as_tensor(x)

    if not training or p == 0:
        return x

    mask = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return mul(x, Tensor(mask))


def cross_entropy(logits, targets, ignore_index: int = None, reduction: str = 'mean') -> Tensor:
    """
    Softmax cross-entropy over the last axis

    Parameters
    ----------
    logits: (..., V)
    targets: integer ids of shape logits.shape[:-1]
    ignore_index: target id that contributes neither loss nor gradient (PAD)
    reduction: 'mean' over non-ignored positions, 'sum', or 'none'

    Returns
    -------
    Tensor
    """
    logits = _as_tensor(logits)
    targets = np.asarray(targets, dtype = np.int64)

    if targets.shape != logits.shape[:-1]:
        raise ShapeMismatch(f'Targets {targets.shape} do not match logits {logits.shape}')

    if reduction not in ('mean', 'sum', 'none'):
        raise ValueError(f'Unknown reduction "{reduction}"')

    valid = np.ones(targets.shape, dtype = bool) if ignore_index is None else targets != ignore_index
    safe_targets = np.where(valid, targets, 0)

    shifted = logits.data - logits.data.max(axis = -1, keepdims = True)
    log_norm = np.log(np.exp(shifted).sum(axis = -1, keepdims = True, dtype = np.float64)).astype(shifted.dtype)
    log_probs = shifted - log_norm
    picked = np.take_along_axis(log_probs, safe_targets[..., None], axis = -1)[..., 0]
    losses = np.where(valid, -picked, 0)

    count = int(valid.sum())
    if reduction == 'none':
        out = losses
        factor = 1.0
    elif reduction == 'sum':
        out = losses.sum(dtype = np.float64)
        factor = 1.0
    else:
        out = losses.sum(dtype = np.float64) / max(count, 1)
        factor = 1.0 / max(count, 1)

    def backward(grad):
        grad_logits = np.exp(log_probs)
        np.put_along_axis(
            grad_logits, safe_targets[..., None], np.take_along_axis(grad_logits, safe_targets[..., None], -1) - 1, -1
        )
        grad_logits *= valid[..., None]
        if reduction == 'none':
            return grad_logits * grad[..., None],
        return grad_logits * (grad * factor),

    return _make(out, (logits,), backward)
