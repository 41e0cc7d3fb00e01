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

""" Parameter containers and the basic layers shared by the encoder and both decoders
"""

import math
from collections import OrderedDict
from contextlib import contextmanager
from typing import Mapping

import numpy as np

from ..exceptions import CheckpointFormatError
from ..tensor import Tensor, conv2d, embedding, layer_norm, get_default_dtype

__all__ = ['Module', 'Linear', 'Embedding', 'LayerNorm', 'Conv2d', 'uniform_init']


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size = shape)


class Module:
    """
    Named tree of parameters. Parameters are leaf tensors with requires_grad, addressed by dotted names
    ("decoder.layers.0.self_attn.query.weight").
    """

    def __init__(self):
        self.training = True
        self._parameters = OrderedDict()
        self._modules = OrderedDict()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError()

    def register_parameter(self, name: str, value) -> Tensor:
        param = Tensor(value, requires_grad = True, name = name)
        self._parameters[name] = param
        return param

    def register_module(self, name: str, module: 'Module') -> 'Module':
        self._modules[name] = module
        return module

    def named_parameters(self, prefix: str = '') -> 'OrderedDict[str, Tensor]':
        params = OrderedDict()
        for name, param in self._parameters.items():
            params[prefix + name] = param
        for name, module in self._modules.items():
            params.update(module.named_parameters(f'{prefix}{name}.'))
        return params

    def num_parameters(self) -> int:
        return sum(param.size for param in self.named_parameters().values())

    def train(self, mode: bool = True) -> 'Module':
        self.training = mode
        for module in self._modules.values():
            module.train(mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)

    @contextmanager
    def inference(self):
        """
        Temporarily switches to evaluation mode (no dropout)
        """
        previous = self.training
        self.train(False)
        try:
            yield self
        finally:
            self.train(previous)

    def state_arrays(self) -> 'OrderedDict[str, np.ndarray]':
        return OrderedDict((name, param.data) for name, param in self.named_parameters().items())

    def load_arrays(self, arrays: Mapping[str, np.ndarray]):
        """
        Copies arrays into the parameters; names and shapes must match exactly
        """
        params = self.named_parameters()

        missing = set(params) - set(arrays)
        unexpected = set(arrays) - set(params)
        if missing or unexpected:
            raise CheckpointFormatError(
                f'Parameter names differ, missing: {sorted(missing)[:5]}, unexpected: {sorted(unexpected)[:5]}'
            )

        for name, param in params.items():
            value = np.asarray(arrays[name])
            if value.shape != param.shape:
                raise CheckpointFormatError(f'Parameter "{name}" has shape {value.shape}, expected {param.shape}')
            param.data = value.astype(param.data.dtype)

    def astype(self, dtype) -> 'Module':
        for param in self.named_parameters().values():
            param.data = param.data.astype(dtype)
        return self


class Linear(Module):

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = self.register_parameter('weight', uniform_init(rng, (in_features, out_features), in_features))
        self.bias = self.register_parameter('bias', uniform_init(rng, (out_features,), in_features)) if bias \
            else None

    def forward(self, x):
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class Embedding(Module):

    def __init__(self, num_embeddings: int, dim: int, rng: np.random.Generator):
        super().__init__()
        self.weight = self.register_parameter('weight', rng.normal(0.0, 0.02, size = (num_embeddings, dim)))

    def forward(self, ids):
        return embedding(self.weight, ids)


class LayerNorm(Module):

    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = self.register_parameter('gamma', np.ones(dim, dtype = get_default_dtype()))
        self.beta = self.register_parameter('beta', np.zeros(dim, dtype = get_default_dtype()))

    def forward(self, x):
        return layer_norm(x, self.gamma, self.beta, self.eps)


class Conv2d(Module):

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0):
        super().__init__()
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = self.register_parameter(
            'weight', uniform_init(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in)
        )
        self.bias = self.register_parameter('bias', uniform_init(rng, (out_channels,), fan_in))

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, stride = self.stride, padding = self.padding)
