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

""" Adam optimizer and gradient-norm clipping for named parameter sets
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from .tensor import Tensor

__all__ = ['AdamState', 'Adam', 'adam_step', 'clip_grad_norm', 'zero_grad']


@dataclass
class AdamState:
    """
    Per-parameter first/second moments keyed by parameter name, plus the step counter and hyperparameters
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory = dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory = dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError('lr must be positive')


def zero_grad(params: Mapping[str, Tensor]):
    for param in params.values():
        param.grad = None


def adam_step(params: Mapping[str, Tensor], state: AdamState):
    """
    One Adam update with bias correction; gradients are zeroed afterwards. A parameter without gradient is updated
    with a zero gradient.

    Parameters
    ----------
    params: mapping of name to Tensor
    state: AdamState, updated in place

    Returns
    -------

    """
    state.step += 1
    correction1 = 1 - state.beta1 ** state.step
    correction2 = 1 - state.beta2 ** state.step

    for name, param in params.items():
        grad = np.zeros(param.shape) if param.grad is None else param.grad.astype(np.float64)

        first = state.first_moment.get(name)
        second = state.second_moment.get(name)
        if first is None:
            first = np.zeros(param.shape)
            second = np.zeros(param.shape)

        first = state.beta1 * first + (1 - state.beta1) * grad
        second = state.beta2 * second + (1 - state.beta2) * grad ** 2
        state.first_moment[name] = first
        state.second_moment[name] = second

        update = state.lr * (first / correction1) / (np.sqrt(second / correction2) + state.eps)
        param.data = (param.data - update).astype(param.data.dtype)

    zero_grad(params)


def clip_grad_norm(params: Mapping[str, Tensor], max_norm: float) -> float:
    """
    Rescales all gradients so their joint l2 norm is at most `max_norm`

    Returns
    -------
    float: the norm before clipping
    """
    total = 0.0
    for param in params.values():
        if param.grad is not None:
            total += float(np.sum(param.grad.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))

    if max_norm and norm > max_norm:
        factor = max_norm / (norm + 1e-12)
        for param in params.values():
            if param.grad is not None:
                param.grad = (param.grad * factor).astype(param.grad.dtype)

    return norm


class Adam:

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-3, grad_clip: float = None):
        self.params = params
        self.state = AdamState(lr = lr)
        self.grad_clip = grad_clip

    def zero_grad(self):
        zero_grad(self.params)

    def step(self) -> float:
        norm = clip_grad_norm(self.params, self.grad_clip)
        adam_step(self.params, self.state)
        return norm
