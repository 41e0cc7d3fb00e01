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

""" LSTM decoder with additive attention over the image features
"""

import numpy as np

from ..tensor import Tensor, tanh, sigmoid, softmax, concat, stack, dropout, get_default_dtype
from .base import Module, Linear, Embedding, uniform_init
from .encoder import ImageFeatures

__all__ = ['AdditiveAttention', 'LstmCell', 'LstmDecoder', 'LstmState']


class AdditiveAttention(Module):
    """
    e_i = v^T tanh(W f_i + U s + b), alpha = softmax(e), context = sum_i alpha_i f_i
    """

    def __init__(self, feature_dim: int, state_dim: int, attention_dim: int, rng: np.random.Generator):
        super().__init__()
        self.feature_proj = self.register_module('W', Linear(feature_dim, attention_dim, rng, bias = False))
        self.state_proj = self.register_module('U', Linear(state_dim, attention_dim, rng, bias = False))
        self.b = self.register_parameter('b', uniform_init(rng, (attention_dim,), state_dim))
        self.v = self.register_parameter('v', uniform_init(rng, (attention_dim, 1), attention_dim))

    def keys(self, features: Tensor) -> Tensor:
        """
        W f_i for every feature, computed once per sequence
        """
        return self.feature_proj(features)

    def forward(self, keys: Tensor, features: Tensor, state: Tensor) -> tuple:
        batch, count = keys.shape[:2]
        query = (self.state_proj(state) + self.b).reshape(batch, 1, -1)
        scores = (tanh(keys + query) @ self.v).reshape(batch, count)
        alpha = softmax(scores, axis = -1)
        context = (alpha.reshape(batch, 1, count) @ features).reshape(batch, -1)
        return context, alpha


class LstmCell(Module):

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        super().__init__()
        self.hidden_dim = hidden_dim
        self.input_proj = self.register_module('input', Linear(input_dim, 4 * hidden_dim, rng))
        self.hidden_proj = self.register_module('hidden', Linear(hidden_dim, 4 * hidden_dim, rng, bias = False))

    def forward(self, x: Tensor, hidden: Tensor, cell: Tensor) -> tuple:
        size = self.hidden_dim
        gates = self.input_proj(x) + self.hidden_proj(hidden)
        input_gate = sigmoid(gates[:, :size])
        forget_gate = sigmoid(gates[:, size:2 * size])
        candidate = tanh(gates[:, 2 * size:3 * size])
        output_gate = sigmoid(gates[:, 3 * size:])

        cell = forget_gate * cell + input_gate * candidate
        hidden = output_gate * tanh(cell)
        return hidden, cell


class LstmState:
    """
    Decoding state: per-layer (hidden, cell), the image features with their attention keys, and the last
    attention weights
    """

    def __init__(self, features: Tensor, keys: Tensor, layers: list):
        self.features = features
        self.keys = keys
        self.layers = layers
        self.alpha = None

    @property
    def top(self) -> Tensor:
        return self.layers[-1][0]


class LstmDecoder(Module):
    """
    Stacked LSTM decoder. At step t the top hidden state s_{t-1} attends over the image features, and the first
    layer consumes concat(context, E[o_{t-1}]).

    Parameters
    ----------
    vocab_size: output classes
    feature_dim: d of the image features
    hidden_dim: LSTM state size
    embed_dim: token embedding size d'
    layers: stacked LSTM layers
    dropout: dropout on the top state before the output projection
    rng: initialization generator
    dropout_rng: generator for dropout masks
    """

    def __init__(self, vocab_size: int, feature_dim: int = 128, hidden_dim: int = 128, embed_dim: int = 128,
                 layers: int = 4, dropout: float = 0.1, rng: np.random.Generator = None,
                 dropout_rng: np.random.Generator = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.dropout_rng = dropout_rng or np.random.default_rng(0)
        self.dropout = dropout
        self.hidden_dim = hidden_dim
        self.vocab_size = vocab_size

        self.embedding = self.register_module('embedding', Embedding(vocab_size, embed_dim, rng))
        self.attention = self.register_module(
            'attention', AdditiveAttention(feature_dim, hidden_dim, feature_dim, rng)
        )

        self.cells = []
        for index in range(layers):
            input_dim = feature_dim + embed_dim if index == 0 else hidden_dim
            self.cells.append(self.register_module(f'cells.{index}', LstmCell(input_dim, hidden_dim, rng)))

        self.output = self.register_module('output', Linear(hidden_dim, vocab_size, rng))

    def start(self, feats: ImageFeatures) -> LstmState:
        batch = feats.batch_size
        zeros = np.zeros((batch, self.hidden_dim), dtype = get_default_dtype())
        layers = [(Tensor(zeros), Tensor(zeros)) for _ in self.cells]
        return LstmState(feats.values, self.attention.keys(feats.values), layers)

    def step(self, state: LstmState, prev_ids) -> tuple:
        """
        One decoding step

        Parameters
        ----------
        state: LstmState holding s_{t-1}
        prev_ids: (batch,) ids of o_{t-1}

        Returns
        -------
        tuple of (LstmState, logits Tensor (batch, vocab))
        """
        context, alpha = self.attention(state.keys, state.features, state.top)

        x = concat([context, self.embedding(np.asarray(prev_ids, dtype = np.int64))], axis = -1)

        layers = []
        for cell, (hidden, memory) in zip(self.cells, state.layers):
            hidden, memory = cell(x, hidden, memory)
            layers.append((hidden, memory))
            x = hidden

        x = dropout(x, self.dropout, self.dropout_rng, self.training)

        new_state = LstmState(state.features, state.keys, layers)
        new_state.alpha = alpha
        return new_state, self.output(x)

    def forward(self, feats: ImageFeatures, input_ids) -> Tensor:
        """
        Teacher-forced logits for every position of `input_ids` (batch, T), which starts with BOS
        """
        input_ids = np.asarray(input_ids, dtype = np.int64)
        state = self.start(feats)

        logits = []
        for t in range(input_ids.shape[1]):
            state, step_logits = self.step(state, input_ids[:, t])
            logits.append(step_logits)

        return stack(logits, axis = 1)

