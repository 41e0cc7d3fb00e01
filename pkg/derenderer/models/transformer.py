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

""" Transformer decoder: masked self-attention, cross-attention over image features and a feed-forward block
"""

import math
import warnings

import numpy as np

from ..exceptions import ConfigurationError, ShapeMismatch
from ..tensor import Tensor, softmax, relu, concat, dropout
from .base import Module, Linear, Embedding, LayerNorm
from .encoder import ImageFeatures

__all__ = ['positional_encoding', 'causal_mask', 'MultiHeadAttention', 'TransformerLayer', 'TransformerDecoder',
           'TransformerState']

ATTN_SCALES = ('dk', 'sqrt_dk')
PE_MODES = ('add', 'concat')
MASK_VALUE = -1e9


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """
    PE(pos, 2i) = sin(pos / 10000^(2i/dim)), PE(pos, 2i+1) = cos(pos / 10000^(2i/dim))

    Returns
    -------
    ndarray (length, dim) of float64
    """
    positions = np.arange(length, dtype = np.float64)[:, None]
    exponents = np.arange(0, dim, 2, dtype = np.float64) / dim
    angles = positions / np.power(10000.0, exponents)

    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, :dim // 2])
    return table


def causal_mask(length: int) -> np.ndarray:
    return np.triu(np.full((length, length), MASK_VALUE), k = 1)


class MultiHeadAttention(Module):
    """
    softmax(Q K^T / s) V per head, with s = d_k ('dk') or sqrt(d_k) ('sqrt_dk'), heads concatenated and projected
    """

    def __init__(self, d_model: int, heads: int, rng: np.random.Generator, attn_scale: str = 'sqrt_dk'):
        super().__init__()

        if d_model % heads != 0:
            raise ConfigurationError(f'd_model={d_model} is not divisible by heads={heads}')

        if attn_scale not in ATTN_SCALES:
            raise ConfigurationError(f'attn_scale must be one of {ATTN_SCALES}')

        self.heads = heads
        self.d_k = d_model // heads
        self.scale = 1.0 / (self.d_k if attn_scale == 'dk' else math.sqrt(self.d_k))
        self.last_weights = None

        self.query = self.register_module('query', Linear(d_model, d_model, rng))
        self.key = self.register_module('key', Linear(d_model, d_model, rng))
        self.value = self.register_module('value', Linear(d_model, d_model, rng))
        self.out = self.register_module('out', Linear(d_model, d_model, rng))

    def split_heads(self, x: Tensor) -> Tensor:
        batch, length = x.shape[:2]
        return x.reshape(batch, length, self.heads, self.d_k).transpose(0, 2, 1, 3)

    def forward(self, query_input: Tensor, memory: Tensor, mask: np.ndarray = None) -> Tensor:
        batch, length, d_model = query_input.shape

        q = self.split_heads(self.query(query_input))
        k = self.split_heads(self.key(memory))
        v = self.split_heads(self.value(memory))

        scores = (q @ k.transpose(0, 1, 3, 2)) * self.scale
        if mask is not None:
            scores = scores + Tensor(mask)

        weights = softmax(scores, axis = -1)
        self.last_weights = weights.data

        context = (weights @ v).transpose(0, 2, 1, 3).reshape(batch, length, d_model)
        return self.out(context)


class TransformerLayer(Module):
    """
    Post-norm decoder layer: self-attention, cross-attention and FFN, each followed by add & norm
    """

    def __init__(self, d_model: int, heads: int, d_ff: int, rng: np.random.Generator, attn_scale: str = 'sqrt_dk',
                 dropout: float = 0.1, dropout_rng: np.random.Generator = None):
        super().__init__()
        self.dropout = dropout
        self.dropout_rng = dropout_rng or np.random.default_rng(0)

        self.self_attn = self.register_module('self_attn', MultiHeadAttention(d_model, heads, rng, attn_scale))
        self.norm1 = self.register_module('norm1', LayerNorm(d_model))
        self.cross_attn = self.register_module('cross_attn', MultiHeadAttention(d_model, heads, rng, attn_scale))
        self.norm2 = self.register_module('norm2', LayerNorm(d_model))
        self.ffn_in = self.register_module('ffn_in', Linear(d_model, d_ff, rng))
        self.ffn_out = self.register_module('ffn_out', Linear(d_ff, d_model, rng))
        self.norm3 = self.register_module('norm3', LayerNorm(d_model))

    def _drop(self, x: Tensor) -> Tensor:
        return dropout(x, self.dropout, self.dropout_rng, self.training)

    def forward(self, x: Tensor, memory: Tensor, mask: np.ndarray) -> Tensor:
        x = self.norm1(x + self._drop(self.self_attn(x, x, mask)))
        x = self.norm2(x + self._drop(self.cross_attn(x, memory)))
        return self.norm3(x + self._drop(self.ffn_out(relu(self.ffn_in(x)))))


class TransformerState:

    def __init__(self, feats: ImageFeatures, ids: np.ndarray):
        self.feats = feats
        self.ids = ids


class TransformerDecoder(Module):
    """
    Stack of `layers` decoder layers over scaled token embeddings with sinusoidal positions, either added
    ('add') or concatenated and projected back to d_model ('concat').

    Parameters
    ----------
    vocab_size: output classes
    d_model: model width, equal to the image feature dimension
    heads: attention heads, must divide d_model
    layers: number of decoder layers
    d_ff: inner width of the feed-forward block
    max_length: longest supported sequence
    dropout: sublayer dropout (training mode only)
    attn_scale: 'sqrt_dk' or 'dk'
    pe_mode: 'add' or 'concat'
    rng: initialization generator
    dropout_rng: generator for dropout masks
    """

    def __init__(self, vocab_size: int, d_model: int = 128, heads: int = 4, layers: int = 4, d_ff: int = 128,
                 max_length: int = 80, dropout: float = 0.1, attn_scale: str = 'sqrt_dk', pe_mode: str = 'add',
                 rng: np.random.Generator = None, dropout_rng: np.random.Generator = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.dropout_rng = dropout_rng or np.random.default_rng(0)
        self.dropout = dropout

        if pe_mode not in PE_MODES:
            raise ConfigurationError(f'pe_mode must be one of {PE_MODES}')

        if attn_scale == 'dk':
            warnings.warn('attn_scale="dk" divides attention scores by d_k instead of sqrt(d_k)', UserWarning)

        self.d_model = d_model
        self.max_length = max_length
        self.pe_mode = pe_mode
        self.vocab_size = vocab_size
        self.positions = positional_encoding(max_length, d_model)

        self.embedding = self.register_module('embedding', Embedding(vocab_size, d_model, rng))
        self.pe_proj = self.register_module('pe_proj', Linear(2 * d_model, d_model, rng)) \
            if pe_mode == 'concat' else None

        self.layers = []
        for index in range(layers):
            layer = TransformerLayer(d_model, heads, d_ff, rng, attn_scale, dropout, self.dropout_rng)
            self.layers.append(self.register_module(f'layers.{index}', layer))

        self.output = self.register_module('output', Linear(d_model, vocab_size, rng))

    def embed(self, input_ids: np.ndarray) -> Tensor:
        batch, length = input_ids.shape
        x = self.embedding(input_ids) * math.sqrt(self.d_model)
        positions = self.positions[:length]

        if self.pe_mode == 'add':
            return x + Tensor(positions)

        tiled = Tensor(np.broadcast_to(positions, (batch, length, self.d_model)))
        return self.pe_proj(concat([x, tiled], axis = -1))

    def forward(self, feats: ImageFeatures, input_ids) -> Tensor:
        """
        Logits for every position of `input_ids` (batch, T); position t only sees tokens at positions <= t
        """
        input_ids = np.asarray(input_ids, dtype = np.int64)
        length = input_ids.shape[1]

        if length > self.max_length:
            raise ShapeMismatch(f'Sequence length {length} exceeds max_length {self.max_length}')

        if feats.d != self.d_model:
            raise ShapeMismatch(f'Feature dimension {feats.d} differs from d_model {self.d_model}')

        x = dropout(self.embed(input_ids), self.dropout, self.dropout_rng, self.training)
        mask = causal_mask(length)

        for layer in self.layers:
            x = layer(x, feats.values, mask)

        return self.output(x)

    def start(self, feats: ImageFeatures) -> TransformerState:
        return TransformerState(feats, np.zeros((feats.batch_size, 0), dtype = np.int64))

    def step(self, state: TransformerState, prev_ids) -> tuple:
        """
        Appends `prev_ids` to the prefix and returns the logits of the next position; the whole prefix is
        recomputed at every step
        """
        ids = np.concatenate([state.ids, np.asarray(prev_ids, dtype = np.int64)[:, None]], axis = 1)
        logits = self.forward(state.feats, ids)
        return TransformerState(state.feats, ids), logits[:, -1]
