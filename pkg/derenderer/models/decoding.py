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

""" Greedy and sampling decoding, and teacher-forced sequence log-probabilities
"""

from typing import List, Sequence, Tuple

import numpy as np

from ..constants import BOS_ID, EOS_ID, PAD_ID
from ..tensor import Tensor, no_grad, log_softmax
from ..vocabulary import TokenSequence
from .encoder import ImageFeatures

__all__ = ['greedy_decode', 'sample_decode', 'sequence_log_prob', 'sequences_to_array']


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis = -1, keepdims = True)
    return shifted - np.log(np.exp(shifted).sum(axis = -1, keepdims = True))


def _run(model, feats: ImageFeatures, max_length: int, choose) -> Tuple[List[TokenSequence], np.ndarray]:
    batch = feats.batch_size
    rows = [[BOS_ID] for _ in range(batch)]
    finished = np.zeros(batch, dtype = bool)
    log_probs = np.zeros(batch)
    prev = np.full(batch, BOS_ID, dtype = np.int64)

    with no_grad(), model.inference():
        state = model.decoder.start(feats)

        for _ in range(max_length - 1):
            state, logits = model.decoder.step(state, prev)
            tokens, token_log_probs = choose(logits.data.astype(np.float64))

            for index in np.flatnonzero(~finished):
                rows[index].append(int(tokens[index]))
                log_probs[index] += token_log_probs[index]

            finished |= tokens == EOS_ID
            prev = np.where(finished, PAD_ID, tokens)

            if finished.all():
                break

    return [TokenSequence(tuple(row), max_length).padded() for row in rows], log_probs


def greedy_decode(model, feats: ImageFeatures, max_length: int = None) -> List[TokenSequence]:
    """
    Argmax decoding from BOS until EOS or `max_length` tokens; ties resolve to the lowest id

    Parameters
    ----------
    model: DerenderModel
    feats: ImageFeatures of the batch
    max_length: L, defaults to the model maximum

    Returns
    -------
    list of TokenSequence
    """
    max_length = max_length or model.max_length

    def choose(logits):
        tokens = logits.argmax(axis = -1)
        return tokens, np.take_along_axis(_log_softmax(logits), tokens[:, None], -1)[:, 0]

    sequences, _ = _run(model, feats, max_length, choose)
    return sequences


def sample_decode(model, feats: ImageFeatures, max_length: int = None, rng: np.random.Generator = None,
                  temperature: float = 1.0) -> Tuple[List[TokenSequence], np.ndarray]:
    """
    Ancestral sampling from softmax(logits / temperature), accumulating the log-probability of every sampled
    token (EOS included). A non-positive temperature decodes greedily.

    Parameters
    ----------
    model: DerenderModel
    feats: ImageFeatures
    max_length: L, defaults to the model maximum
    rng: numpy Generator
    temperature: softmax temperature

    Returns
    -------
    tuple of (list of TokenSequence, ndarray of log-probabilities)
    """
    max_length = max_length or model.max_length
    rng = rng or np.random.default_rng(0)

    def choose(logits):
        if temperature <= 0:
            tokens = logits.argmax(axis = -1)
            return tokens, np.take_along_axis(_log_softmax(logits), tokens[:, None], -1)[:, 0]

        token_log_probs = _log_softmax(logits / temperature)
        cumulative = np.cumsum(np.exp(token_log_probs), axis = -1)
        draws = rng.random(len(logits))
        tokens = np.minimum((cumulative < draws[:, None]).sum(axis = -1), logits.shape[-1] - 1)
        return tokens, np.take_along_axis(token_log_probs, tokens[:, None], -1)[:, 0]

    return _run(model, feats, max_length, choose)


def sequences_to_array(sequences: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    """
    (N, T) id array trimmed to the longest sequence, plus the length of every row. A row ends at its first EOS;
    a row without EOS keeps all of its ids.
    """
    rows = [list(seq.ids if isinstance(seq, TokenSequence) else seq) for seq in sequences]
    lengths = np.array([row.index(EOS_ID) + 1 if EOS_ID in row else len(row) for row in rows], dtype = np.int64)

    width = int(lengths.max()) if len(rows) else 1
    array = np.full((len(rows), width), PAD_ID, dtype = np.int64)
    for index, row in enumerate(rows):
        array[index, :lengths[index]] = row[:lengths[index]]
    return array, lengths


def sequence_log_prob(model, feats: ImageFeatures, sequences: Sequence, temperature: float = 1.0) -> Tensor:
    """
    Differentiable log p(sequence) under teacher forcing: the sum of the log-probabilities of every token after
    BOS up to and including the first EOS

    Parameters
    ----------
    model: DerenderModel
    feats: ImageFeatures
    sequences: TokenSequences (or id lists) starting with BOS
    temperature: softmax temperature of the scored distribution

    Returns
    -------
    Tensor of shape (N,)
    """
    ids, lengths = sequences_to_array(sequences)
    if ids.shape[1] < 2:
        return Tensor(np.zeros(len(ids)))

    inputs, targets = ids[:, :-1], ids[:, 1:]
    # Target j is scored when it lies inside its row (the first EOS included)
    mask = (np.arange(targets.shape[1])[None, :] < (lengths - 1)[:, None]).astype(np.float64)

    logits = model.decoder(feats, inputs)
    if temperature != 1.0:
        logits = logits * (1.0 / temperature)

    log_probs = log_softmax(logits, axis = -1)
    batch, length = targets.shape
    picked = log_probs[np.arange(batch)[:, None], np.arange(length)[None, :], targets]
    return (picked * Tensor(mask)).sum(axis = 1)
