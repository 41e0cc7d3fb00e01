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

""" Encoder-decoder de-rendering model and its checkpoint round-trip
"""

import logging
from typing import Sequence

import numpy as np

from ..checkpoint import save_checkpoint, load_checkpoint
from ..exceptions import ConfigurationError, CheckpointFormatError
from ..tensor import Tensor, get_default_dtype
from ..utils.hasher import derive_rng
from .base import Module
from .encoder import ImageEncoder, ImageFeatures
from .lstm import LstmDecoder
from .transformer import TransformerDecoder

__all__ = ['DerenderModel', 'images_to_array', 'MODEL_KEYS']

logger = logging.getLogger(__name__)

MODEL_TYPES = ('lstm', 'transformer')

# Hyperparameters that determine the parameter layout, echoed in every checkpoint
MODEL_KEYS = (
    'model', 'seed', 'd_model', 'heads', 'layers', 'd_ff', 'lstm_layers', 'dropout', 'attn_scale', 'pe_mode',
    'encoder_channels', 'vocab_size', 'image_shape', 'max_length'
)


def images_to_array(images: Sequence) -> np.ndarray:
    """
    Stacks RasterImages (or (C, H, W) arrays) into a (N, C, H, W) batch with intensities in [0,1]
    """
    arrays = [img.to_float() if hasattr(img, 'to_float') else np.asarray(img) for img in images]
    return np.stack(arrays).astype(get_default_dtype())


class DerenderModel(Module):
    """
    Image encoder plus an LSTM or Transformer decoder over one vocabulary

    Parameters
    ----------
    config: dict with the keys of MODEL_KEYS
    """

    def __init__(self, config: dict):
        super().__init__()

        missing = [key for key in MODEL_KEYS if key not in config]
        if missing:
            raise ConfigurationError(f'Model config misses {missing}')

        self.config = {key: config[key] for key in MODEL_KEYS}
        self.config['image_shape'] = list(self.config['image_shape'])
        self.config['encoder_channels'] = list(self.config['encoder_channels'])

        if self.config['model'] not in MODEL_TYPES:
            raise ConfigurationError(f'Unknown model "{self.config["model"]}", valid values are {MODEL_TYPES}')

        if self.config['encoder_channels'][-1] != self.config['d_model']:
            raise ConfigurationError('The last encoder stage must output d_model channels')

        seed = self.config['seed']
        rng = derive_rng(seed, 'init')
        dropout_rng = derive_rng(seed, 'dropout')

        self.encoder = self.register_module(
            'encoder', ImageEncoder(self.config['image_shape'], self.config['encoder_channels'], rng)
        )

        if self.config['model'] == 'lstm':
            decoder = LstmDecoder(
                self.config['vocab_size'], feature_dim = self.config['d_model'], hidden_dim = self.config['d_model'],
                embed_dim = self.config['d_model'], layers = self.config['lstm_layers'],
                dropout = self.config['dropout'], rng = rng, dropout_rng = dropout_rng
            )
        else:
            decoder = TransformerDecoder(
                self.config['vocab_size'], d_model = self.config['d_model'], heads = self.config['heads'],
                layers = self.config['layers'], d_ff = self.config['d_ff'], max_length = self.config['max_length'],
                dropout = self.config['dropout'], attn_scale = self.config['attn_scale'],
                pe_mode = self.config['pe_mode'], rng = rng, dropout_rng = dropout_rng
            )

        self.decoder = self.register_module('decoder', decoder)

        logger.debug(f'Built {self.config["model"]} model with {self.num_parameters()} parameters')

    @property
    def max_length(self) -> int:
        return self.config['max_length']

    def encode(self, images) -> ImageFeatures:
        if not isinstance(images, (np.ndarray, Tensor)):
            images = images_to_array(images)
        return self.encoder(images)

    def forward(self, images, input_ids) -> Tensor:
        return self.decoder(self.encode(images), input_ids)

    def save(self, path: str, extra: dict = None):
        """
        Writes a DRND1 checkpoint; `extra` is merged into the config echo
        """
        config = dict(extra or {})
        config.update(self.config)
        save_checkpoint(path, self.state_arrays(), config)

    @classmethod
    def load(cls, path: str) -> 'DerenderModel':
        config, arrays = load_checkpoint(path)
        try:
            model = cls(config)
        except ConfigurationError as e:
            raise CheckpointFormatError(f'Checkpoint config is not a model config: {e}')
        model.load_arrays(arrays)
        model.checkpoint_config = config
        return model
