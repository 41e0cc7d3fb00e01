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

""" Training configuration: a dict of defaults updated with user values
"""

import json
import os

from .constants import DOMAINS, DOMAIN_DEFAULTS, DOMAIN_NOISY_SHAPES
from .exceptions import ConfigurationError
from .rewards import RewardKind, ALIGNMENTS
from .spec import OrderingStrategy

__all__ = ['TrainConfig']

MODELS = ('lstm', 'transformer')
POSITIVE_INTS = (
    'batch_size', 'epochs', 'rl_steps', 'checkpoint_every', 'd_model', 'heads', 'layers', 'd_ff', 'lstm_layers',
    'eval_batch_size'
)


class TrainConfig:
    """
    Settings of the model, cross-entropy training, RL fine-tuning and evaluation. Values are read as attributes.

    Parameters
    ----------
    config: dict overriding the defaults
    """

    def __init__(self, config: dict = None):

        self.config = {
            'model': 'transformer',
            'domain': DOMAIN_NOISY_SHAPES,
            'ordering': 'type',
            'batch_size': 64,
            'lr_xent': 1e-3,
            'lr_rl': 1e-4,
            'epochs': 10,
            'rl_steps': 2000,
            'reward': 'iou',
            'seed': 0,
            'checkpoint_every': 500,
            'max_length': None,
            'd_model': 128,
            'heads': 4,
            'layers': 4,
            'd_ff': 128,
            'lstm_layers': 4,
            'dropout': 0.1,
            'attn_scale': 'sqrt_dk',
            'pe_mode': 'add',
            'encoder_channels': [16, 32, 64, 128],
            'align': 'index',
            'blur_sigma': 2.0,
            'image_reward_c': None,
            'grad_clip': 5.0,
            'validation_fraction': 0.1,
            'eval_batch_size': 64,
            'max_steps': None,
            'threads': None,
        }

        if type(config) is dict:
            self.config.update(config)

        if self.config['max_length'] is None and self.config['domain'] in DOMAIN_DEFAULTS:
            self.config['max_length'] = DOMAIN_DEFAULTS[self.config['domain']]['max_length']

        self.validate()

    def __getattr__(self, item):
        if item != 'config' and item in self.config:
            return self.config[item]
        raise AttributeError("'{}' object has no attribute '{}'".format(self.__class__.__name__, item))

    def __getitem__(self, item):
        return self.config[item]

    def validate(self):
        """
        Raises ConfigurationError on any invalid value
        """
        config = self.config

        if config['model'] not in MODELS:
            raise ConfigurationError(f'Unknown model "{config["model"]}", valid values are {MODELS}')

        if config['domain'] not in DOMAINS:
            raise ConfigurationError(f'Unknown domain "{config["domain"]}"')

        for key in POSITIVE_INTS:
            if type(config[key]) is not int or config[key] < 1:
                raise ConfigurationError(f'{key} must be a positive integer, got {config[key]!r}')

        for key in ('lr_xent', 'lr_rl'):
            if not config[key] > 0:
                raise ConfigurationError(f'{key} must be positive, got {config[key]!r}')

        if config['d_model'] % config['heads'] != 0:
            raise ConfigurationError(f'd_model={config["d_model"]} is not divisible by heads={config["heads"]}')

        if config['attn_scale'] not in ('dk', 'sqrt_dk'):
            raise ConfigurationError(f'attn_scale must be "dk" or "sqrt_dk", got "{config["attn_scale"]}"')

        if config['pe_mode'] not in ('add', 'concat'):
            raise ConfigurationError(f'pe_mode must be "add" or "concat", got "{config["pe_mode"]}"')

        if config['align'] not in ALIGNMENTS:
            raise ConfigurationError(f'align must be one of {ALIGNMENTS}, got "{config["align"]}"')

        if not 0 <= config['dropout'] < 1:
            raise ConfigurationError('dropout must be in [0, 1)')

        if not 0 <= config['validation_fraction'] < 1:
            raise ConfigurationError('validation_fraction must be in [0, 1)')

        if config['blur_sigma'] < 0:
            raise ConfigurationError('blur_sigma must be non-negative')

        if config['image_reward_c'] is not None and config['image_reward_c'] <= 0:
            raise ConfigurationError('image_reward_c must be positive')

        if config['max_steps'] is not None and config['max_steps'] < 1:
            raise ConfigurationError('max_steps must be positive')

        if config['max_length'] < 2:
            raise ConfigurationError('max_length must be at least 2')

        if not config['encoder_channels'] or config['encoder_channels'][-1] != config['d_model']:
            raise ConfigurationError('The last encoder channel count must equal d_model')

        if type(config['seed']) is not int or config['seed'] < 0:
            raise ConfigurationError('seed must be a non-negative integer')

        self.ordering_strategy()
        self.reward_kind()

    def ordering_strategy(self) -> OrderingStrategy:
        return OrderingStrategy.parse(str(self.config['ordering']))

    def reward_kind(self) -> RewardKind:
        return RewardKind.parse(str(self.config['reward']))

    def update(self, values: dict) -> 'TrainConfig':
        """
        New configuration with `values` applied on top of this one
        """
        config = dict(self.config)
        config.update(values)
        return TrainConfig(config)

    def to_dict(self) -> dict:
        return dict(self.config)

    @classmethod
    def read_values(cls, config_file: str) -> dict:
        """
        Reads and checks the keys of a JSON configuration file without applying the defaults
        """
        with open(os.path.abspath(config_file), 'r') as fp:
            values = json.load(fp)

        if type(values) is not dict:
            raise ConfigurationError(f'{config_file} must contain a JSON object')

        unknown = set(values) - set(cls().config)
        if unknown:
            raise ConfigurationError(f'Unknown configuration keys {sorted(unknown)} in {config_file}')

        return values

    @classmethod
    def create_from_file(cls, config_file: str) -> 'TrainConfig':
        """
        Create a new TrainConfig from a JSON file

        Parameters
        ----------
        config_file: path to a JSON object with any subset of the configuration keys

        Returns
        -------
        TrainConfig
        """
        return cls(cls.read_values(config_file))
