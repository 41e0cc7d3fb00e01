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
import os

from derenderer.config import TrainConfig
from derenderer.dataset import DatasetConfig, generate_dataset
from derenderer.models.model import DerenderModel, MODEL_KEYS
from derenderer.vocabulary import Vocabulary

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), 'fixtures')

# Tiny model on 16x16 images: two stride-2 stages give a 4x4 feature map
TINY_MODEL = {
    'd_model': 8,
    'heads': 2,
    'layers': 1,
    'd_ff': 8,
    'lstm_layers': 1,
    'dropout': 0.0,
    'encoder_channels': [4, 8],
}


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURE_DIR, name)


def tiny_train_config(**values) -> TrainConfig:
    config = TrainConfig.create_from_file(fixture_path('tiny_train_config.json'))
    return config.update(values) if values else config


def tiny_model(model: str = 'transformer', domain: str = 'noisy_shapes', image_shape = (16, 16, 1), seed: int = 0,
               **values) -> DerenderModel:
    config = dict(TrainConfig({'domain': domain}).to_dict(), **TINY_MODEL)
    config.update(values)
    config.update({
        'model': model, 'seed': seed, 'vocab_size': Vocabulary.for_domain(domain).size,
        'image_shape': list(image_shape)
    })
    return DerenderModel({key: config[key] for key in MODEL_KEYS})


def tiny_dataset(out_dir: str, domain: str = 'noisy_shapes', count: int = 12, seed: int = 3, **values):
    config = {'domain': domain, 'count': count, 'seed': seed, 'test_count': count // 4}
    if domain == 'noisy_shapes':
        config.update({'canvas': [16, 16], 'min_objects': 1, 'max_objects': 2})
    config.update(values)
    return generate_dataset(DatasetConfig(config), out_dir)
