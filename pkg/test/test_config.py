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
import json
import os
import tempfile
import unittest

from derenderer.config import TrainConfig
from derenderer.exceptions import ConfigurationError
from derenderer.rewards import RewardKind
from test.fixtures import fixture_path


class TrainConfigTestCase(unittest.TestCase):

    def test_defaults(self):
        config = TrainConfig()
        self.assertEqual('transformer', config.model)
        self.assertEqual('noisy_shapes', config.domain)
        self.assertEqual(64, config.batch_size)
        self.assertEqual(128, config.d_model)
        self.assertEqual(80, config.max_length)
        self.assertIsNone(config.image_reward_c)

    def test_max_length_follows_domain(self):
        self.assertEqual(100, TrainConfig({'domain': 'abstract_scene'}).max_length)
        self.assertEqual(40, TrainConfig({'domain': 'abstract_scene', 'max_length': 40}).max_length)

    def test_attribute_access(self):
        config = TrainConfig({'epochs': 3})
        self.assertEqual(3, config.epochs)
        self.assertEqual(3, config['epochs'])
        with self.assertRaises(AttributeError):
            _ = config.no_such_setting

    def test_invalid_values(self):
        for values in (
                {'model': 'gru'},
                {'domain': 'faces'},
                {'batch_size': 0},
                {'epochs': 1.5},
                {'lr_xent': 0},
                {'heads': 3},
                {'attn_scale': 'none'},
                {'pe_mode': 'mul'},
                {'align': 'greedy'},
                {'dropout': 1.0},
                {'validation_fraction': -0.1},
                {'image_reward_c': 0},
                {'max_steps': 0},
                {'max_length': 1},
                {'encoder_channels': [16, 32]},
                {'seed': -1},
        ):
            with self.subTest(values = values):
                with self.assertRaises(ConfigurationError):
                    TrainConfig(values)

    def test_ordering_and_reward_are_checked(self):
        with self.assertRaises(ConfigurationError):
            TrainConfig({'ordering': 'alphabetical'})
        with self.assertRaises(ConfigurationError):
            TrainConfig({'reward': 'joint:iou:image:0:1'})

        config = TrainConfig({'reward': 'joint:iou:image:1:1'})
        self.assertIsInstance(config.reward_kind(), RewardKind)

    def test_update_returns_new_config(self):
        config = TrainConfig()
        updated = config.update({'model': 'lstm', 'epochs': 2})
        self.assertEqual('transformer', config.model)
        self.assertEqual('lstm', updated.model)
        self.assertEqual(2, updated.epochs)
        with self.assertRaises(ConfigurationError):
            config.update({'batch_size': -4})

    def test_create_from_file(self):
        config = TrainConfig.create_from_file(fixture_path('tiny_train_config.json'))
        self.assertEqual(8, config.d_model)
        self.assertEqual([4, 8], config.encoder_channels)
        self.assertEqual(80, config.max_length)

    def test_read_values_rejects_unknown_keys(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'config.json')
            with open(path, 'w') as fp:
                json.dump({'epochs': 2, 'learning_rate': 0.1}, fp)

            with self.assertRaises(ConfigurationError) as cm:
                TrainConfig.read_values(path)
            self.assertIn('learning_rate', str(cm.exception))

            with open(path, 'w') as fp:
                json.dump([1, 2], fp)
            with self.assertRaises(ConfigurationError):
                TrainConfig.read_values(path)

    def test_round_trip_dict(self):
        config = TrainConfig({'model': 'lstm', 'ordering': 'random'})
        self.assertEqual(config.to_dict(), TrainConfig(config.to_dict()).to_dict())


if __name__ == '__main__':
    unittest.main()
