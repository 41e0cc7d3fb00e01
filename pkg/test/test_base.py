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
import tempfile
import unittest

import numpy as np

from derenderer import Derenderer
from derenderer.exceptions import ConfigurationError, RewardNotFound
from derenderer.render import RasterImage
from derenderer.spec import SceneSpec, Circle, Rectangle
from test.fixtures import tiny_model


class DerendererTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.model = tiny_model(seed = 2)
        rng = np.random.default_rng(0)
        cls.image = RasterImage(rng.integers(0, 256, size = (16, 16, 1)).astype(np.uint8))
        cls.gt = SceneSpec('noisy_shapes', (Circle(4, 4, 2), Rectangle(9, 9, 14, 14)), canvas = (16, 16))

    def setUp(self):
        self.derenderer = Derenderer(model = self.model, domain = 'noisy_shapes')

    def tearDown(self):
        self.derenderer.close()

    def test_requires_one_model_source(self):
        with self.assertRaises(ValueError):
            Derenderer()
        with self.assertRaises(ValueError):
            Derenderer(checkpoint = 'model.drnd', model = self.model)

    def test_unknown_domain(self):
        with self.assertRaises(ConfigurationError):
            Derenderer(model = self.model)

    def test_vocabulary_must_match_model(self):
        with self.assertRaises(ConfigurationError):
            Derenderer(model = self.model, domain = 'abstract_scene')

    def test_infer(self):
        spec = self.derenderer.infer(self.image)
        self.assertIsInstance(spec, SceneSpec)
        self.assertEqual('noisy_shapes', spec.domain)
        self.assertEqual((16, 16), tuple(spec.canvas))
        self.assertEqual(spec, self.derenderer.infer(self.image))

    def test_predict_batches(self):
        derenderer = Derenderer(model = self.model, domain = 'noisy_shapes', config = {'batch_size': 2})
        images = [self.image, RasterImage.blank(16, 16), self.image]

        predictions = derenderer.predict(images)

        self.assertEqual(3, len(predictions))
        self.assertEqual(predictions[0], predictions[2])
        self.assertEqual(self.derenderer.infer(self.image), predictions[0][0])

    def test_sample(self):
        samples = self.derenderer.sample(self.image, count = 3, seed = 4)

        self.assertEqual(3, len(samples))
        for spec, log_prob in samples:
            self.assertIsInstance(spec, SceneSpec)
            self.assertLessEqual(log_prob, 0.0)
        self.assertEqual(samples, self.derenderer.sample(self.image, count = 3, seed = 4))

    def test_reconstruct(self):
        spec, rendered = self.derenderer.reconstruct(self.image)
        self.assertEqual(self.derenderer.infer(self.image), spec)
        self.assertEqual((16, 16, 1), rendered.pixels.shape)

    def test_score_given_prediction(self):
        self.assertEqual(1.0, self.derenderer.score(self.image, self.gt, 'iou', prediction = self.gt))
        self.assertEqual(1.0, self.derenderer.score(self.image, self.gt, 'inference', prediction = self.gt))

        partial = SceneSpec('noisy_shapes', (Circle(4, 4, 2),), canvas = (16, 16))
        self.assertEqual(0.5, self.derenderer.score(self.image, self.gt, 'iou', prediction = partial))

    def test_score_unknown_reward(self):
        with self.assertRaises(RewardNotFound):
            self.derenderer.score(self.image, self.gt, 'bleu', prediction = self.gt)

    def test_rewards_registered_and_closed(self):
        with Derenderer(model = self.model, domain = 'noisy_shapes') as derenderer:
            self.assertEqual(['iou', 'inference', 'image'], [reward.name for reward in derenderer.rewards])
            self.assertIs(derenderer, derenderer.rewards.iou.owner)

        self.assertEqual(0, len(derenderer.rewards))

    def test_load_checkpoint(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'model.drnd')
            self.model.save(path, extra = {'domain': 'noisy_shapes', 'image_reward_c': 3.5})

            with Derenderer(checkpoint = path) as derenderer:
                self.assertEqual('noisy_shapes', derenderer.domain)
                self.assertEqual(3.5, derenderer.config['image_reward_c'])
                self.assertEqual(self.derenderer.infer(self.image), derenderer.infer(self.image))


if __name__ == '__main__':
    unittest.main()
