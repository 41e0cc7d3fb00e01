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
import tempfile
import unittest
from unittest.mock import MagicMock

import numpy as np

from derenderer.dataset import DatasetManifest, sample_spec
from derenderer.exceptions import ConfigurationError, DomainMismatch, ShapeMismatch, RewardNotFound
from derenderer.extensions import Reward, IouReward, InferenceReward, ImageDistanceReward
from derenderer.interfaces import RewardInterface
from derenderer.render import RasterImage, render
from derenderer.rewards import RewardKind, iou_reward, inference_reward, inference_counts, image_distance, \
    image_reward, next_reward, calibrate_image_reward_scale
from derenderer.spec import SceneSpec, Circle, Line, Rectangle, SceneObject
from test import settings
from test.fixtures import tiny_dataset


def brute_force_iou(pred: SceneSpec, gt: SceneSpec) -> float:
    # Equality is an equivalence relation, so greedy matching on the equality matrix is a maximum matching
    equal = [[p == g for g in gt.objects] for p in pred.objects]
    used = set()
    matches = 0
    for row in equal:
        for j, is_equal in enumerate(row):
            if is_equal and j not in used:
                used.add(j)
                matches += 1
                break
    union = len(pred.objects) + len(gt.objects) - matches
    return 1.0 if union == 0 else matches / union


def perturbed_pair(domain: str, rng) -> tuple:
    gt = sample_spec(domain, rng)
    kept = [obj for obj in gt.objects if rng.random() < 0.6]
    if kept and rng.random() < 0.3:
        kept.append(kept[0])
    extra = list(sample_spec(domain, rng).objects)[:int(rng.integers(0, 3))]
    objects = kept + extra
    rng.shuffle(objects)
    return SceneSpec(domain, tuple(objects)), gt


class IouRewardTestCase(unittest.TestCase):

    def test_identical(self):
        spec = SceneSpec('noisy_shapes', (Circle(8, 8, 2), Line(0, 0, 4, 4)))
        self.assertEqual(1.0, iou_reward(spec, spec))
        self.assertEqual(1.0, iou_reward(SceneSpec('noisy_shapes'), SceneSpec('noisy_shapes')))

    def test_partial_overlap(self):
        a, b, c = Circle(8, 8, 2), Circle(3, 3, 1), Rectangle(1, 1, 5, 5)
        self.assertAlmostEqual(1 / 3, iou_reward(SceneSpec('noisy_shapes', (a, b)), SceneSpec('noisy_shapes', (a, c))))

    def test_multiset_semantics(self):
        a = Circle(8, 8, 2)
        self.assertAlmostEqual(0.5, iou_reward(SceneSpec('noisy_shapes', (a, a)), SceneSpec('noisy_shapes', (a,))))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for index in range(settings.ORACLE_PAIRS):
            pred, gt = perturbed_pair('noisy_shapes' if index % 2 else 'abstract_scene', rng)
            self.assertEqual(brute_force_iou(pred, gt), iou_reward(pred, gt))

    def test_domain_mismatch(self):
        with self.assertRaises(DomainMismatch):
            iou_reward(SceneSpec('noisy_shapes'), SceneSpec('abstract_scene'))


class InferenceRewardTestCase(unittest.TestCase):

    def test_identical(self):
        rng = np.random.default_rng(0)
        for domain in ('noisy_shapes', 'abstract_scene'):
            spec = sample_spec(domain, rng)
            self.assertEqual(1.0, inference_reward(spec, spec))
            self.assertEqual(1.0, inference_reward(spec, spec, align = 'hungarian'))

    def test_flip_slot(self):
        gt = SceneSpec('abstract_scene', (SceneObject(0, 1, 0, 0, 255, 195),))
        pred = SceneSpec('abstract_scene', (SceneObject(0, 1, 0, 1, 255, 195),))
        self.assertAlmostEqual(5 / 6, inference_reward(pred, gt))

    def test_position_bins(self):
        gt = SceneSpec('abstract_scene', (SceneObject(0, 1, 0, 0, 12, 195),))
        pred = SceneSpec('abstract_scene', (SceneObject(0, 1, 0, 0, 18, 195),))
        self.assertEqual(1.0, inference_reward(pred, gt))

        pred = SceneSpec('abstract_scene', (SceneObject(0, 1, 0, 0, 26, 195),))
        self.assertAlmostEqual(5 / 6, inference_reward(pred, gt))

    def test_noisy_shapes_slots(self):
        gt = SceneSpec('noisy_shapes', (Circle(8, 8, 2),))
        self.assertAlmostEqual(3 / 4, inference_reward(SceneSpec('noisy_shapes', (Circle(8, 8, 3),)), gt))
        self.assertEqual((4, 4), inference_counts(SceneSpec('noisy_shapes'), gt))
        self.assertEqual((0, 0), inference_counts(SceneSpec('noisy_shapes'), SceneSpec('noisy_shapes')))

    def test_wrong_circle_counts_real_slots(self):
        pred = SceneSpec('noisy_shapes', (Circle(3, 3, 1),))
        gt = SceneSpec('noisy_shapes', (Circle(12, 12, 4),))
        self.assertEqual((3, 4), inference_counts(pred, gt))
        self.assertAlmostEqual(0.25, inference_reward(pred, gt))

    def test_pair_counts_longer_kind(self):
        pred = SceneSpec('noisy_shapes', (Line(3, 3, 1, 1, 0, 0),))
        gt = SceneSpec('noisy_shapes', (Circle(3, 3, 1),))
        self.assertEqual((7, 7), inference_counts(pred, gt))

        pred = SceneSpec('noisy_shapes', (Rectangle(1, 1, 5, 5),))
        gt = SceneSpec('noisy_shapes', (Rectangle(1, 1, 5, 6),))
        self.assertEqual((1, 5), inference_counts(pred, gt))

    def test_extra_objects_fail_all_slots(self):
        gt = SceneSpec('noisy_shapes', (Circle(8, 8, 2),))
        pred = SceneSpec('noisy_shapes', (Circle(8, 8, 2), Rectangle(0, 0, 3, 3)))
        self.assertEqual((5, 9), inference_counts(pred, gt))

    def test_hungarian_alignment(self):
        gt = SceneSpec('noisy_shapes', (Circle(3, 3, 1), Circle(9, 9, 2)))
        pred = SceneSpec('noisy_shapes', (Circle(9, 9, 2),))
        self.assertAlmostEqual(1 / 8, inference_reward(pred, gt, align = 'index'))
        self.assertAlmostEqual(4 / 8, inference_reward(pred, gt, align = 'hungarian'))

    def test_hungarian_never_worse(self):
        rng = np.random.default_rng(5)
        for index in range(200):
            pred, gt = perturbed_pair('noisy_shapes' if index % 2 else 'abstract_scene', rng)
            self.assertGreaterEqual(inference_reward(pred, gt, 'hungarian'), inference_reward(pred, gt, 'index'))

    def test_unknown_alignment(self):
        with self.assertRaises(ConfigurationError):
            inference_reward(SceneSpec('noisy_shapes'), SceneSpec('noisy_shapes'), align = 'greedy')


class ImageRewardTestCase(unittest.TestCase):

    def test_identical_images(self):
        spec = sample_spec('abstract_scene', np.random.default_rng(1))
        image = render(spec)
        self.assertEqual(0, image_distance(image, image, 'abstract_scene'))

        white = RasterImage.blank(64, 64)
        self.assertEqual(0, image_distance(white, white, 'noisy_shapes'))

    def test_one_bucket_off(self):
        image = RasterImage.blank(5, 4, channels = 3, value = 100)
        pixels = image.pixels.copy()
        pixels[2, 3, 1] = 120
        self.assertEqual(1, image_distance(image, RasterImage(pixels), 'abstract_scene'))

        # 100 and 102 share a bucket
        pixels[2, 3, 1] = 102
        self.assertEqual(0, image_distance(image, RasterImage(pixels), 'abstract_scene'))

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeMismatch):
            image_distance(RasterImage.blank(4, 4), RasterImage.blank(5, 4), 'noisy_shapes')

    def test_reward_values(self):
        self.assertEqual(1.0, image_reward(0, 'abstract_scene', width = 125, height = 100))
        self.assertEqual(0.0, image_reward(125 * 100, 'abstract_scene', width = 125, height = 100))
        self.assertEqual(1.0, image_reward(0, 'noisy_shapes', c = 5.0))
        self.assertAlmostEqual(0.25, image_reward(20.0, 'noisy_shapes', c = 5.0))

        with self.assertRaises(ConfigurationError):
            image_reward(1.0, 'noisy_shapes')
        with self.assertRaises(ValueError):
            image_reward(-1.0, 'abstract_scene', width = 2, height = 2)

    def test_reward_class(self):
        spec = SceneSpec('noisy_shapes', (Rectangle(2, 2, 12, 12),))
        reward = ImageDistanceReward(sigma = 0, c = 1.0)
        image = render(spec)

        self.assertEqual(1.0, reward(spec, spec, image))
        self.assertLess(reward(SceneSpec('noisy_shapes'), spec, image), 1.0)

        with self.assertRaises(ValueError):
            reward(spec, spec)

    def test_calibration(self):
        with tempfile.TemporaryDirectory() as tmp:
            manifest = tiny_dataset(tmp, count = 8)
            c = calibrate_image_reward_scale(manifest, sample = 4)
            self.assertGreater(c, 0)
            self.assertEqual(c, calibrate_image_reward_scale(manifest, sample = 4))

        self.assertEqual(1.0, calibrate_image_reward_scale(DatasetManifest('noisy_shapes', 0, [])))


class RewardKindTestCase(unittest.TestCase):

    def test_parse(self):
        self.assertEqual(RewardKind('iou'), RewardKind.parse('iou'))

        joint = RewardKind.parse('joint:iou:image:1:4')
        self.assertTrue(joint.is_joint)
        self.assertEqual('image', joint.second.name)
        self.assertEqual('joint:iou:image:1:4', str(joint))

    def test_invalid(self):
        for value in ('bleu', 'iou:2', 'joint:iou:image:1', 'joint:iou:image:x:1', 'joint:iou:image:0:1',
                      'joint:joint:iou:1:1'):
            with self.assertRaises(ConfigurationError, msg = value):
                RewardKind.parse(value)

    def test_alternating_schedule(self):
        joint = RewardKind.parse('joint:iou:image:1:1')
        self.assertEqual(['iou', 'image', 'iou', 'image'], [next_reward(joint, step).name for step in range(4)])

        joint = RewardKind.parse('joint:inference:image:1:4')
        self.assertEqual(
            ['inference', 'image', 'image', 'image', 'image', 'inference'],
            [next_reward(joint, step).name for step in range(6)]
        )

        single = RewardKind('iou')
        self.assertIs(single, next_reward(single, 17))


class RewardInterfaceTestCase(unittest.TestCase):

    def setUp(self):
        self.owner = MagicMock()
        self.interface = RewardInterface(self.owner)
        self.interface.register(IouReward())
        self.interface += InferenceReward('hungarian')

    def test_lookup(self):
        spec = SceneSpec('noisy_shapes', (Circle(8, 8, 2),))
        self.assertEqual(2, len(self.interface))
        self.assertEqual(1.0, self.interface.call('iou', spec, spec))
        self.assertEqual('hungarian', self.interface.inference.align)
        self.owner.debug_message.assert_called()

    def test_not_found(self):
        with self.assertRaises(RewardNotFound):
            self.interface.call('image', SceneSpec('noisy_shapes'), SceneSpec('noisy_shapes'))
        with self.assertRaises(RewardNotFound):
            self.interface.image

    def test_register_checks_type(self):
        with self.assertRaises(ValueError):
            self.interface.register(lambda pred, gt: 1.0)

    def test_unregister_closes(self):
        reward = Reward()
        reward.name = 'custom'
        reward.close = MagicMock()
        self.interface.register(reward)
        self.assertIs(self.owner, reward.owner)

        self.interface.unregister_all()
        reward.close.assert_called_once()
        self.assertEqual(0, len(self.interface))


if __name__ == '__main__':
    unittest.main()
