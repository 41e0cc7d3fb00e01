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
import struct
import tempfile
import unittest
from collections import OrderedDict

import numpy as np

from derenderer.checkpoint import encode_checkpoint, decode_checkpoint, save_checkpoint, load_checkpoint
from derenderer.exceptions import CheckpointFormatError
from derenderer.optim import Adam, AdamState, adam_step, clip_grad_norm
from derenderer.tensor import Tensor


class AdamTestCase(unittest.TestCase):

    def test_first_step_moves_by_learning_rate(self):
        params = {'w': Tensor([1.0, -1.0, 2.0], requires_grad = True)}
        params['w'].grad = np.array([0.5, -20.0, 0.0], dtype = np.float32)

        adam_step(params, AdamState(lr = 0.1))

        np.testing.assert_allclose([0.9, -0.9, 2.0], params['w'].data, rtol = 1e-5)
        self.assertIsNone(params['w'].grad)

    def test_minimizes_quadratic(self):
        target = np.array([3.0, -1.5], dtype = np.float32)
        x = Tensor(np.zeros(2), requires_grad = True)
        optimizer = Adam({'x': x}, lr = 0.05)

        for _ in range(1000):
            diff = x - Tensor(target)
            (diff * diff).sum().backward()
            optimizer.step()

        np.testing.assert_allclose(target, x.data, atol = 1e-2)

    def test_missing_gradient_is_zero(self):
        params = {'w': Tensor(np.ones(2), requires_grad = True)}
        state = AdamState()
        adam_step(params, state)
        np.testing.assert_array_equal(np.ones(2), params['w'].data)
        self.assertEqual(1, state.step)

    def test_invalid_learning_rate(self):
        with self.assertRaises(ValueError):
            AdamState(lr = 0)


class ClipGradNormTestCase(unittest.TestCase):

    def test_clips_joint_norm(self):
        params = {'a': Tensor([0.0], requires_grad = True), 'b': Tensor([0.0], requires_grad = True)}
        params['a'].grad = np.array([3.0], dtype = np.float32)
        params['b'].grad = np.array([4.0], dtype = np.float32)

        self.assertAlmostEqual(5.0, clip_grad_norm(params, 1.0), places = 5)
        np.testing.assert_allclose([0.6], params['a'].grad, rtol = 1e-5)
        np.testing.assert_allclose([0.8], params['b'].grad, rtol = 1e-5)

    def test_small_or_disabled(self):
        params = {'a': Tensor([0.0], requires_grad = True)}
        params['a'].grad = np.array([0.5], dtype = np.float32)
        clip_grad_norm(params, 1.0)
        clip_grad_norm(params, None)
        np.testing.assert_array_equal([0.5], params['a'].grad)


class CheckpointTestCase(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(0)
        self.params = OrderedDict([
            ('encoder.conv0.weight', rng.normal(size = (4, 1, 3, 3)).astype(np.float32)),
            ('decoder.bias', rng.normal(size = (7,)).astype(np.float32)),
            ('scalar', np.float32(1.5)),
        ])
        self.config = {'model': 'transformer', 'd_model': 8, 'image_shape': [16, 16, 1]}

    def test_layout(self):
        data = encode_checkpoint(self.params, self.config)
        self.assertTrue(data.startswith(b'DRND1'))

        (config_length,) = struct.unpack('<I', data[5:9])
        self.assertEqual(b'{"d_model":8,"image_shape":[16,16,1],"model":"transformer"}', data[9:9 + config_length])

        offset = 9 + config_length
        (name_length,) = struct.unpack('<I', data[offset:offset + 4])
        self.assertEqual(b'encoder.conv0.weight', data[offset + 4:offset + 4 + name_length])
        offset += 4 + name_length
        self.assertEqual((4, 4, 1, 3, 3), struct.unpack('<5I', data[offset:offset + 20]))

    def test_decode(self):
        config, params = decode_checkpoint(encode_checkpoint(self.params, self.config))

        self.assertEqual(self.config, config)
        self.assertEqual(list(self.params), list(params))
        self.assertEqual((), params['scalar'].shape)
        for name, value in self.params.items():
            np.testing.assert_array_equal(value, params[name])
            self.assertEqual(np.float32, params[name].dtype)

    def test_tensors_are_accepted(self):
        data = encode_checkpoint({'w': Tensor([[1, 2], [3, 4]])}, {})
        _, params = decode_checkpoint(data)
        np.testing.assert_array_equal([[1, 2], [3, 4]], params['w'])

    def test_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'nested', 'model.drnd')
            save_checkpoint(path, self.params, self.config)
            config, params = load_checkpoint(path)
            self.assertEqual(self.config, config)
            self.assertEqual(['model.drnd'], os.listdir(os.path.dirname(path)))

    def test_bad_magic(self):
        with self.assertRaises(CheckpointFormatError):
            decode_checkpoint(b'DRND2' + bytes(8))

    def test_truncated(self):
        data = encode_checkpoint(self.params, self.config)
        with self.assertRaises(CheckpointFormatError):
            decode_checkpoint(data[:-3])
        with self.assertRaises(CheckpointFormatError):
            decode_checkpoint(data[:12])

    def test_invalid_config(self):
        with self.assertRaises(CheckpointFormatError):
            decode_checkpoint(b'DRND1' + struct.pack('<I', 3) + b'{x]')


if __name__ == '__main__':
    unittest.main()
