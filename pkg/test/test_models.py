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

from derenderer.config import TrainConfig
from derenderer.constants import BOS_ID, EOS_ID, PAD_ID
from derenderer.exceptions import ConfigurationError, CheckpointFormatError, ShapeMismatch
from derenderer.models import DerenderModel, ImageEncoder, TransformerDecoder, greedy_decode, sample_decode, \
    sequence_log_prob, sequences_to_array, positional_encoding, causal_mask, spatial_encoding
from derenderer.models.model import MODEL_KEYS
from derenderer.tensor import Tensor, cross_entropy, default_dtype, no_grad
from derenderer.training import build_model
from derenderer.vocabulary import Vocabulary, TokenSequence
from test import settings
from test.fixtures import tiny_model
from test.test_tensor import GradientCheckMixin


def random_images(count: int, shape = (16, 16, 1), seed: int = 0) -> np.ndarray:
    height, width, channels = shape
    return np.random.default_rng(seed).random((count, channels, height, width)).astype(np.float32)


class EncoderTestCase(unittest.TestCase):

    def test_feature_grid(self):
        rng = np.random.default_rng(0)
        self.assertEqual((4, 4), ImageEncoder((64, 64, 1), [16, 32, 64, 128], rng).feature_shape)
        self.assertEqual((7, 8), ImageEncoder((100, 125, 3), [16, 32, 64, 128], rng).feature_shape)

    def test_output_shape(self):
        encoder = ImageEncoder((16, 16, 1), [4, 8], np.random.default_rng(0))
        feats = encoder(random_images(3))
        self.assertEqual((3, 16, 8), feats.values.shape)
        self.assertEqual(16, feats.m)
        self.assertEqual(8, feats.d)

    def test_wrong_image_shape(self):
        encoder = ImageEncoder((16, 16, 1), [4, 8], np.random.default_rng(0))
        with self.assertRaises(ShapeMismatch):
            encoder(random_images(2, shape = (16, 16, 3)))

    def test_spatial_encoding_distinguishes_cells(self):
        table = spatial_encoding(4, 5, 8)
        self.assertEqual((20, 8), table.shape)
        self.assertEqual(20, len({tuple(np.round(row, 6)) for row in table}))


class DecoderTestCase(unittest.TestCase):

    def test_logits_shape(self):
        for kind in ('lstm', 'transformer'):
            model = tiny_model(kind)
            logits = model(random_images(2), np.array([[BOS_ID, 3, 6, 7], [BOS_ID, 5, 8, 8]]))
            self.assertEqual((2, 4, 24), logits.shape)

    def test_causal(self):
        for kind in ('lstm', 'transformer'):
            model = tiny_model(kind)
            images = random_images(1)
            with model.inference(), no_grad():
                a = model(images, np.array([[BOS_ID, 3, 6, 7, 9]])).data
                b = model(images, np.array([[BOS_ID, 3, 6, 20, 4]])).data
            np.testing.assert_allclose(a[:, :3], b[:, :3], rtol = 1e-5, atol = 1e-6)
            self.assertFalse(np.allclose(a[:, 3:], b[:, 3:]))

    def test_step_matches_forward(self):
        ids = np.array([[BOS_ID, 3, 6, 7, 9], [BOS_ID, 5, 8, 8, 12]])
        for kind in ('lstm', 'transformer'):
            model = tiny_model(kind)
            with model.inference(), no_grad():
                feats = model.encode(random_images(2))
                expected = model.decoder(feats, ids).data

                state = model.decoder.start(feats)
                for t in range(ids.shape[1]):
                    state, logits = model.decoder.step(state, ids[:, t])
                    np.testing.assert_allclose(expected[:, t], logits.data, rtol = 1e-4, atol = 1e-5)

    def test_lstm_attention_weights(self):
        model = tiny_model('lstm')
        with model.inference(), no_grad():
            feats = model.encode(random_images(2))
            state, _ = model.decoder.step(model.decoder.start(feats), np.array([BOS_ID, BOS_ID]))

        alpha = np.asarray(state.alpha.data)
        self.assertEqual((2, feats.m), alpha.shape)
        np.testing.assert_allclose(np.ones(2), alpha.sum(axis = -1), rtol = 1e-5)

    def test_positional_encoding(self):
        table = positional_encoding(10, 6)
        np.testing.assert_allclose([0, 1, 0, 1, 0, 1], table[0])
        self.assertAlmostEqual(np.sin(3 / 10000 ** (2 / 6)), table[3, 2])
        self.assertAlmostEqual(np.cos(3 / 10000 ** (2 / 6)), table[3, 3])

    def test_causal_mask(self):
        mask = causal_mask(3)
        self.assertTrue((np.tril(mask) == 0).all())
        self.assertTrue((mask[np.triu_indices(3, 1)] < -1e8).all())

    def test_attention_variants(self):
        model = tiny_model('transformer', pe_mode = 'concat')
        self.assertIn('decoder.pe_proj.weight', model.named_parameters())
        self.assertEqual((1, 2, 24), model(random_images(1), np.array([[BOS_ID, 3]])).shape)

        with self.assertWarns(UserWarning):
            TransformerDecoder(24, d_model = 8, heads = 2, layers = 1, d_ff = 8, attn_scale = 'dk')

        with self.assertRaises(ConfigurationError):
            TransformerDecoder(24, d_model = 8, heads = 3)

    def test_too_long_input(self):
        model = tiny_model('transformer', max_length = 4)
        with self.assertRaises(ShapeMismatch):
            model(random_images(1), np.full((1, 5), 3))


class ModelTestCase(unittest.TestCase):

    def test_parameter_counts_are_comparable(self):
        vocab = Vocabulary.for_domain('noisy_shapes')
        lstm = build_model(TrainConfig({'model': 'lstm'}), vocab, (64, 64, 1))
        transformer = build_model(TrainConfig({'model': 'transformer'}), vocab, (64, 64, 1))

        self.assertEqual(631064, lstm.decoder.num_parameters())
        self.assertEqual(669720, transformer.decoder.num_parameters())
        self.assertEqual(lstm.encoder.num_parameters(), transformer.encoder.num_parameters())

    def test_same_seed_same_weights(self):
        a, b = tiny_model(seed = 4), tiny_model(seed = 4)
        for (name, x), y in zip(a.state_arrays().items(), b.state_arrays().values()):
            np.testing.assert_array_equal(x, y, err_msg = name)
        self.assertFalse(np.array_equal(a.encoder.stem.weight.data, tiny_model(seed = 5).encoder.stem.weight.data))

    def test_invalid_config(self):
        config = dict(tiny_model().config)
        with self.assertRaises(ConfigurationError):
            DerenderModel({key: config[key] for key in MODEL_KEYS if key != 'heads'})
        with self.assertRaises(ConfigurationError):
            DerenderModel(dict(config, model = 'gru'))
        with self.assertRaises(ConfigurationError):
            DerenderModel(dict(config, encoder_channels = [4, 16]))

    def test_checkpoint_round_trip(self):
        for kind in ('lstm', 'transformer'):
            model = tiny_model(kind, seed = 2)
            images = random_images(2)
            ids = np.array([[BOS_ID, 3, 6, 7], [BOS_ID, 5, 8, 8]])

            with tempfile.TemporaryDirectory() as tmp:
                path = os.path.join(tmp, 'model.drnd')
                model.save(path, extra = {'stage': 'xent', 'domain': 'noisy_shapes'})
                loaded = DerenderModel.load(path)

            self.assertEqual('xent', loaded.checkpoint_config['stage'])
            self.assertEqual(model.config, loaded.config)
            with no_grad():
                np.testing.assert_array_equal(model(images, ids).data, loaded(images, ids).data)

    def test_load_mismatched_parameters(self):
        model = tiny_model('transformer')
        arrays = model.state_arrays()
        arrays.popitem()
        with self.assertRaises(CheckpointFormatError):
            model.load_arrays(arrays)

        arrays = model.state_arrays()
        arrays['decoder.output.bias'] = np.zeros(3)
        with self.assertRaises(CheckpointFormatError):
            model.load_arrays(arrays)


class ModelGradientTestCase(GradientCheckMixin, unittest.TestCase):

    def assert_model_gradients(self, kind: str):
        rng = np.random.default_rng(77)

        for trial in range(settings.GRADIENT_TRIALS):
            with default_dtype(np.float64):
                model = tiny_model(kind, seed = trial).astype(np.float64).eval()
                images = Tensor(rng.random((2, 1, 16, 16)), requires_grad = True)
                ids = np.array([[BOS_ID] + rng.integers(3, 24, size = 5).tolist(),
                                [BOS_ID] + rng.integers(3, 24, size = 3).tolist() + [EOS_ID, PAD_ID]])

                params = model.named_parameters()
                leaves = {'images': images}
                for name in rng.choice(sorted(params), size = 4, replace = False):
                    leaves[str(name)] = params[name]

                def loss():
                    logits = model(images, ids[:, :-1])
                    return cross_entropy(logits, ids[:, 1:], ignore_index = PAD_ID)

                self.assert_leaf_gradients(loss, leaves, rng)

    def test_lstm_decoder_gradients(self):
        self.assert_model_gradients('lstm')

    def test_transformer_gradients(self):
        self.assert_model_gradients('transformer')


class DecodingTestCase(unittest.TestCase):

    def test_greedy_is_deterministic_and_batch_independent(self):
        for kind in ('lstm', 'transformer'):
            model = tiny_model(kind, max_length = 12)
            images = random_images(3, seed = 1)

            batch = greedy_decode(model, model.encode(images))
            self.assertEqual(batch, greedy_decode(model, model.encode(images)))
            for index in range(3):
                single = greedy_decode(model, model.encode(images[index:index + 1]))
                self.assertEqual(batch[index], single[0])

            for seq in batch:
                self.assertEqual(12, len(seq))
                self.assertEqual(BOS_ID, seq.ids[0])
                if EOS_ID in seq.ids:
                    tail = seq.ids[seq.ids.index(EOS_ID) + 1:]
                    self.assertTrue(all(token == PAD_ID for token in tail))

    def test_sampling_is_seeded(self):
        model = tiny_model('transformer', max_length = 10)
        feats = model.encode(random_images(4))

        first, logp = sample_decode(model, feats, rng = np.random.default_rng(9))
        second, logp2 = sample_decode(model, feats, rng = np.random.default_rng(9))
        self.assertEqual(first, second)
        np.testing.assert_array_equal(logp, logp2)
        self.assertTrue((logp < 0).all())

    def test_zero_temperature_is_greedy(self):
        model = tiny_model('lstm', max_length = 10)
        feats = model.encode(random_images(2))
        sequences, _ = sample_decode(model, feats, rng = np.random.default_rng(0), temperature = 0)
        self.assertEqual(greedy_decode(model, feats), sequences)

    def test_sampled_log_probs_match_teacher_forcing(self):
        for kind in ('lstm', 'transformer'):
            model = tiny_model(kind, max_length = 10)
            feats = model.encode(random_images(5, seed = 3))
            sequences, logp = sample_decode(model, feats, rng = np.random.default_rng(1))

            with no_grad(), model.inference():
                scored = sequence_log_prob(model, feats, sequences).data
            np.testing.assert_allclose(logp, scored, rtol = 1e-4, atol = 1e-4)

    def test_sequence_log_prob_is_differentiable(self):
        model = tiny_model('transformer')
        feats = model.encode(random_images(2))
        sequences = [TokenSequence((BOS_ID, 3, 6, 7, 8, EOS_ID), 80), TokenSequence((BOS_ID, EOS_ID), 80)]

        log_probs = sequence_log_prob(model, feats, sequences)
        self.assertEqual((2,), log_probs.shape)
        log_probs.sum().backward()

        params = model.named_parameters()
        self.assertIsNotNone(params['decoder.embedding.weight'].grad)
        self.assertIsNotNone(params['encoder.stem.weight'].grad)

    def test_sequences_to_array(self):
        ids, lengths = sequences_to_array([
            [BOS_ID, 3, EOS_ID, PAD_ID], [BOS_ID, 4, 5, 6], [BOS_ID, EOS_ID, 7]
        ])
        np.testing.assert_array_equal([3, 4, 2], lengths)
        np.testing.assert_array_equal([[1, 3, 2, 0], [1, 4, 5, 6], [1, 2, 0, 0]], ids)


if __name__ == '__main__':
    unittest.main()
