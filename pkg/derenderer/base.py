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

import logging
from typing import List, Optional, Sequence, Tuple

from .catalog import SpriteCatalog
from .constants import DEFAULT_CATEGORIES
from .exceptions import ConfigurationError
from .extensions import IouReward, InferenceReward, ImageDistanceReward
from .interfaces import RewardInterface
from .models.decoding import greedy_decode, sample_decode
from .models.model import DerenderModel
from .render import RasterImage, render
from .spec import SceneSpec
from .tensor import no_grad
from .utils.hasher import derive_rng
from .vocabulary import Vocabulary, TokenSequence, decode_tokens

__all__ = ['Derenderer', 'logger']

logger = logging.getLogger(__name__)


class Derenderer:

    def __init__(self, checkpoint: str = None, model: DerenderModel = None, domain: str = None,
                 catalog: SpriteCatalog = None, config: dict = None):
        """
        Recovers scene specifications from images with a trained model

        Parameters
        ----------
        checkpoint: path to a DRND1 checkpoint
        model: an already loaded DerenderModel, alternative to `checkpoint`
        domain: domain of the model, read from the checkpoint when omitted
        catalog: SpriteCatalog for AbstractScene, read from the checkpoint when omitted
        config: dict of config flags to overwrite default configuration
        """
        if (not checkpoint and model is None) or (checkpoint and model is not None):
            raise ValueError("Either 'checkpoint' or 'model' must be provided")

        self.config = {
            'batch_size': 64,
            'align': 'index',
            'blur_sigma': 2.0,
            'image_reward_c': None,
        }

        if type(config) is dict:
            self.config.update(config)

        self.checkpoint = checkpoint
        self.model = DerenderModel.load(checkpoint) if checkpoint else model

        checkpoint_config = getattr(self.model, 'checkpoint_config', {})
        self.domain = domain or checkpoint_config.get('domain')
        if self.domain is None:
            raise ConfigurationError('The model domain is unknown, pass "domain"')

        if self.config['image_reward_c'] is None:
            self.config['image_reward_c'] = checkpoint_config.get('image_reward_c')

        self.catalog = catalog or SpriteCatalog(checkpoint_config.get('categories', DEFAULT_CATEGORIES))
        self.vocabulary = Vocabulary.for_domain(self.domain, self.catalog)

        if self.vocabulary.size != self.model.config['vocab_size']:
            raise ConfigurationError(
                f'Vocabulary size {self.vocabulary.size} does not match the model ({self.model.config["vocab_size"]})'
            )

        self.rewards = RewardInterface(self)
        self.rewards.register(IouReward())
        self.rewards.register(InferenceReward(self.config['align']))
        self.rewards.register(ImageDistanceReward(
            self.config['blur_sigma'], self.config['image_reward_c'], self.catalog
        ))

    def close(self):
        """
        Cleans up resources for this instance like registered rewards

        Returns
        -------

        """
        self.rewards.unregister_all()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    @staticmethod
    def debug_message(message: str):
        """
        Submits a message to the debug logger

        Parameters
        ----------
        message: str Debug message

        Returns
        -------

        """
        logger.debug(message)

    def _batches(self, images: Sequence[RasterImage]):
        size = self.config['batch_size']
        for start in range(0, len(images), size):
            yield self.model.encode(images[start:start + size])

    def decode(self, sequence: TokenSequence, canvas: tuple = None) -> Tuple[SceneSpec, int]:
        """
        Parses a token sequence. Malformed object groups are dropped and counted.

        Returns
        -------
        tuple of (SceneSpec, discarded tokens)
        """
        return decode_tokens(sequence, self.vocabulary, canvas)

    def predict_tokens(self, images: Sequence[RasterImage]) -> List[TokenSequence]:
        """
        Greedy token sequences for a list of images
        """
        sequences = []
        with no_grad(), self.model.inference():
            for feats in self._batches(images):
                sequences.extend(greedy_decode(self.model, feats))
        return sequences

    def predict(self, images: Sequence[RasterImage]) -> List[Tuple[SceneSpec, int]]:
        """
        Greedy predictions for a list of images

        Returns
        -------
        list of (SceneSpec, discarded tokens)
        """
        predictions = []
        for sequence, image in zip(self.predict_tokens(images), images):
            spec, discarded = self.decode(sequence, (image.width, image.height))
            predictions.append((spec, discarded))

            if discarded:
                self.debug_message(f'Discarded {discarded} malformed tokens')

        return predictions

    def infer(self, image: RasterImage) -> SceneSpec:
        """
        The specification greedily decoded from one image

        Parameters
        ----------
        image: RasterImage

        Returns
        -------
        SceneSpec
        """
        return self.predict([image])[0][0]

    def sample(self, image: RasterImage, count: int = 1, temperature: float = 1.0,
               seed: int = 0) -> List[Tuple[SceneSpec, float]]:
        """
        Draws `count` specifications from the model distribution for one image

        Returns
        -------
        list of (SceneSpec, log-probability)
        """
        rng = derive_rng(seed, 'sample')
        with no_grad(), self.model.inference():
            feats = self.model.encode([image] * count)
            sequences, log_probs = sample_decode(self.model, feats, rng = rng, temperature = temperature)

        canvas = (image.width, image.height)
        return [
            (self.decode(sequence, canvas)[0], float(log_prob)) for sequence, log_prob in zip(sequences, log_probs)
        ]

    def reconstruct(self, image: RasterImage) -> Tuple[SceneSpec, RasterImage]:
        """
        Infers the specification and renders it back to an image

        Returns
        -------
        tuple of (SceneSpec, RasterImage)
        """
        spec = self.infer(image)
        return spec, render(spec, catalog = self.catalog)

    def score(self, image: RasterImage, gt: SceneSpec, reward: str = 'iou',
              prediction: Optional[SceneSpec] = None) -> float:
        """
        Reward of the prediction for `image` against a known ground truth

        Parameters
        ----------
        image: RasterImage
        gt: ground-truth SceneSpec
        reward: 'iou', 'inference' or 'image'
        prediction: SceneSpec to score instead of inferring one

        Returns
        -------
        float in [0,1]
        """
        prediction = prediction if prediction is not None else self.infer(image)
        return self.rewards.get_reward(reward)(prediction, gt, image)
